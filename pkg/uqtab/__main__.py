"""
python -m uqtab
"""
import sys

from uqtab.main import main

sys.exit(main())
