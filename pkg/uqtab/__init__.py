# uqtab - uncertainty-aware tabular classification toolkit

__version__ = "1.0.0"
