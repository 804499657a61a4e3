# Modules package
# Each module keeps its click command in router.py; main.py imports routers directly
