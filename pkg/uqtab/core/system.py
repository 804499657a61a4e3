"""
Shared services for host information
Recorded in report provenance and used to size worker pools
"""

import os
import platform
from typing import Dict

import numpy as np
import psutil


def get_os_info() -> str:
    """
    Returns operating system information
    Example: "Linux 6.1.0"
    """
    return f"{platform.system()} {platform.release()}"


def get_cpu_count() -> int:
    """
    Returns the number of physical cores
    Falls back to logical cores, then 1
    """
    try:
        count = psutil.cpu_count(logical=False)
    except Exception:
        count = None
    return count or os.cpu_count() or 1


def default_workers() -> int:
    """Worker pool size when the configuration asks for 0 (one per physical core)"""
    return max(1, get_cpu_count())


def get_ram_total() -> str:
    """
    Returns total RAM
    Example: "15.5GB"
    """
    try:
        ram = psutil.virtual_memory()
        return f"{round(ram.total / (1024**3), 1)}GB"
    except Exception:
        return "N/A"


def get_host_info() -> Dict[str, str]:
    """
    Host description recorded in report provenance
    Not part of canonical output
    """
    return {
        "os_name": get_os_info(),
        "python": platform.python_version(),
        "numpy": np.__version__,
        "cpu_cores": str(get_cpu_count()),
        "ram_total": get_ram_total(),
    }
