import os
from pathlib import Path


def RESULTS_ROOT() -> str:
    return os.getenv("RESULTS_ROOT", "results/")


def results_dir(name: str) -> str:
    """
    return path for a named results directory under RESULTS_ROOT
    (creating it first, if needed)
    """
    path = Path(RESULTS_ROOT()) / name
    path.mkdir(parents=True, exist_ok=True)
    return str(path)
