"""Shared helpers for the demo scripts: output folder and optional plotting."""

import os
from pathlib import Path

OUT = Path(os.environ.get("DEMO_OUT", Path(__file__).with_name("out")))
OUT.mkdir(parents=True, exist_ok=True)


def pyplot():
    """matplotlib.pyplot with a file-only backend, or None if unavailable."""
    try:
        import matplotlib
        matplotlib.use("Agg")
        import matplotlib.pyplot as plt
    except ImportError:
        return None
    return plt
