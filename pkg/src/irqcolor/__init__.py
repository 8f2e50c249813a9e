"""IRQ coloring: QoS-driven masking of interrupt-driven workloads in mixed-criticality systems."""

from importlib import resources
from pathlib import Path

__version__ = "0.1.0"


def fixture_path(name: str) -> Path:
    """Path of a shipped fixture (config, masking override or scenario)."""
    return Path(str(resources.files(__name__) / "data" / name))
