"""Packaged reference data: the 78-frame demo scenario and its count labels."""
from importlib import resources
from pathlib import Path


def path(name: str) -> Path:
    """Filesystem path of a packaged data file."""
    return Path(resources.files(__package__) / name)


SCENARIO_78 = "scenario_78.json"
SCENARIO_78_LABELS = "scenario_78_labels.json"
