"""Bundled example scenarios, addressable by name."""

from importlib.resources import files


def scenario_path(name: str):
    """Filesystem path of a bundled scenario (without the .dbnet suffix)."""
    return files(__package__) / f"{name}.dbnet"


def scenario_text(name: str) -> str:
    return scenario_path(name).read_text(encoding="utf-8")
