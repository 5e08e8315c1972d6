"""Star-polygon instance segmentation pipeline for pellet quality analysis."""

from .config import TOOL_VERSION as __version__  # noqa: F401

__all__ = ["__version__"]
