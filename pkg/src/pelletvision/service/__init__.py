"""HTTP service wrapping the pipeline; see :mod:`pelletvision.service.app`."""

from .app import app, create_app

__all__ = ["app", "create_app"]
