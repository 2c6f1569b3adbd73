"""HTTP service powering the interactive UI."""

from .app import create_app

__all__ = ["create_app"]
