"""HTTP mapping service: stream frames in, query maps and landing sites out."""

from .app import create_app

__all__ = ["create_app"]
