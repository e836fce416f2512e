"""Shared exception base for the package.

Every module-specific error derives from :class:`LklmError` so callers
(and the CLI) can catch one type when they do not care which stage failed.
"""

from __future__ import annotations


class LklmError(Exception):
    """Base class for all errors raised by this package."""
