"""Shared exception root so callers can catch one base type."""


class PrisamError(Exception):
    """Base class for all errors raised by this package."""
