"""Interactive survey paper generation: search, categorize, outline, compose, export."""

__version__ = "0.1.0"
