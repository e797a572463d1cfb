"""Reference adapters for the contextual-privacy-policy pipeline."""

__version__ = "0.1.0"
