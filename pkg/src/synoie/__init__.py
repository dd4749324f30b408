"""Open information extraction over word-level syntactic graphs."""

__version__ = "0.1.0"
