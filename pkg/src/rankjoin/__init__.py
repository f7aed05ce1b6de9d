"""Three-party secure join queries over replicated secret shares."""

__version__ = "0.1.0"
