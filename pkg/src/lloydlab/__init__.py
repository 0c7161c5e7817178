"""Lloyd's K-Means with serial, persistent-worker and fork-per-step engines."""

__version__ = "0.1.0"
