"""Media Sharing Index: correspondence-analysis scaling of user-outlet sharing."""

__version__ = "0.1.0"
