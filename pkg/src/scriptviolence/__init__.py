"""Violence classification and role analysis for movie-script dialogue."""

__version__ = "0.1.0"
