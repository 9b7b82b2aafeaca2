"""Open-set active learning with bidirectional (positive/negative) uncertainty sampling."""

__version__ = "0.1.0"
