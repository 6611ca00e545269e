"""polgen: deterministic needs-driven human-mobility data generator."""

__version__ = "0.1.0"
