"""Temperature-criteria line ratings and their effect on dispatch cost."""

__version__ = "0.1.0"
