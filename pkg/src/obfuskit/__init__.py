"""Perfect-obfuscation release design via local information geometry."""

__version__ = "0.1.0"
