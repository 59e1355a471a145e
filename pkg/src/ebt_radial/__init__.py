"""EBT particle method for the radially reduced non-local proliferation model."""

__version__ = "0.1.0"
