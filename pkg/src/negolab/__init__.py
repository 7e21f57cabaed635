"""Laboratory for the iterated two-agent resource-allocation negotiation game."""

__version__ = "0.1.0"
