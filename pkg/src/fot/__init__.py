"""fot: build, execute, cache, and optimize dynamic graphs of reasoning operations."""

__version__ = "0.1.0"
