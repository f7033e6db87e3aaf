"""Query-by-example retrieval over property graphs, weakly supervised by content edit distance."""

__version__ = "0.1.0"
