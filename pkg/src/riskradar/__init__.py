"""riskradar: decompose institutional risks, graph them, and rank news."""

__version__ = "0.1.0"
