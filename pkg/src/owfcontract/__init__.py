"""Monte Carlo model of offshore wind farm corrective maintenance under
performance-based contracts, with multi-objective tuning of contract terms."""

__version__ = "0.1.0"
