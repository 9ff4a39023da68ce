"""Time-changed level-one limit order book: analytics, oracle, simulation,
diffusion limits and intensity estimation."""

__version__ = "0.1.0"
