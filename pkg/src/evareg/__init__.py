"""EV-aggregator operation toolkit: charging schedules, regulation-market
bidding, and a CVaR-based rolling-horizon MPC."""

__version__ = "0.1.0"
