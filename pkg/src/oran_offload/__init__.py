"""Task offloading over an O-RAN fronthaul with DQL agents and federated traffic forecasting."""

__version__ = "0.1.0"
