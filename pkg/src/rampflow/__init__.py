"""Highway on-ramp micro-simulation with learned ACC headway selection."""

__version__ = "0.1.0"
