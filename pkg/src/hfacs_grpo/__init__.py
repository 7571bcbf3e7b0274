"""GRPO training engine for multi-label HFACS classification at desk scale."""

__version__ = "0.1.0"
