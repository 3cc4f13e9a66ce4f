"""Learning to teach in cooperative two-agent reinforcement learning."""

__version__ = "0.1.0"
