"""Homeostatic meta-regulation of PPO: stress, curiosity and confidence signals
that modulate learning rate, entropy bonus and clip range during training."""

__version__ = "0.1.0"
