"""Verifiable-reward RL workbench: shaped rewards, GRPO, and MOS/correlation tooling."""

__version__ = "0.1.0"
