"""Reasoning-shortcut auditor for neuro-symbolic predictors."""

__version__ = "0.1.0"
