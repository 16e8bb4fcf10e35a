"""
Settings Module

Contains all configuration and settings for the private speech pipeline.
The typed experiment configs live in settings.experiment, which depends on
utils and is imported explicitly by callers.
"""

from .config import Config

__all__ = ["Config"]
