"""
User Interface Module

Command line front end of the pipeline.
"""

from .cli import build_parser, main

__all__ = ["build_parser", "main"]
