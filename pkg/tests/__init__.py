"""
Test suite for the private speech pipeline.
"""

# This file makes the tests directory a Python package
