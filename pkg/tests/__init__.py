"""
Test package for the cavity spin machine.

This package contains all test modules including:
- Graph, compiler and dynamics tests
- Analysis and oracle checks
- Protocol and CLI integration tests
"""

__version__ = "1.0.0"
