"""Tests for cavity_spin.oracle."""
