"""Tests for cavity_spin.analysis."""
