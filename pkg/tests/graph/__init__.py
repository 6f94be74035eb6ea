"""Tests for cavity_spin.graph."""
