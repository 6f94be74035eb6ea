"""Tests for cavity_spin.protocol."""
