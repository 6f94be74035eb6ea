"""Tests for cavity_spin.dynamics."""
