"""Tests for cavity_spin.compiler."""
