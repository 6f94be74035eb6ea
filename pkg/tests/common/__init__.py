"""Tests for the shared logging and telemetry helpers."""
