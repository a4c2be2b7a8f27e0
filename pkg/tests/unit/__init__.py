"""Unit tests for regattack."""
