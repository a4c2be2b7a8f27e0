"""Integration tests for regattack."""
