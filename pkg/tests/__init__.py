"""Tests for regattack."""
