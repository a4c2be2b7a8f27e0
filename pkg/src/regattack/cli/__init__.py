"""CLI interface for regattack."""
