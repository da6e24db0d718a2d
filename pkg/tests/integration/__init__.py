"""Integration tests for growth-engine."""
