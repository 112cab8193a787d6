"""Integration tests for AIorgianization."""
