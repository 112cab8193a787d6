"""Unit tests for AIorgianization."""
