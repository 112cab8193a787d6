"""End-to-end tests for AIorgianization."""
