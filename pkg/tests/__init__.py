"""AIorgianization test suite."""
