"""Meta tests for configuration consistency."""
