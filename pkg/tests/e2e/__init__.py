"""End-to-end tests for lesionbench."""
