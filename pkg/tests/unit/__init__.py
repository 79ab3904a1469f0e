"""Unit tests for lesionbench."""
