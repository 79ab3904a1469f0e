"""Tests for lesionbench."""
