"""Quality and meta tests for lesionbench."""
