"""Fixtures for driving CLI commands in-process."""

import io

import pytest
from rich.console import Console

from lesionbench.config import JOBS_ENV_VAR


@pytest.fixture(autouse=True)
def _clean_environment(monkeypatch):
    monkeypatch.delenv(JOBS_ENV_VAR, raising=False)


@pytest.fixture
def console():
    """Console writing to an in-memory buffer; read it with console.file.getvalue()."""
    return Console(file=io.StringIO(), width=120, color_system=None)
