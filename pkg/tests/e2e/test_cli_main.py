"""End-to-end tests for the lesionbench entry point."""

import sys

import pytest

from lesionbench import __version__
from lesionbench.cli import main


def _exit_code(monkeypatch, *argv):
    monkeypatch.setattr(sys, "argv", ["lesionbench", *argv])
    with pytest.raises(SystemExit) as exc_info:
        main()
    return exc_info.value.code


def test_no_arguments_shows_help(monkeypatch, capsys):
    assert _exit_code(monkeypatch) == 0
    assert "Commands:" in capsys.readouterr().out


def test_version(monkeypatch, capsys):
    assert _exit_code(monkeypatch, "--version") == 0
    assert __version__ in capsys.readouterr().out


def test_unknown_command(monkeypatch, capsys):
    assert _exit_code(monkeypatch, "train") == 1
    assert "Unknown command: train" in capsys.readouterr().out


def test_dispatches_to_subcommand(monkeypatch, capsys):
    assert _exit_code(monkeypatch, "schedule", "--sizes", "4,9") == 0
    assert capsys.readouterr().out.startswith("dataset,count,probability\n")


def test_subcommand_usage_error(monkeypatch):
    assert _exit_code(monkeypatch, "folds", "--k", "5") == 1
