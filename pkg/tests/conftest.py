import shutil
import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from demand_pulse.fixture import bundled_dir  # noqa: E402

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def criterion():
    """Record a pass/fail line for an acceptance criterion, then assert it."""

    def check(name: str, ok: bool, detail: str = ""):
        line = f"[{'PASS' if ok else 'FAIL'}] {name}" + (f" :: {detail}" if detail else "")
        _ACCEPTANCE_LINES.append(line)
        print(line)
        assert ok, line

    return check


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def fixture_dir(tmp_path) -> Path:
    """A private copy of the bundled synthetic dataset."""
    dest = tmp_path / "fixture"
    shutil.copytree(bundled_dir(), dest)
    return dest


@pytest.fixture(scope="session")
def fixture_run(tmp_path_factory):
    """One full pipeline run over the bundled fixture, shared read-only."""
    from demand_pulse.config import load_config
    from demand_pulse.pipeline import run

    root = tmp_path_factory.mktemp("fixture_run")
    shutil.copytree(bundled_dir(), root / "fixture")
    config = load_config(root / "fixture" / "fixture.ini")
    out = root / "out"
    run(config, out, threads=1)
    return config, out
