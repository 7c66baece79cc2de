"""Shared fixtures: acceptance config runs and the criterion summary lines."""
from __future__ import annotations

import json
from pathlib import Path

import pytest

from bosonlab.cli import main

ROOT = Path(__file__).resolve().parents[1]
ACCEPTANCE_DIR = ROOT / "configs" / "acceptance"

_LINES = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LINES] = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for _, line in sorted(lines, key=lambda x: x[0]):
        terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """``criterion(n, ok, detail)`` prints and records one PASS/FAIL line."""

    def record(n: int, ok: bool, detail: str) -> bool:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {n:2d}: {detail}"
        print(line)
        request.config.stash[_LINES].append((n, line))
        return ok

    return record


class ConfigRuns:
    """Runs acceptance configs through the CLI once and caches the artifacts."""

    def __init__(self, base: Path):
        self.base = base
        self._cache: dict[str, dict] = {}

    @staticmethod
    def names() -> list[str]:
        return sorted(p.stem for p in ACCEPTANCE_DIR.glob("*.toml"))

    def execute(self, name: str, tag: str) -> dict:
        out = self.base / name / tag
        status = main(["run", str(ACCEPTANCE_DIR / f"{name}.toml"), "--out", str(out)])
        raw = (out / "result.json").read_bytes() if status == 0 else b""
        manifest = json.loads((out / "manifest.json").read_text()) if status == 0 else {}
        return {
            "status": status,
            "bytes": raw,
            "result": json.loads(raw) if raw else {},
            "wall": manifest.get("wall_time_s", float("nan")),
        }

    def get(self, name: str) -> dict:
        if name not in self._cache:
            self._cache[name] = self.execute(name, "first")
        return self._cache[name]


@pytest.fixture(scope="session")
def acceptance_runs(tmp_path_factory) -> ConfigRuns:
    return ConfigRuns(tmp_path_factory.mktemp("acceptance"))
