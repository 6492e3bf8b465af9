from __future__ import annotations

import contextlib
from dataclasses import dataclass
from pathlib import Path

import pytest
from hypothesis import HealthCheck, settings

from jetvar.problem import load_problem

PROBLEMS = Path(__file__).resolve().parent.parent / "problems"

settings.register_profile(
    "jet",
    max_examples=25,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow, HealthCheck.data_too_large],
)
settings.load_profile("jet")

_ACCEPTANCE: list[str] = []


@dataclass
class Outcome:
    ok: bool = False
    detail: str = ""


class Recorder:
    """Records one PASS/FAIL line per criterion, including on exceptions."""

    @contextlib.contextmanager
    def criterion(self, number: int, title: str):
        out = Outcome()
        try:
            yield out
        except BaseException as exc:
            out.ok, out.detail = False, f"{type(exc).__name__}: {exc}"
            self._emit(number, title, out)
            raise
        self._emit(number, title, out)
        assert out.ok, out.detail

    def _emit(self, number, title, out):
        line = f"{'PASS' if out.ok else 'FAIL'}  criterion {number:>2} ({title}): {out.detail}"
        _ACCEPTANCE.append(line)
        print(line)


@pytest.fixture
def acceptance():
    return Recorder()


@pytest.fixture
def problem():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = load_problem(PROBLEMS / f"{name}.jv")
        return cache[name]

    return get


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(_ACCEPTANCE, key=lambda s: int(s.split("criterion")[1].split("(")[0])):
        terminalreporter.write_line(line)
