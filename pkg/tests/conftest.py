import json
import os
import sys
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

HERE = Path(__file__).resolve().parent
sys.path.insert(0, str(HERE))
sys.path.insert(0, str(HERE / "golden"))

settings.register_profile(
    "default",
    max_examples=60,
    deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

GOLDEN = HERE / "golden"
REPO = HERE.parent


@pytest.fixture(scope="session")
def golden():
    """Golden corpus: ``{case: (sample, xstar, meta)}``."""
    from cfkm.io import load_counterfactual_csv, load_sample_csv

    doc = json.loads((GOLDEN / "expected.json").read_text())
    out = {}
    for name, meta in doc.items():
        s = load_sample_csv(GOLDEN / f"{name}_sample.csv")
        xs = load_counterfactual_csv(GOLDEN / f"{name}_xstar.csv", d=s.d)
        out[name] = (s, xs, meta)
    return out


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def acceptance():
    """Record ``(criterion, passed, detail)``; printed as one line each at the end of the run."""

    def record(criterion: int, passed: bool, detail: str = "") -> bool:
        ACCEPTANCE[criterion] = (bool(passed), detail)
        print(f"criterion {criterion}: {'PASS' if passed else 'FAIL'} {detail}")
        return bool(passed)

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(ACCEPTANCE):
        ok, detail = ACCEPTANCE[k]
        terminalreporter.write_line(f"criterion {k}: {'PASS' if ok else 'FAIL'}  {detail}")
