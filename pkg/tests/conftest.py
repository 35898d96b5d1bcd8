from pathlib import Path

import pytest

from aldus.config import load_config

SCENARIOS = Path(__file__).resolve().parent.parent / "scenarios"


def scenario(name: str):
    return load_config(SCENARIOS / f"{name}.yaml")


@pytest.fixture(scope="session")
def clear_cfg():
    return scenario("reference_clear")


@pytest.fixture(scope="session")
def low_cfg():
    return scenario("reference_low")


@pytest.fixture(scope="session")
def high_cfg():
    return scenario("reference_high")


def pytest_terminal_summary(terminalreporter):
    lines = []
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            if getattr(rep, "when", "call") != "call" and outcome != "error":
                continue
            props = dict(getattr(rep, "user_properties", ()))
            if "criterion" in props:
                lines.append((props["criterion"], "PASS" if outcome == "passed" else "FAIL", props.get("detail", "")))
    if lines:
        terminalreporter.section("acceptance criteria")
        for num, verdict, detail in sorted(lines):
            terminalreporter.write_line(f"criterion {num:2d}: {verdict}  {detail}")
