from __future__ import annotations

import pytest

from gcrdialect.corpus import GCR_TAGS
from gcrdialect.synth import GeneratorSettings, generate

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def planted3():
    """Three-tag planted-marker fixture with parallel pairs, default knobs."""
    return generate(GCR_TAGS[:3], GeneratorSettings(per_class=300, pairs_per_tag=200), seed=0)


@pytest.fixture(scope="session")
def small6():
    """Small six-tag fixture, traditional script for HK/TW/MAC."""
    return generate(GCR_TAGS, GeneratorSettings(per_class=30, scripted=("HK", "TW", "MAC")), seed=1)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
