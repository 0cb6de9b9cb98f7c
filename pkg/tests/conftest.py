from __future__ import annotations

import pytest

from riskradar.extraction import (
    ExtractionLexicon,
    RiskRecord,
    decompose_risk,
)

# The four demonstration risks the whole artifact is calibrated against.
DEMO_RISKS = [
    "Cyber-attacks targeting the retail banking business causing a loss of customer data",
    "US - China trade war escalation affecting the corporate and investment banking business causing a decrease in revenues",
    "Employee misconduct in the investment banking business causing a reputational damage",
    "Technology infrastructure failure in the corporate and investment banking business causing a reputational damage and/or monetary loss",
]


@pytest.fixture(scope="session")
def lexicon() -> ExtractionLexicon:
    return ExtractionLexicon()


@pytest.fixture(scope="session")
def demo_records() -> list[RiskRecord]:
    return [
        RiskRecord(id=f"R{n:04d}", raw_text=text, source_tag="demo")
        for n, text in enumerate(DEMO_RISKS, start=1)
    ]


@pytest.fixture(scope="session")
def demo_decompositions(demo_records, lexicon):
    return [decompose_risk(record, lexicon) for record in demo_records]


@pytest.fixture()
def risks_file(tmp_path):
    path = tmp_path / "risks.txt"
    path.write_text("\n".join(DEMO_RISKS) + "\n", encoding="utf-8")
    return path
