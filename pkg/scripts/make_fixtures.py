#!/usr/bin/env python3
"""Regenerate the committed fixture bundle under fixtures/.

Deterministic (fixed seed), so reruns are byte-identical. The GKG fixture is
a 1,000-record tab-separated file in the 27-field layout; a slice of the
URLs carries risk-relevant slugs so the demo pipeline produces matches.
"""
from __future__ import annotations

import random
import sys
import zipfile
from pathlib import Path

FIXTURES = Path(__file__).resolve().parents[1] / "fixtures"

RISKS = [
    "Cyber-attacks targeting the retail banking business causing a loss of customer data",
    "US - China trade war escalation affecting the corporate and investment banking business causing a decrease in revenues",
    "Employee misconduct in the investment banking business causing a reputational damage",
    "Technology infrastructure failure in the corporate and investment banking business causing a reputational damage and/or monetary loss",
]

RELEVANT_SLUGS = [
    "cyber-attacks-hit-retail-banking-customer-data",
    "major-bank-reports-cyber-attacks-on-customer-accounts",
    "cyber-attacks-surge-against-banking-sector",
    "us-china-trade-war-escalation-rattles-markets",
    "trade-war-escalation-between-us-and-china-deepens",
    "china-us-trade-war-hits-investment-banking-revenues",
    "employee-misconduct-probe-at-investment-bank",
    "bank-fires-traders-over-employee-misconduct",
    "misconduct-scandal-costs-employee-bonuses",
    "technology-infrastructure-failure-halts-trading",
    "bank-outage-blamed-on-technology-infrastructure-failure",
    "infrastructure-failure-disrupts-technology-services",
]

FILLER_WORDS = (
    "local council approves new park budget".split()
    + "science fair winners announced this friday".split()
    + "community garden harvest festival season opens".split()
    + "library renovation schedule moves forward quietly".split()
    + "museum unveils restored painting collection downtown".split()
)

SOURCES = ["example-wire.com", "global-desk.net", "daily-ledger.org"]
THEMES = ["ECON_TRADE", "CYBER_SECURITY", "GOV_REGULATION", "", "TECH_OUTAGE"]


def gkg_line(rng: random.Random, n: int, slug: str) -> str:
    fields = [""] * 27
    fields[0] = f"2019110{rng.randint(1, 6)}{rng.randint(0, 235959):06d}-{n}"
    fields[1] = f"201911{rng.randint(1, 28):02d}{rng.randint(0, 23):02d}{rng.randint(0, 59):02d}{rng.randint(0, 59):02d}"
    fields[2] = "1"
    fields[3] = rng.choice(SOURCES)
    fields[4] = f"https://{fields[3]}/news/{slug}"
    fields[7] = rng.choice(THEMES)
    fields[15] = f"{rng.uniform(-8, 8):.2f},{rng.uniform(0, 8):.2f},{rng.uniform(0, 8):.2f},{rng.uniform(0, 8):.2f},0,0,{rng.randint(80, 900)}"
    return "\t".join(fields)


def main() -> int:
    FIXTURES.mkdir(exist_ok=True)
    rng = random.Random(20191104)

    (FIXTURES / "demo_risks.txt").write_text(
        "\n".join(RISKS) + "\n", encoding="utf-8"
    )

    slugs = list(RELEVANT_SLUGS)
    while len(slugs) < 1000:
        words = rng.sample(FILLER_WORDS, rng.randint(4, 7))
        slugs.append("-".join(words) + f"-{len(slugs)}")
    lines = [gkg_line(rng, n, slug) for n, slug in enumerate(slugs)]
    gkg_text = "\n".join(lines) + "\n"
    (FIXTURES / "news_gkg_1000.tsv").write_text(gkg_text, encoding="utf-8")

    with zipfile.ZipFile(
        FIXTURES / "news_gkg_small.zip", "w", zipfile.ZIP_DEFLATED
    ) as zf:
        info = zipfile.ZipInfo("news_gkg_small.tsv", date_time=(2019, 11, 4, 12, 0, 0))
        zf.writestr(info, "\n".join(lines[:20]) + "\n")

    (FIXTURES / "google_news.rss").write_text(RSS_FIXTURE, encoding="utf-8")
    (FIXTURES / "demo.conf").write_text(DEMO_CONF, encoding="utf-8")
    print(f"wrote fixtures to {FIXTURES}")
    return 0


RSS_FIXTURE = """<?xml version="1.0" encoding="UTF-8"?>
<rss version="2.0">
  <channel>
    <title>Example Business News</title>
    <language>en</language>
    <item>
      <title>Cyber attacks on retail banking raise alarm over customer data</title>
      <link>https://example-wire.com/rss/cyber-attacks-retail-banking</link>
      <pubDate>Mon, 04 Nov 2019 09:15:00 GMT</pubDate>
    </item>
    <item>
      <title>Trade war escalation weighs on corporate banking revenues</title>
      <link>https://example-wire.com/rss/trade-war-escalation-banking</link>
      <pubDate>Mon, 04 Nov 2019 10:40:00 GMT</pubDate>
    </item>
    <item>
      <title>Regulator opens employee misconduct review at investment bank</title>
      <link>https://example-wire.com/rss/employee-misconduct-review</link>
      <pubDate>Mon, 04 Nov 2019 11:05:00 GMT</pubDate>
    </item>
  </channel>
</rss>
"""

DEMO_CONF = """# riskradar demo configuration (paths relative to this file)
store.root = demo_store
risks.path = demo_risks.txt
fixtures.dir = .

encoder.dim = 384
encoder.tf_weighting = sublinear

match.mode = full_text
match.threshold = 0.35
match.top_k = 10
match.keyword_prefilter = true

source.gdelt.kind = local_fixture
source.gdelt.locator = news_gkg_1000.tsv
source.gdelt.format = gkg
source.rss.kind = local_fixture
source.rss.locator = google_news.rss
source.rss.format = rss

serve.addr = 127.0.0.1:8787
"""


if __name__ == "__main__":
    sys.exit(main())
