#!/usr/bin/env python3
"""Generate a synthetic financial-news corpus for desk-scale experiments.

Writes a CSV in the canonical ingestion schema {id, publisher, date, title,
text}. Bodies are templated noise, good enough to exercise splitting,
prompting, and length budgeting.
"""

from __future__ import annotations

import argparse
import csv
import random
from datetime import date, timedelta
from pathlib import Path

PUBLISHERS = ["Bloomberg.com", "CNBC.com", "reuters.com", "wsj.com", "fortune.com"]
COMPANIES = ["Acme Motors", "Globex", "Initech", "Umbrella Retail", "Vandelay Industries"]
MOVES = ["rallied", "slid", "held steady", "surged", "dropped sharply"]
REASONS = [
    "after earnings beat expectations",
    "as guidance disappointed analysts",
    "on stronger quarterly deliveries",
    "amid rising interest rate expectations",
    "following a downgrade by a major bank",
]


def make_row(i: int, rng: random.Random, start: date) -> list[str]:
    company = rng.choice(COMPANIES)
    move = rng.choice(MOVES)
    reason = rng.choice(REASONS)
    when = start + timedelta(days=rng.randint(0, 180))
    title = f"{company} {move}"
    sentences = [f"{company} shares {move} {reason}."]
    for _ in range(rng.randint(2, 6)):
        other = rng.choice(COMPANIES)
        sentences.append(f"{other} {rng.choice(MOVES)} {rng.choice(REASONS)}.")
    return [f"syn-{i:06d}", rng.choice(PUBLISHERS), when.isoformat(), title, " ".join(sentences)]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--rows", type=int, default=1000)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--out", default="synthetic_corpus.csv")
    args = parser.parse_args()

    rng = random.Random(args.seed)
    out = Path(args.out)
    with out.open("w", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["id", "publisher", "date", "title", "text"])
        for i in range(args.rows):
            writer.writerow(make_row(i, rng, date(2018, 1, 1)))
    print(f"wrote {args.rows} rows to {out}")


if __name__ == "__main__":
    main()
