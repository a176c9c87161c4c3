#!/usr/bin/env python3
"""End-to-end offline demo: corpus -> prompts -> mock completions -> parsed
reports -> sentiment features -> bootstrap VaR.

No network needed; a mock backend is pre-loaded with synthetic responses in
the four-section format, one per generated article.
"""

from __future__ import annotations

import argparse
import random
import tempfile
from datetime import date, timedelta
from pathlib import Path

import numpy as np

from finnews.analytics import (
    ReportStore,
    aggregate_features,
    fit_bootstrap_regression,
    var_quantile,
)
from finnews.corpus import NewsArticle, SplitSpec, split_dataset
from finnews.gateway import Gateway, GenerationParams, MockBackend
from finnews.prompting import PromptEnvelope, render_prompt
from finnews.report_parser import (
    AnalysisReport,
    EntitySentiment,
    parse_report,
    render_report,
)

COMPANIES = ["Acme Motors", "Globex", "Initech"]
SENTIMENTS = ["negative", "neutral", "positive"]


def synth_article(i: int, rng: random.Random) -> NewsArticle:
    subject = rng.choice(COMPANIES)
    body = f"{subject} moved on quarter {i} results while peers watched."
    return NewsArticle(
        id=f"demo-{i:04d}",
        publisher="CNBC.com",
        title=f"{subject} update {i}",
        body=body,
        published_at=date(2018, 1, 1) + timedelta(days=i),
    )


def synth_response(article: NewsArticle, rng: random.Random) -> str:
    entities = tuple(
        EntitySentiment(entity=c, entity_name="company", sentiment=rng.choice(SENTIMENTS))
        for c in rng.sample(COMPANIES, rng.randint(1, 3))
    )
    report = AnalysisReport(
        analysis=f"Coverage of {article.title}.",
        main_points=(f"{entities[0].entity} drew attention.", "Peers reacted in kind."),
        summary=f"{article.title} in brief.",
        entities=entities,
    )
    return render_report(report)


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--articles", type=int, default=40)
    parser.add_argument("--seed", type=int, default=7)
    args = parser.parse_args()

    rng = random.Random(args.seed)
    articles = [synth_article(i, rng) for i in range(args.articles)]
    train, validation = split_dataset(articles, SplitSpec(0.25, seed=args.seed))
    print(f"corpus: {len(articles)} articles -> {len(train)} train / {len(validation)} validation")

    mock = MockBackend()
    for article in articles:
        prompt = render_prompt(PromptEnvelope(input_text=article.body))
        mock.register_fixture(prompt, synth_response(article, rng))
    gateway = Gateway(mock, backoff_base=0)

    with tempfile.TemporaryDirectory() as tmp:
        store = ReportStore(Path(tmp) / "reports.jsonl")
        params = GenerationParams(max_new_tokens=512)
        for article in articles:
            completion = gateway.complete(
                render_prompt(PromptEnvelope(input_text=article.body)), params
            )
            report = parse_report(completion.text)
            store.append_report(article.id, article.published_at, report)
        print(f"store: {store.stats()}")

        entity = COMPANIES[0]
        windows = [
            (date(2018, 1, 1), date(2018, 1, 14)),
            (date(2018, 1, 15), date(2018, 1, 28)),
            (date(2018, 1, 29), date(2018, 2, 11)),
        ]
        features = aggregate_features(store, entity, windows)
        for fv in features:
            print(
                f"{entity} {fv.window_start}..{fv.window_end}: "
                f"neg={fv.n_negative} neu={fv.n_neutral} pos={fv.n_positive} "
                f"ordinal_mean={fv.ordinal_mean:+.3f}"
            )

        # toy target: next-window return driven by the ordinal sentiment mean
        x = np.array([[fv.ordinal_mean] for fv in features])
        gen = np.random.default_rng(args.seed)
        y = 0.8 * x[:, 0] + gen.normal(scale=0.05, size=len(x))
        if len(x) >= 3:
            result = fit_bootstrap_regression(x, y, x, draws=500, seed=args.seed)
            var = var_quantile(result.distributions[-1], alpha=0.05)
            print(f"VaR(0.05) of predicted target for the last window: {var:+.4f}")


if __name__ == "__main__":
    main()
