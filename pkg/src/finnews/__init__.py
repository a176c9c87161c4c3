"""Financial-news LLM analytics pipeline.

Ingests news corpora, renders chat prompts, builds instruction-tuning
datasets, parses four-section model responses with entity-sentiment JSON,
and turns sentiments into predictive features and value-at-risk numbers.
"""

from .corpus import NewsArticle, SplitSpec, clean_text, load_articles, split_dataset
from .gateway import Gateway, GenerationParams, HttpCompletionBackend, MockBackend
from .prompting import (
    InstructionRecord,
    PromptEnvelope,
    build_instruction_record,
    export_training_file,
    render_prompt,
)
from .report_parser import (
    AnalysisReport,
    EntitySentiment,
    parse_report,
    render_report,
)
from .analytics import (
    FeatureVector,
    PredictiveDistribution,
    ReportStore,
    aggregate_features,
    encode_sentiment,
    fit_bootstrap_regression,
    var_quantile,
)
from .run_monitor import LossCurvePoint, RunRecord, compare_runs, detect_overfit, parse_loss_log

__version__ = "0.1.0"
