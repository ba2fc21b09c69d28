"""reviewpulse: deviation events and cross-app correlated events in app review streams."""

from .config import ConfigError, MarketConfig, load_config, validate_config
from .ingest import MarketCatalog, RatingScale, Review, ScaleMap, build_catalog, parse_reviews
from .metrics import MetricKind, TimeWindow
from .pipeline import analyze_catalog, run_pipeline

__version__ = "0.1.0"

__all__ = [
    "ConfigError",
    "MarketCatalog",
    "MarketConfig",
    "MetricKind",
    "RatingScale",
    "Review",
    "ScaleMap",
    "TimeWindow",
    "analyze_catalog",
    "build_catalog",
    "load_config",
    "parse_reviews",
    "run_pipeline",
    "validate_config",
    "__version__",
]
