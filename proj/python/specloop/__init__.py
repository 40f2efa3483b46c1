"""Python access to the specloop core (analysis helpers and headless runs)."""

from ._core import (
    SpecloopError,
    bundle_metrics,
    descriptive_stats,
    metrics_csv_header,
    parse_spec,
    quantile,
    render_for_prompt,
    run_script,
    sha256_hex,
    spearman_rho,
    test_diversity,
    verify_bundle,
)

__all__ = [
    "SpecloopError",
    "bundle_metrics",
    "descriptive_stats",
    "metrics_csv_header",
    "parse_spec",
    "quantile",
    "render_for_prompt",
    "run_script",
    "sha256_hex",
    "spearman_rho",
    "test_diversity",
    "verify_bundle",
]
