"""Pairwise overlap auditing of donated search result lists."""

from serpaudit._serpaudit import (
    clean_records,
    detect_clusters,
    fit_reach,
    generate_cohort,
    overlap_summary,
    run,
)

__all__ = [
    "clean_records",
    "detect_clusters",
    "fit_reach",
    "generate_cohort",
    "overlap_summary",
    "run",
]
