"""Enumeration and counting of deterministic reasoning shortcuts."""

from .alpha import AlphaMap
from .count import (
    DEFAULT_LISTING_CEILING,
    CensusResult,
    Classification,
    MitigationSpec,
    classify_trained_map,
    count_brute_force,
    count_closed_form,
    count_closed_form_literal,
    is_det_opt,
    support_components,
)

__all__ = [
    "AlphaMap", "CensusResult", "Classification", "DEFAULT_LISTING_CEILING", "MitigationSpec",
    "classify_trained_map", "count_brute_force", "count_closed_form", "count_closed_form_literal",
    "is_det_opt", "support_components",
]
