"""Neuro-symbolic objectives over tabular concept extractors."""

from .data import LabeledData, from_pairs, make_dataset, support_inputs
from .dpl import UniformReasoningLayer, dpl_label_distribution, dpl_log_likelihood, dpl_nll, dpl_predict
from .extractor import ConceptExtractor, DistributionExtractor, Extractor
from .ltn import LTNGrounding, ltn_predict, ltn_predict_all, ltn_satisfaction
from .sl import DEFAULT_SL_WEIGHT, LabelHead, head_cross_entropy, semantic_loss, semantic_loss_terms

__all__ = [
    "ConceptExtractor", "DEFAULT_SL_WEIGHT", "DistributionExtractor", "Extractor", "LTNGrounding",
    "LabelHead", "LabeledData", "UniformReasoningLayer", "dpl_label_distribution",
    "dpl_log_likelihood", "dpl_nll", "dpl_predict", "from_pairs", "head_cross_entropy",
    "ltn_predict", "ltn_predict_all", "ltn_satisfaction", "make_dataset", "semantic_loss",
    "semantic_loss_terms", "support_inputs",
]
