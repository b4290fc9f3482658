"""Symbolic task descriptions and knowledge compilation."""

from .ast import BinOp, Const, Neg, Not, Var
from .compiler import (
    Block,
    CompiledKnowledge,
    block_factorization,
    block_subspec,
    class_sizes,
    compile_knowledge,
    compile_label_map,
    consistency_classes,
    full_support,
)
from .dsl import load_task, parse_task, to_dsl
from .task import ConceptSpace, Knowledge, LabelSpace, Support, TaskSpec

__all__ = [
    "BinOp", "Block", "CompiledKnowledge", "ConceptSpace", "Const", "Knowledge", "LabelSpace",
    "Neg", "Not", "Support", "TaskSpec", "Var", "block_factorization", "block_subspec",
    "class_sizes", "compile_knowledge", "compile_label_map", "consistency_classes",
    "full_support", "load_task", "parse_task", "to_dsl",
]
