"""F1 scores and confusion matrices against ground truth."""

from __future__ import annotations

import csv
import io
from typing import Sequence

import numpy as np
from sklearn.metrics import f1_score


def macro_f1(y_true, y_pred) -> float:
    """Macro-averaged F1 in percent over the classes that occur in either array."""
    return float(100.0 * f1_score(y_true, y_pred, average="macro", zero_division=0))


def concept_macro_f1(true_vectors: np.ndarray, pred_vectors: np.ndarray) -> float:
    """Mean over concept dimensions of the per-dimension macro F1, in percent."""
    true_vectors = np.atleast_2d(true_vectors)
    pred_vectors = np.atleast_2d(pred_vectors)
    return float(np.mean([macro_f1(true_vectors[:, j], pred_vectors[:, j])
                          for j in range(true_vectors.shape[1])]))


def confusion_per_dimension(true_vectors: np.ndarray, pred_vectors: np.ndarray,
                            cardinalities: Sequence[int]) -> list[np.ndarray]:
    """One ``[m_j, m_j]`` count matrix per dimension; rows are ground truth."""
    out = []
    for j, m in enumerate(cardinalities):
        mat = np.zeros((m, m), dtype=np.int64)
        np.add.at(mat, (true_vectors[:, j], pred_vectors[:, j]), 1)
        out.append(mat)
    return out


def confusion_per_vector(true_vectors: np.ndarray, pred_vectors: np.ndarray):
    """Counts over whole vectors: rows are ground-truth vectors, columns predicted vectors."""
    rows = sorted({tuple(int(v) for v in g) for g in true_vectors})
    cols = sorted(set(rows) | {tuple(int(v) for v in c) for c in pred_vectors})
    ri = {r: i for i, r in enumerate(rows)}
    ci = {c: i for i, c in enumerate(cols)}
    mat = np.zeros((len(rows), len(cols)), dtype=np.int64)
    for g, c in zip(true_vectors, pred_vectors):
        mat[ri[tuple(int(v) for v in g)], ci[tuple(int(v) for v in c)]] += 1
    return rows, cols, mat


def confusion_csv(row_labels, col_labels, matrix: np.ndarray) -> str:
    """CSV with the predicted values as header and ground-truth values in the first column."""

    def name(v) -> str:
        return "-".join(str(int(x)) for x in v) if isinstance(v, tuple) else str(int(v))

    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["true\\pred", *(name(c) for c in col_labels)])
    for r, row in zip(row_labels, matrix):
        writer.writerow([name(r), *(int(x) for x in row)])
    return buf.getvalue()
