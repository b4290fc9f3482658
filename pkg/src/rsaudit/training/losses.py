"""Training objectives with mitigation terms and exact gradients."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..autodiff import Tensor, parameter
from ..census.count import supervision_pins
from ..errors import NonFiniteLoss
from ..knowledge.compiler import compile_knowledge
from ..knowledge.task import TaskSpec
from ..predictors.data import LabeledData, make_dataset, support_inputs
from ..predictors.dpl import UniformReasoningLayer, dpl_log_likelihood, dpl_predict
from ..predictors.extractor import ConceptExtractor
from ..predictors.ltn import LTNGrounding, ltn_predict_all
from ..predictors.sl import DEFAULT_SL_WEIGHT, LabelHead, head_cross_entropy, semantic_loss_terms

OBJECTIVES = ("dpl", "sl", "ltn")


@dataclass(frozen=True)
class MitigationLossConfig:
    """Weights of the mitigation terms and what supervision is observed.

    ``supervised_indices`` are 0-based dimensions; ``supervised_values``
    marks concept values observed wherever they occur. ``supervised_set``
    (default: every input) restricts which inputs carry supervision.
    ``mtl_weights`` weight the per-task objectives (default: uniform average).
    """

    eta_sup: float = 0.0
    eta_ent: float = 0.0
    eta_rec: float = 0.0
    supervised_indices: frozenset[int] = frozenset()
    supervised_set: tuple[tuple[int, ...], ...] | None = None
    supervised_values: frozenset[int] = frozenset()
    mtl_weights: tuple[float, ...] | None = None
    sl_weight: float = DEFAULT_SL_WEIGHT

    def __post_init__(self):
        object.__setattr__(self, "supervised_indices", frozenset(self.supervised_indices))
        object.__setattr__(self, "supervised_values", frozenset(self.supervised_values))
        if self.supervised_set is not None:
            object.__setattr__(self, "supervised_set",
                               tuple(tuple(int(v) for v in g) for g in self.supervised_set))
        weights = [self.eta_sup, self.eta_ent, self.eta_rec, self.sl_weight, *(self.mtl_weights or ())]
        if any(not math.isfinite(w) or w < 0 for w in weights):
            raise ValueError("mitigation weights must be finite and non-negative")

    @property
    def supervised(self) -> bool:
        return self.eta_sup > 0 and bool(self.supervised_indices or self.supervised_values)

    def mask(self, inputs: np.ndarray) -> np.ndarray:
        """``[n, k]`` boolean: which concept of which input is supervised."""
        out = np.zeros(inputs.shape, dtype=bool)
        if not self.supervised:
            return out
        sset = set(self.supervised_set) if self.supervised_set is not None else None
        for i, g in enumerate(inputs):
            for j in supervision_pins(g, self.supervised_indices, sset, self.supervised_values):
                out[i, j] = True
        return out

    def label(self) -> str:
        parts = [name for name, w in (("sup", self.eta_sup if self.supervised else 0),
                                      ("ent", self.eta_ent), ("rec", self.eta_rec)) if w > 0]
        return "+".join(parts) or "none"


@dataclass
class Model:
    """Everything that is trained jointly: extractor, label heads, decoder."""

    tasks: tuple[TaskSpec, ...]
    objective: str
    extractor: ConceptExtractor
    inputs: np.ndarray
    input_weights: np.ndarray
    data: list[LabeledData]
    heads: list[LabelHead] = field(default_factory=list)
    decoder: Tensor | None = None
    layers: list[UniformReasoningLayer] = field(default_factory=list)
    admits: list[np.ndarray] = field(default_factory=list)
    groundings: list[LTNGrounding] = field(default_factory=list)

    @property
    def parameters(self) -> list[Tensor]:
        out = list(self.extractor.parameters)
        for h in self.heads:
            out.extend(h.parameters)
        if self.decoder is not None:
            out.append(self.decoder)
        return out

    def get_flat(self) -> np.ndarray:
        return np.concatenate([p.data.reshape(-1) for p in self.parameters])

    def set_flat(self, flat: np.ndarray) -> None:
        i = 0
        for p in self.parameters:
            n = p.data.size
            p.data[...] = flat[i:i + n].reshape(p.data.shape)
            i += n

    # -- predictions ---------------------------------------------------------
    def predict_labels(self) -> list[np.ndarray]:
        """Predicted label index per input, one array per task."""
        out = []
        for t, task in enumerate(self.tasks):
            if self.objective == "dpl":
                out.append(dpl_predict(self.extractor, self.layers[t]))
            elif self.objective == "sl":
                out.append(self.heads[t].predict(self.extractor.head_features()))
            else:
                out.append(ltn_predict_all(self.extractor, task, self.groundings[t]))
        return out

    def true_labels(self) -> list[np.ndarray]:
        out = []
        for task in self.tasks:
            beta = compile_knowledge(task).beta(self.inputs)
            out.append(np.asarray([task.labels.index_of(tuple(y)) if (y >= 0).all() else -1 for y in beta]))
        return out


def build_model(tasks, objective: str, extractor_mode: str, mit: MitigationLossConfig,
                rng: np.random.Generator, sigma: float = 0.5, shared: bool | None = None) -> Model:
    tasks = tuple(tasks)
    if objective not in OBJECTIVES:
        raise ValueError(f"unknown objective {objective!r}; choose from {OBJECTIVES}")
    inputs, weights = support_inputs(tasks[0])
    extractor = ConceptExtractor(tasks[0].concepts, inputs, extractor_mode, shared=shared, rng=rng, sigma=sigma)
    model = Model(tasks, objective, extractor, inputs, weights,
                  [make_dataset(t, inputs, weights) for t in tasks])
    if objective == "dpl":
        model.layers = [UniformReasoningLayer(t) for t in tasks]
    elif objective == "sl":
        model.admits = [compile_knowledge(t, validate=False).admits_matrix() for t in tasks]
        n_features = extractor.head_features().shape[1]
        model.heads = [LabelHead(n_features, t.labels.size, rng, sigma) for t in tasks]
    else:
        model.groundings = [LTNGrounding(t) for t in tasks]
    if mit.eta_rec > 0:
        # p(g | c): logits [n_inputs, |C|], normalized over inputs
        model.decoder = parameter(rng.normal(0.0, sigma, size=(len(inputs), tasks[0].concepts.size)))
    return model


def _task_objective(model: Model, t: int, marginals, sl_weight: float) -> tuple[Tensor, dict[str, float]]:
    data = model.data[t]
    if model.objective == "dpl":
        ll = dpl_log_likelihood(model.extractor, model.layers[t], data)
        nll = -(ll * data.weights).sum()
        return nll, {"nll": nll.item()}
    if model.objective == "sl":
        sl = (semantic_loss_terms(model.extractor, model.admits[t], data) * data.weights).sum()
        ce = head_cross_entropy(model.heads[t], model.extractor.head_features(), data)
        total = ce + sl * sl_weight
        return total, {"semantic_loss": sl.item(), "head_ce": ce.item()}
    sat = model.groundings[t].satisfaction_for(marginals, data)
    loss = ((1.0 - sat) * data.weights).sum()
    return loss, {"satisfaction": 1.0 - loss.item()}


def entropy_term(marginals, weights: np.ndarray) -> Tensor:
    """``1 - mean_j H(p(C_j)) / log m_j`` with ``p(C_j)`` the input-weighted marginal."""
    total = None
    for p in marginals:
        m = p.shape[1]
        avg = (p * weights[:, None]).sum(axis=0)
        h = -(avg * avg.log()).sum() * (1.0 / math.log(m))
        total = h if total is None else total + h
    return 1.0 - total * (1.0 / len(marginals))


def supervision_term(log_marginals, inputs: np.ndarray, weights: np.ndarray, mask: np.ndarray) -> Tensor:
    """Cross-entropy of supervised concepts, averaged over supervised inputs."""
    rows = np.flatnonzero(mask.any(axis=1))
    norm = weights[rows].sum()
    total = None
    for j, lp in enumerate(log_marginals):
        sel = np.flatnonzero(mask[:, j])
        if len(sel) == 0:
            continue
        picked = lp[sel, inputs[sel, j]]
        term = -(picked * (weights[sel] / norm)).sum()
        total = term if total is None else total + term
    return total


def reconstruction_term(model: Model) -> Tensor:
    """``-sum_x w_x sum_c p(c | x) log p(g(x) | c)`` with a tabular decoder."""
    log_dec = model.decoder.log_softmax(axis=0)
    probs = model.extractor.log_joint().exp()
    return -((probs * log_dec).sum(axis=1) * model.input_weights).sum()


def total_loss(model: Model, mit: MitigationLossConfig) -> tuple[Tensor, dict[str, float]]:
    """Objective plus active mitigation terms; also returns every component's value."""
    needs_marginals = model.objective == "ltn" or mit.eta_ent > 0 or mit.supervised
    marginals = model.extractor.marginals() if needs_marginals else None
    n_tasks = len(model.tasks)
    lam = np.asarray(mit.mtl_weights if mit.mtl_weights is not None else [1.0] * n_tasks, dtype=float)
    if len(lam) != n_tasks:
        raise ValueError("one MTL weight per task is required")
    lam = lam / lam.sum()
    components: dict[str, float] = {}
    total: Tensor | None = None
    for t in range(n_tasks):
        obj, parts = _task_objective(model, t, marginals, mit.sl_weight)
        for name, value in parts.items():
            components[f"{name}[{t}]" if n_tasks > 1 else name] = value
        total = obj * lam[t] if total is None else total + obj * lam[t]
    components["objective"] = total.item()
    if mit.supervised:
        mask = mit.mask(model.inputs)
        if mask.any():
            sup = supervision_term(model.extractor.log_marginals(), model.inputs, model.input_weights, mask)
            components["supervision"] = sup.item()
            total = total + sup * mit.eta_sup
    if mit.eta_ent > 0:
        ent = entropy_term(marginals, model.input_weights)
        components["entropy"] = ent.item()
        total = total + ent * mit.eta_ent
    if mit.eta_rec > 0:
        rec = reconstruction_term(model)
        components["reconstruction"] = rec.item()
        total = total + rec * mit.eta_rec
    components["total"] = total.item()
    if not np.isfinite(total.data):
        raise NonFiniteLoss("loss is not finite", {"components": components})
    return total, components


def loss_and_grad(model: Model, mit: MitigationLossConfig) -> tuple[float, np.ndarray, dict[str, float]]:
    """Loss value, flat gradient over ``model.parameters`` and component values."""
    for p in model.parameters:
        p.grad = None
    with model.extractor.evaluation():
        total, components = total_loss(model, mit)
    total.backward()
    grads = [p.grad if p.grad is not None else np.zeros_like(p.data) for p in model.parameters]
    flat = np.concatenate([g.reshape(-1) for g in grads])
    if not np.all(np.isfinite(flat)):
        raise NonFiniteLoss("gradient is not finite", {"components": components})
    return total.item(), flat, components
