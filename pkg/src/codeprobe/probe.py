"""Edge-probing classifier over frozen span representations.

A learned query pools each token span into a fixed-size vector by
dot-product softmax attention; pooled vectors (concatenated for pair tasks)
feed a one-hidden-layer MLP trained with Adam and cross-entropy. The
estimator follows the scikit-learn fit/predict convention; all gradients
are computed manually so they can be verified by finite differences.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from sklearn.base import BaseEstimator, ClassifierMixin

from .dataset import DatasetSplit, ProbingExample
from .errors import DivergenceError, EmptySpan
from .metrics import (confusion_matrix, macro_f1, matthews_corrcoef,
                      per_class_precision_recall)
from .validation import check_labels, check_span_inputs

SpanInput = tuple[np.ndarray, np.ndarray | None]


def attention_pool(span_reps: np.ndarray, query: np.ndarray) -> np.ndarray:
    """Softmax(rep_i . query)-weighted sum of the span's token vectors."""
    span_reps = np.asarray(span_reps, dtype=np.float64)
    if span_reps.ndim != 2 or span_reps.shape[0] < 1:
        raise EmptySpan("attention pool needs at least one token representation")
    scores = span_reps @ query
    scores -= scores.max()
    weights = np.exp(scores)
    weights /= weights.sum()
    return weights @ span_reps


def _pool_with_grad(span_reps: np.ndarray, query: np.ndarray):
    """Pooled vector plus the weights needed for the backward pass."""
    scores = span_reps @ query
    scores -= scores.max()
    weights = np.exp(scores)
    weights /= weights.sum()
    pooled = weights @ span_reps
    return pooled, weights


def _pool_backward(grad_out: np.ndarray, span_reps: np.ndarray,
                   weights: np.ndarray, pooled: np.ndarray) -> np.ndarray:
    """Gradient of the loss w.r.t. the pool query (reps are frozen)."""
    # d pooled / d score_i = w_i * (rep_i - pooled)
    grad_scores = weights * ((span_reps - pooled) @ grad_out)
    return grad_scores @ span_reps


@dataclass
class EvalReport:
    task: str
    layer: int
    seed: int
    mcc: float
    macro_f1: float
    confusion: np.ndarray
    per_class: list[tuple[float, float]]

    @property
    def n_test(self) -> int:
        return int(np.asarray(self.confusion).sum())


class SpanProbe(BaseEstimator, ClassifierMixin):
    """Attention-pool + MLP probe over one or two token spans per example.

    ``X`` is a sequence of ``(span_a, span_b)`` tuples where each span is a
    ``[k x D]`` float array of frozen token representations and ``span_b``
    is None for single-span tasks. Training is single-threaded and
    deterministic given ``seed``.
    """

    def __init__(self, hidden_units: int = 256, learning_rate: float = 1e-3,
                 beta1: float = 0.9, beta2: float = 0.999, epsilon: float = 1e-8,
                 batch_size: int = 32, max_epochs: int = 50, patience: int = 5,
                 seed: int = 0):
        self.hidden_units = hidden_units
        self.learning_rate = learning_rate
        self.beta1 = beta1
        self.beta2 = beta2
        self.epsilon = epsilon
        self.batch_size = batch_size
        self.max_epochs = max_epochs
        self.patience = patience
        self.seed = seed

    # -- parameter handling --------------------------------------------------

    def _init_params(self, dim: int, paired: bool, class_count: int,
                     rng: np.random.RandomState) -> dict[str, np.ndarray]:
        in_dim = 2 * dim if paired else dim
        params = {
            "q_a": rng.normal(0.0, 0.02, size=dim),
            "W1": rng.normal(0.0, np.sqrt(2.0 / in_dim), size=(in_dim, self.hidden_units)),
            "b1": np.zeros(self.hidden_units),
            "W2": rng.normal(0.0, np.sqrt(2.0 / self.hidden_units),
                             size=(self.hidden_units, class_count)),
            "b2": np.zeros(class_count),
        }
        if paired:
            params["q_b"] = rng.normal(0.0, 0.02, size=dim)
        return params

    def _forward(self, params: dict, example: SpanInput):
        span_a, span_b = example
        pooled_a, w_a = _pool_with_grad(span_a, params["q_a"])
        if span_b is not None:
            pooled_b, w_b = _pool_with_grad(span_b, params["q_b"])
            z = np.concatenate([pooled_a, pooled_b])
        else:
            pooled_b = w_b = None
            z = pooled_a
        pre_h = z @ params["W1"] + params["b1"]
        h = np.maximum(pre_h, 0.0)
        logits = h @ params["W2"] + params["b2"]
        cache = (span_a, span_b, pooled_a, w_a, pooled_b, w_b, z, pre_h, h)
        return logits, cache

    def loss_and_grads(self, params: dict, X: Sequence[SpanInput],
                       y: Sequence[int]):
        """Mean cross-entropy over a batch and gradients for every parameter."""
        grads = {name: np.zeros_like(value) for name, value in params.items()}
        total_loss = 0.0
        n = len(X)
        for example, label in zip(X, y):
            logits, cache = self._forward(params, example)
            span_a, span_b, pooled_a, w_a, pooled_b, w_b, z, pre_h, h = cache
            shifted = logits - logits.max()
            exp = np.exp(shifted)
            probs = exp / exp.sum()
            total_loss += -np.log(max(probs[label], 1e-300))
            grad_logits = probs.copy()
            grad_logits[label] -= 1.0
            grad_logits /= n
            grads["W2"] += np.outer(h, grad_logits)
            grads["b2"] += grad_logits
            grad_h = params["W2"] @ grad_logits
            grad_pre_h = grad_h * (pre_h > 0)
            grads["W1"] += np.outer(z, grad_pre_h)
            grads["b1"] += grad_pre_h
            grad_z = params["W1"] @ grad_pre_h
            dim = pooled_a.shape[0]
            grads["q_a"] += _pool_backward(grad_z[:dim], span_a, w_a, pooled_a)
            if span_b is not None:
                grads["q_b"] += _pool_backward(grad_z[dim:], span_b, w_b, pooled_b)
        return total_loss / n, grads

    # -- sklearn surface -------------------------------------------------------

    def fit(self, X: Sequence[SpanInput], y: Sequence[int],
            X_val: Sequence[SpanInput] | None = None,
            y_val: Sequence[int] | None = None) -> "SpanProbe":
        X, paired, dim = check_span_inputs(X)
        y, class_count = check_labels(y, len(X))
        rng = np.random.RandomState(self.seed)
        params = self._init_params(dim, paired, class_count, rng)
        adam_m = {k: np.zeros_like(v) for k, v in params.items()}
        adam_v = {k: np.zeros_like(v) for k, v in params.items()}
        step = 0

        best_params = {k: v.copy() for k, v in params.items()}
        best_score = -np.inf
        epochs_since_best = 0
        order = np.arange(len(X))
        for epoch in range(self.max_epochs):
            rng.shuffle(order)
            for batch_start in range(0, len(X), self.batch_size):
                idx = order[batch_start:batch_start + self.batch_size]
                loss, grads = self.loss_and_grads(
                    params, [X[i] for i in idx], [y[i] for i in idx])
                if not np.isfinite(loss):
                    raise DivergenceError(f"non-finite loss at epoch {epoch}")
                step += 1
                for name in params:
                    g = grads[name]
                    adam_m[name] = self.beta1 * adam_m[name] + (1 - self.beta1) * g
                    adam_v[name] = self.beta2 * adam_v[name] + (1 - self.beta2) * g * g
                    m_hat = adam_m[name] / (1 - self.beta1 ** step)
                    v_hat = adam_v[name] / (1 - self.beta2 ** step)
                    params[name] -= self.learning_rate * m_hat / (np.sqrt(v_hat) + self.epsilon)
            if X_val is not None and len(X_val):
                score = self._score_mcc(params, X_val, y_val, class_count)
                if score > best_score:
                    best_score = score
                    best_params = {k: v.copy() for k, v in params.items()}
                    epochs_since_best = 0
                else:
                    epochs_since_best += 1
                    if epochs_since_best >= self.patience:
                        break
            else:
                best_params = params
        self.params_ = {k: v.copy() for k, v in best_params.items()}
        self.class_count_ = class_count
        self.paired_ = paired
        self.dim_ = dim
        return self

    def _score_mcc(self, params: dict, X, y, class_count: int) -> float:
        preds = [int(np.argmax(self._forward(params, ex)[0])) for ex in X]
        import warnings as _warnings
        with _warnings.catch_warnings():
            _warnings.simplefilter("ignore")
            return matthews_corrcoef(confusion_matrix(y, preds, class_count))

    def decision_function(self, X: Sequence[SpanInput]) -> np.ndarray:
        X, _, _ = check_span_inputs(X, expect_paired=self.paired_)
        return np.array([self._forward(self.params_, ex)[0] for ex in X])

    def predict_proba(self, X: Sequence[SpanInput]) -> np.ndarray:
        logits = self.decision_function(X)
        logits -= logits.max(axis=1, keepdims=True)
        exp = np.exp(logits)
        return exp / exp.sum(axis=1, keepdims=True)

    def predict(self, X: Sequence[SpanInput]) -> np.ndarray:
        return self.decision_function(X).argmax(axis=1)


# ---------------------------------------------------------------------------
# Store-backed training and evaluation
# ---------------------------------------------------------------------------

class _RepCache:
    """Per-source hidden-matrix cache for one layer of one store."""

    def __init__(self, store, layer: int):
        self.store = store
        self.layer = layer
        self._cache: dict[str, np.ndarray] = {}

    def matrix(self, source_id: str) -> np.ndarray:
        if source_id not in self._cache:
            self._cache[source_id] = self.store.read_layer(source_id, self.layer)
        return self._cache[source_id]

    def span_reps(self, example: ProbingExample) -> SpanInput:
        matrix = self.matrix(example.source_id)
        span_a = matrix[example.span_a.start:example.span_a.end]
        span_b = None
        if example.span_b is not None:
            span_b = matrix[example.span_b.start:example.span_b.end]
        return (span_a, span_b)


def materialize(examples: Sequence[ProbingExample], store, layer: int,
                cache: _RepCache | None = None):
    """Turn serialized examples into (span reps, labels) for one layer."""
    cache = cache or _RepCache(store, layer)
    X = [cache.span_reps(ex) for ex in examples]
    y = [ex.label for ex in examples]
    return X, y


def train_probe(split: DatasetSplit, store, layer: int, seed: int,
                **hyper) -> SpanProbe:
    """Fit a probe on one (task, layer, seed) triple of a dataset split."""
    cache = _RepCache(store, layer)
    X_train, y_train = materialize(split.train, store, layer, cache)
    X_val, y_val = materialize(split.validation, store, layer, cache)
    probe = SpanProbe(seed=seed, **hyper)
    probe.fit(X_train, y_train, X_val=X_val, y_val=y_val)
    return probe


def evaluate(probe: SpanProbe, examples: Sequence[ProbingExample], store,
             layer: int, seed: int, task: str | None = None) -> EvalReport:
    """Score a trained probe on held-out examples at the same layer."""
    X, y = materialize(examples, store, layer)
    preds = probe.predict(X)
    confusion = confusion_matrix(y, preds, probe.class_count_)
    return EvalReport(
        task=task or (examples[0].task if examples else "unknown"),
        layer=layer, seed=seed,
        mcc=matthews_corrcoef(confusion),
        macro_f1=macro_f1(confusion),
        confusion=confusion,
        per_class=per_class_precision_recall(confusion),
    )


@dataclass
class AggregateRow:
    task: str
    layer: int
    mcc_mean: float
    mcc_min: float
    mcc_max: float
    macro_f1_mean: float
    macro_f1_min: float
    macro_f1_max: float
    n_runs: int


def aggregate_runs(reports: Sequence[EvalReport]) -> list[AggregateRow]:
    """Mean (plus min/max) of MCC and macro-F1 per (task, layer)."""
    groups: dict[tuple[str, int], list[EvalReport]] = {}
    for report in reports:
        groups.setdefault((report.task, report.layer), []).append(report)
    rows = []
    for (task, layer), members in sorted(groups.items()):
        mccs = [r.mcc for r in members]
        f1s = [r.macro_f1 for r in members]
        rows.append(AggregateRow(
            task=task, layer=layer,
            mcc_mean=float(np.mean(mccs)), mcc_min=min(mccs), mcc_max=max(mccs),
            macro_f1_mean=float(np.mean(f1s)), macro_f1_min=min(f1s),
            macro_f1_max=max(f1s), n_runs=len(members),
        ))
    return rows


def gradient_check(probe: SpanProbe, X: Sequence[SpanInput], y: Sequence[int],
                   step: float = 1e-4) -> float:
    """Max relative error between analytic and central-difference gradients."""
    X, paired, dim = check_span_inputs(X)
    y, class_count = check_labels(y, len(X))
    rng = np.random.RandomState(probe.seed)
    params = probe._init_params(dim, paired, class_count, rng)
    _, grads = probe.loss_and_grads(params, X, y)
    worst = 0.0
    for name, value in params.items():
        flat = value.reshape(-1)
        grad_flat = grads[name].reshape(-1)
        for i in range(flat.size):
            original = flat[i]
            flat[i] = original + step
            loss_plus, _ = probe.loss_and_grads(params, X, y)
            flat[i] = original - step
            loss_minus, _ = probe.loss_and_grads(params, X, y)
            flat[i] = original
            numeric = (loss_plus - loss_minus) / (2 * step)
            scale = max(abs(numeric), abs(grad_flat[i]), 1e-8)
            worst = max(worst, abs(numeric - grad_flat[i]) / scale)
    return worst
