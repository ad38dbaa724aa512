"""Input-validation helpers for the estimator surface."""
from __future__ import annotations
import numpy as np


def check_span_inputs(X, expect_paired: bool | None = None):
    """Normalize span inputs to (list of (a, b) float arrays, paired, dim).

    Every ``span_a`` must be a non-empty [k x D] array with one shared D;
    ``span_b`` must be consistently present or consistently None.
    """
    if len(X) == 0:
        raise ValueError("empty input")
    normalized = []
    paired = None
    dim = None
    for i, example in enumerate(X):
        if isinstance(example, tuple) and len(example) == 2:
            span_a, span_b = example
        else:
            span_a, span_b = example, None
        span_a = np.asarray(span_a, dtype=np.float64)
        if span_a.ndim != 2 or span_a.shape[0] < 1:
            raise ValueError(f"example {i}: span_a must be a non-empty 2-d array")
        if not np.isfinite(span_a).all():
            raise ValueError(f"example {i}: non-finite values in span_a")
        if dim is None:
            dim = span_a.shape[1]
        elif span_a.shape[1] != dim:
            raise ValueError(f"example {i}: inconsistent representation width")
        has_b = span_b is not None
        if paired is None:
            paired = has_b
        elif paired != has_b:
            raise ValueError(f"example {i}: mixed single-span and pair examples")
        if has_b:
            span_b = np.asarray(span_b, dtype=np.float64)
            if span_b.ndim != 2 or span_b.shape[0] < 1 or span_b.shape[1] != dim:
                raise ValueError(f"example {i}: bad span_b shape")
            if not np.isfinite(span_b).all():
                raise ValueError(f"example {i}: non-finite values in span_b")
        normalized.append((span_a, span_b))
    if expect_paired is not None and paired != expect_paired:
        raise ValueError("pairedness differs from the fitted probe")
    return normalized, paired, dim


def check_labels(y, n: int) -> tuple[list[int], int]:
    """Labels must be 0..C-1 integers matching the input length, C >= 2."""
    y = [int(v) for v in y]
    if len(y) != n:
        raise ValueError(f"label count {len(y)} != example count {n}")
    if min(y) < 0:
        raise ValueError("negative class label")
    class_count = max(y) + 1
    missing = set(range(class_count)) - set(y)
    if missing:
        raise ValueError(f"labels must cover 0..{class_count - 1}; "
                         f"missing {sorted(missing)}")
    if class_count < 2:
        class_count = 2  # degenerate all-one-class input still yields a binary head
    return y, class_count
