"""Linear SVM with class-weighted hinge loss, solved in the dual.

Minimizes ``0.5 ||w||^2 + C * sum_i weight(y_i) * max(0, 1 - y_i (w.x_i + b))``
with an unregularized bias. The dual is a box-constrained QP with one
equality constraint, solved by pairwise coordinate ascent (maximal-violating
pair) over working sets: each outer pass scores the full problem, gathers
the worst KKT violators plus the free support vectors, and optimizes that
subset to convergence against a dense dot-product block. The procedure is
fully deterministic: ties break toward the lowest index and no randomness
is involved.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..errors import InvalidArgumentError
from ..validation import check_binary_labels, check_finite, check_matrix

_BOUND_EPS = 1e-12


@dataclass
class LinearModel:
    """Weights, bias and the training trade-offs that produced them."""

    w: np.ndarray = field(repr=False)
    b: float
    c_value: float
    positive_weight: float = 1.0
    negative_weight: float = 1.0
    n_epochs: int = 0
    kkt_gap: float = float("nan")

    def decision_function(self, X) -> np.ndarray:
        X = np.asarray(X, dtype=np.float64)
        if X.ndim == 1:
            return float(X @ self.w + self.b)
        return X @ self.w + self.b


def _kkt_sets(alpha: np.ndarray, y: np.ndarray, U: np.ndarray):
    below_upper = alpha < U - _BOUND_EPS
    above_zero = alpha > _BOUND_EPS
    up = ((y > 0) & below_upper) | ((y < 0) & above_zero)
    low = ((y < 0) & below_upper) | ((y > 0) & above_zero)
    return up, low


def _smo_on_subset(K, y, alpha, U, G, kkt_tol, max_steps):
    """Pairwise updates on a dense subproblem; mutates alpha and G in place.

    ``G_i = y_i * (w . x_i) - 1`` for the subset, kept incrementally: an
    update of pair (i, j) by step t changes w by t * (x_i - x_j).
    """
    n = alpha.shape[0]
    steps = 0
    Kdiag = np.ascontiguousarray(np.diag(K))
    while steps < max_steps:
        neg_yG = -y * G
        up, low = _kkt_sets(alpha, y, U)
        if not up.any() or not low.any():
            break
        i = int(np.where(up, neg_yG, -np.inf).argmax())
        j = int(np.where(low, neg_yG, np.inf).argmin())
        gap = neg_yG[i] - neg_yG[j]
        if gap <= kkt_tol:
            break
        eta = Kdiag[i] + Kdiag[j] - 2.0 * K[i, j]
        gdiff = y[i] * G[i] - y[j] * G[j]  # d(objective)/dt at t = 0

        if y[i] > 0:
            lo, hi = -alpha[i], U[i] - alpha[i]
        else:
            lo, hi = alpha[i] - U[i], alpha[i]
        if y[j] > 0:
            lo_j, hi_j = alpha[j] - U[j], alpha[j]
        else:
            lo_j, hi_j = -alpha[j], U[j] - alpha[j]
        lo, hi = max(lo, lo_j), min(hi, hi_j)

        if eta > 1e-12:
            t = min(max(-gdiff / eta, lo), hi)
        else:
            t = hi if gdiff < 0 else lo
        if t == 0.0:
            break
        alpha[i] += y[i] * t
        alpha[j] -= y[j] * t
        for idx in (i, j):
            if alpha[idx] < _BOUND_EPS:
                alpha[idx] = 0.0
            elif alpha[idx] > U[idx] - _BOUND_EPS:
                alpha[idx] = U[idx]
        G += t * y * (K[:, i] - K[:, j])
        steps += 1
    return steps


def _solve_dual(X, y, U, kkt_tol, tol, max_epochs, working_set_size=1024):
    n, d = X.shape
    alpha = np.zeros(n)
    w = np.zeros(d)
    prev_dual = None
    gap = np.inf
    stalls = 0
    flat_passes = 0
    epochs = 0
    for epoch in range(max_epochs):
        epochs = epoch + 1
        margins = X @ w
        G = y * margins - 1.0
        neg_yG = -y * G
        up, low = _kkt_sets(alpha, y, U)
        m_val = neg_yG[up].max()
        M_val = neg_yG[low].min()
        gap = float(m_val - M_val)
        if gap <= kkt_tol:
            break
        dual = float(alpha.sum() - 0.5 * (w @ w))
        if prev_dual is not None:
            flat_passes = flat_passes + 1 if abs(dual - prev_dual) <= tol * max(1.0, abs(dual)) else 0
            if flat_passes >= 2:
                break  # relative objective change below tol; accept the iterate
        prev_dual = dual

        up_score = np.where(up, neg_yG - M_val, -np.inf)
        low_score = np.where(low, m_val - neg_yG, -np.inf)
        score = np.maximum(up_score, low_score)
        free = (alpha > _BOUND_EPS) & (alpha < U - _BOUND_EPS)
        cand = np.flatnonzero((score > 0) | free)
        if cand.size > working_set_size:
            order = np.lexsort((cand, -score[cand]))
            cand = cand[order[:working_set_size]]
        S = np.sort(cand)

        XS = np.ascontiguousarray(X[S])
        K = XS @ XS.T
        aS = alpha[S].copy()
        GS = y[S] * (XS @ w) - 1.0
        _smo_on_subset(K, y[S], aS, U[S], GS, max(0.5 * kkt_tol, 1e-12), max_steps=30 * S.size + 100)
        delta = aS - alpha[S]
        if np.any(delta != 0.0):
            w += XS.T @ (delta * y[S])
            alpha[S] = aS
            stalls = 0
        else:
            stalls += 1
            working_set_size = min(n, working_set_size * 2)
            if stalls > 4:
                break  # numerical floor: no pair in reach improves the dual

    margins = X @ w
    G = y * margins - 1.0
    neg_yG = -y * G
    free = (alpha > _BOUND_EPS) & (alpha < U - _BOUND_EPS)
    if free.any():
        b = float(np.mean(y[free] - margins[free]))
    else:
        up, low = _kkt_sets(alpha, y, U)
        hi = neg_yG[up].max() if up.any() else 0.0
        lo = neg_yG[low].min() if low.any() else 0.0
        b = float((hi + lo) / 2.0)
    return w, b, alpha, epochs, gap


def train_linear_svm(
    X,
    y,
    c_value: float,
    class_weights: tuple[float, float] = (1.0, 1.0),
    tol: float = 1e-6,
    max_epochs: int = 300,
    kkt_tol: float = 1e-5,
) -> LinearModel:
    """Train a weighted linear SVM.

    ``class_weights`` is (positive_weight, negative_weight); the effective
    per-sample budget is ``c_value * weight(y_i)``. Requires at least one
    example of each class and finite features.
    """
    X = check_matrix("X", X)
    check_finite("X", X)
    y = check_binary_labels("y", y)
    if y.shape[0] != X.shape[0]:
        raise InvalidArgumentError("X and y disagree on the number of samples")
    if c_value <= 0:
        raise InvalidArgumentError("c_value must be > 0")
    pos_w, neg_w = class_weights
    if pos_w <= 0 or neg_w <= 0:
        raise InvalidArgumentError("class weights must be > 0")
    U = np.where(y > 0, c_value * pos_w, c_value * neg_w).astype(np.float64)
    yf = y.astype(np.float64)
    w, b, _, epochs, gap = _solve_dual(X, yf, U, kkt_tol, tol, max_epochs)
    return LinearModel(
        w=w,
        b=b,
        c_value=c_value,
        positive_weight=pos_w,
        negative_weight=neg_w,
        n_epochs=epochs,
        kkt_gap=gap,
    )


def _stratified_folds(y: np.ndarray, folds: int, seed: int) -> np.ndarray:
    """Fold index per sample; each class is shuffled then dealt round-robin."""
    rng = np.random.default_rng(seed)
    assignment = np.empty(y.shape[0], dtype=np.int64)
    for cls in (1, -1):
        idx = np.flatnonzero(y == cls)
        rng.shuffle(idx)
        assignment[idx] = np.arange(idx.size) % folds
    return assignment


def cross_validate_c(
    X,
    y,
    grid,
    folds: int = 5,
    seed: int = 0,
    class_weights: tuple[float, float] = (1.0, 1.0),
    return_scores: bool = False,
    **svm_kwargs,
):
    """Pick C by mean fold accuracy; ties go to the smallest C.

    Folding is stratified and seeded; a fold missing a class (too few
    examples of it) is an error rather than a silent skip.
    """
    X = check_matrix("X", X)
    y = check_binary_labels("y", y)
    grid = sorted(float(c) for c in grid)
    if not grid:
        raise InvalidArgumentError("C grid is empty")
    assignment = _stratified_folds(y, folds, seed)
    for f in range(folds):
        val = assignment == f
        if len(np.unique(y[val])) < 2 or len(np.unique(y[~val])) < 2:
            raise InvalidArgumentError(f"fold {f} lacks one of the classes; need >= {folds} per class")

    scores: dict[float, float] = {}
    for c in grid:
        accs = []
        for f in range(folds):
            val = assignment == f
            model = train_linear_svm(X[~val], y[~val], c, class_weights, **svm_kwargs)
            pred = np.where(model.decision_function(X[val]) > 0, 1, -1)
            accs.append(float(np.mean(pred == y[val])))
        scores[c] = float(np.mean(accs))

    best_c = grid[0]
    best = scores[best_c]
    for c in grid[1:]:
        if scores[c] > best:
            best, best_c = scores[c], c
    if return_scores:
        return best_c, scores
    return best_c
