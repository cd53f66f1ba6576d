"""Triplet constraints, the t-STE solver, and embedding quality metrics.

A triplet (a, b, c) encodes the relative similarity judgement
d(a, b) < d(a, c): object a is closer to b than to c.  Embeddings are
fit by maximizing the heavy-tailed satisfaction likelihood

    p_t = K(a,b) / (K(a,b) + K(a,c)),
    K(u,v) = (1 + ||x_u - x_v||^2 / alpha) ^ (-(alpha+1)/2),

via full-batch gradient ascent with an adaptive step size (halve on a
likelihood decrease, grow by 1.01 on an increase).  Everything here is a
pure function of its inputs; fits are bit-reproducible from the seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .errors import ConstraintError, NumericError


class Triplet(NamedTuple):
    """Relative similarity constraint: probe is closer to near than to far.

    Indices must be pairwise distinct and in [0, N) for the owning
    collection; operations that consume triplets validate this.
    """

    probe: int
    near: int
    far: int


@dataclass(frozen=True)
class Embedding:
    """An N x d coordinate matrix, the solver's state and output."""

    coords: np.ndarray

    def __post_init__(self):
        coords = np.asarray(self.coords, dtype=np.float64)
        if coords.ndim != 2 or coords.shape[0] < 1 or coords.shape[1] < 1:
            raise ConstraintError(f"coords must be N x d with N,d >= 1, got shape {coords.shape}")
        if not np.all(np.isfinite(coords)):
            raise NumericError("embedding coordinates must be finite")
        object.__setattr__(self, "coords", coords)

    @property
    def n_points(self) -> int:
        return self.coords.shape[0]

    @property
    def dim(self) -> int:
        return self.coords.shape[1]


@dataclass(frozen=True)
class TsteConfig:
    """Hyperparameters for tste_fit.

    alpha=None resolves to max(dim - 1, 1), the Student-t degrees of
    freedom conventional for the embedding dimensionality.
    """

    dim: int = 2
    alpha: float | None = None
    max_iters: int = 1000
    learning_rate: float = 1.0
    tolerance: float = 1e-7
    seed: int = 0

    def __post_init__(self):
        if self.dim < 1:
            raise ConstraintError("dim must be >= 1")
        if self.alpha is not None and not self.alpha > 0:
            raise ConstraintError("alpha must be > 0")
        if self.max_iters < 1:
            raise ConstraintError("max_iters must be >= 1")
        if not self.learning_rate > 0:
            raise ConstraintError("learning_rate must be > 0")
        if not self.tolerance > 0:
            raise ConstraintError("tolerance must be > 0")

    @property
    def effective_alpha(self) -> float:
        if self.alpha is not None:
            return float(self.alpha)
        return float(max(self.dim - 1, 1))


def _triplet_arrays(triplets: Iterable[Triplet], n_points: int):
    """Validate triplets against n_points and split them into index arrays."""
    arr = np.asarray([(t.probe, t.near, t.far) for t in triplets], dtype=np.intp)
    if arr.size == 0:
        return (np.empty(0, np.intp),) * 3
    if arr.min() < 0 or arr.max() >= n_points:
        raise ConstraintError(
            f"triplet index out of range for {n_points} points "
            f"(saw {arr.min()}..{arr.max()})"
        )
    a, b, c = arr[:, 0], arr[:, 1], arr[:, 2]
    if np.any(a == b) or np.any(a == c) or np.any(b == c):
        raise ConstraintError("triplet indices must be pairwise distinct")
    return a, b, c


def _check_coords(coords: np.ndarray):
    if not np.all(np.isfinite(coords)):
        raise NumericError("embedding coordinates must be finite")


def _check_alpha(alpha: float):
    if not alpha > 0:
        raise ConstraintError("alpha must be > 0")


def _pass(coords, a, b, c, alpha, need_grad):
    """One vectorized sweep: log-likelihood, and the gradient if asked.

    Works off the full squared-distance matrix (N is small at desk
    scale, so N^2 beats per-triplet row gathers).  log p is computed in
    log space to survive huge distances.

    Gradient assembly: the derivative couples each triplet's pairs
    (a,b) and (a,c) with scalar weights, so accumulating the weights
    into a symmetric N x N matrix S turns the whole gradient into
    rowsum(S) * X - S @ X.
    """
    n, d = coords.shape
    sq = np.einsum("ij,ij->i", coords, coords)
    d2 = np.maximum(sq[:, None] + sq[None, :] - 2.0 * (coords @ coords.T), 0.0)
    flat = d2.ravel()
    d_ab = flat.take(a * n + b)
    d_ac = flat.take(a * n + c)
    # log p = -log(1 + ((alpha + d_ab) / (alpha + d_ac)) ** ((alpha+1)/2))
    t = 0.5 * (alpha + 1.0) * (np.log(alpha + d_ab) - np.log(alpha + d_ac))
    log_p = -(np.maximum(t, 0.0) + np.log1p(np.exp(-np.abs(t))))
    ll = float(np.sum(log_p))
    if not need_grad:
        return ll, None
    # d log p / d d_ab = -(alpha+1)/(2 (alpha+d_ab)) (1-p); the d_ac term
    # flips sign; the chain rule through the squared distances doubles both.
    one_minus_p = -np.expm1(log_p)
    g_ab = -(alpha + 1.0) / (alpha + d_ab) * one_minus_p
    g_ac = (alpha + 1.0) / (alpha + d_ac) * one_minus_p
    w = np.bincount(a * n + b, weights=g_ab, minlength=n * n)
    w += np.bincount(a * n + c, weights=g_ac, minlength=n * n)
    s = w.reshape(n, n)
    s = s + s.T
    grad = np.sum(s, axis=1)[:, None] * coords - s @ coords
    return ll, grad


def tste_log_likelihood(emb: Embedding, triplets: Sequence[Triplet], alpha: float) -> float:
    """Sum of log p_t over the given triplets; always <= 0."""
    _check_alpha(alpha)
    a, b, c = _triplet_arrays(triplets, emb.n_points)
    _check_coords(emb.coords)
    if a.size == 0:
        return 0.0
    ll, _ = _pass(emb.coords, a, b, c, alpha, need_grad=False)
    return ll


def tste_gradient(emb: Embedding, triplets: Sequence[Triplet], alpha: float) -> np.ndarray:
    """Analytic gradient of tste_log_likelihood w.r.t. the coordinates.

    Rows for objects absent from every triplet are exactly zero.
    """
    _check_alpha(alpha)
    a, b, c = _triplet_arrays(triplets, emb.n_points)
    _check_coords(emb.coords)
    if a.size == 0:
        return np.zeros_like(emb.coords)
    _, grad = _pass(emb.coords, a, b, c, alpha, need_grad=True)
    return grad


def initial_coords(n_points: int, config: TsteConfig) -> np.ndarray:
    """The solver's starting point: tiny i.i.d. Gaussian from the seed."""
    rng = np.random.default_rng(config.seed)
    return rng.normal(0.0, 1e-4, size=(n_points, config.dim))


CONVERGENCE_WINDOW = 10  # accepted steps between relative-change checks


def tste_fit(triplets: Sequence[Triplet], n_points: int, config: TsteConfig) -> Embedding:
    """Fit an embedding to the triplets by adaptive gradient ascent.

    Deterministic given the config seed.  An empty triplet list returns
    the random initialization unchanged.  Iteration stops at max_iters,
    when the relative log-likelihood change over a window of accepted
    steps drops below config.tolerance, or when the step size
    underflows.  The window (rather than a single step) keeps the nearly
    flat region around the tiny initialization from reading as converged.
    """
    if n_points < 1:
        raise ConstraintError("n_points must be >= 1")
    a, b, c = _triplet_arrays(triplets, n_points)
    coords = initial_coords(n_points, config)
    if a.size == 0:
        return Embedding(coords)

    alpha = config.effective_alpha
    lr = config.learning_rate
    ll, grad = _pass(coords, a, b, c, alpha, need_grad=True)
    window_ll = ll
    accepted = 0
    for _ in range(config.max_iters):
        proposal = coords + lr * grad
        new_ll, new_grad = _pass(proposal, a, b, c, alpha, need_grad=True)
        if new_ll >= ll:
            coords, ll, grad = proposal, new_ll, new_grad
            lr *= 1.01
            accepted += 1
            if accepted % CONVERGENCE_WINDOW == 0:
                rel_change = abs(ll - window_ll) / max(abs(window_ll), np.finfo(float).tiny)
                if rel_change < config.tolerance:
                    break
                window_ll = ll
        else:
            lr *= 0.5
            if lr < 1e-300:
                break
    return Embedding(coords)


def triplet_generalization_error(emb: Embedding, held_out: Sequence[Triplet]) -> float:
    """Fraction of held-out constraints the embedding violates.

    A triplet (a, b, c) is violated when ||x_a - x_b|| >= ||x_a - x_c||;
    exact ties count as violations (a tie carries no evidence that the
    constraint was learned).
    """
    if len(held_out) == 0:
        raise ValueError("held_out must be non-empty")
    a, b, c = _triplet_arrays(held_out, emb.n_points)
    _check_coords(emb.coords)
    d_ab = np.sum((emb.coords[a] - emb.coords[b]) ** 2, axis=1)
    d_ac = np.sum((emb.coords[a] - emb.coords[c]) ** 2, axis=1)
    return float(np.mean(d_ab >= d_ac))


def loo_nn_error(emb: Embedding, labels: Sequence) -> float:
    """Leave-one-out nearest-neighbor error.

    1 minus the fraction of points whose Euclidean nearest neighbor
    (excluding the point itself, ties broken by lowest index) shares
    the point's category label.
    """
    labels = np.asarray(labels)
    n = emb.n_points
    if labels.shape[0] != n:
        raise ValueError(f"labels length {labels.shape[0]} != n_points {n}")
    if n < 2:
        raise ValueError("loo_nn_error needs at least 2 points")
    _check_coords(emb.coords)
    x = emb.coords
    # Squared distances computed pairwise-directly (not via the Gram matrix)
    # so exact ties are detected exactly, as the lowest-index tiebreak needs.
    nn = np.empty(n, dtype=np.intp)
    block = max(1, (1 << 22) // (n * emb.dim))
    for start in range(0, n, block):
        stop = min(start + block, n)
        d2 = np.sum((x[start:stop, None, :] - x[None, :, :]) ** 2, axis=2)
        for i in range(start, stop):
            d2[i - start, i] = np.inf
        nn[start:stop] = np.argmin(d2, axis=1)  # first minimum: lowest index
    return float(1.0 - np.mean(labels[nn] == labels))
