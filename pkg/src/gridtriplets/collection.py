"""Question generation and triplet bookkeeping for similarity collection.

Two question formats exist: a single triplet question (probe plus an
unordered pair) and a grid question (probe plus n items, select the k
most similar).  One answered grid expands into k*(n-k) triplets.  All
sampling takes an explicit numpy Generator so runs replay from a seed.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Iterable, NamedTuple, Sequence

import numpy as np

from .embedding import Embedding, Triplet
from .errors import ConstraintError


@dataclass(frozen=True)
class GridSpec:
    """Grid geometry: n items shown (probe excluded), k required picks."""

    n: int
    k: int

    def __post_init__(self):
        if not 1 <= self.k < self.n:
            raise ConstraintError(f"need 1 <= k < n, got n={self.n} k={self.k}")


@dataclass(frozen=True)
class GridTask:
    """A probe plus an ordered grid of n distinct object indices.

    The probe never appears in its own grid except in catch trials,
    where the grid deliberately carries a duplicate of the probe.
    """

    task_id: str
    probe: int
    grid: tuple[int, ...]
    spec: GridSpec

    def __post_init__(self):
        if len(self.grid) != self.spec.n:
            raise ConstraintError(f"grid length {len(self.grid)} != spec.n {self.spec.n}")
        if len(set(self.grid)) != len(self.grid):
            raise ConstraintError("grid entries must be pairwise distinct")


@dataclass(frozen=True)
class GridAnswer:
    """Exactly k selected grid positions; elapsed_ms is 0 for synthetic workers."""

    task_id: str
    selected: tuple[int, ...]
    elapsed_ms: int = 0


class TripletKey(NamedTuple):
    """Uniqueness key of a triplet: probe plus the unordered pair {lo, hi}."""

    probe: int
    lo: int
    hi: int

    @classmethod
    def of(cls, t: Triplet) -> "TripletKey":
        return cls(t.probe, min(t.near, t.far), max(t.near, t.far))


@dataclass(frozen=True)
class CklConfig:
    """Knobs for information-gain question selection."""

    mu: float = 0.05
    pool_size: int = 20
    posterior_samples: int = 20
    seed: int = 0

    def __post_init__(self):
        if not self.mu > 0:
            raise ConstraintError("mu must be > 0")
        if self.pool_size < 1:
            raise ConstraintError("pool_size must be >= 1")
        if self.posterior_samples < 2:
            raise ConstraintError("posterior_samples must be >= 2")


def expand_grid_answer(task: GridTask, answer: GridAnswer) -> list[Triplet]:
    """Expand one answered grid into its k*(n-k) triplets.

    For each selected object s and unselected object f the triplet
    (probe, s, f) is emitted, ordered by selected object ascending then
    unselected object ascending.
    """
    if answer.task_id != task.task_id:
        raise ConstraintError(f"answer for task {answer.task_id!r} does not match task {task.task_id!r}")
    spec = task.spec
    positions = set(answer.selected)
    if len(positions) != len(answer.selected) or len(positions) != spec.k:
        raise ConstraintError(f"need exactly {spec.k} distinct selections, got {answer.selected}")
    if any(p < 0 or p >= spec.n for p in positions):
        raise ConstraintError(f"selected positions out of range for grid of {spec.n}")
    chosen = sorted(task.grid[p] for p in positions)
    passed = sorted(obj for p, obj in enumerate(task.grid) if p not in positions)
    return [Triplet(task.probe, s, f) for s in chosen for f in passed]


def unique_triplet_capacity(n_objects: int) -> int:
    """Count of distinct (probe, unordered pair) keys: n*(n-1)*(n-2)/2."""
    if n_objects < 3:
        raise ValueError("need at least 3 objects to form a triplet")
    return n_objects * (n_objects - 1) * (n_objects - 2) // 2


class TripletDeduper:
    """Accumulates answered triplets, resolving each key to one orientation.

    The majority orientation wins; exact ties go to the orientation seen
    last.  Key order is first-seen order, so exports are deterministic.
    """

    def __init__(self):
        # key -> [votes for (key.lo near), votes for (key.hi near), last orientation]
        self._state: dict[TripletKey, list] = {}

    def add(self, triplet: Triplet):
        key = TripletKey.of(triplet)
        entry = self._state.get(key)
        if entry is None:
            entry = [0, 0, triplet]
            self._state[key] = entry
        entry[0 if triplet.near == key.lo else 1] += 1
        entry[2] = triplet

    def extend(self, triplets: Iterable[Triplet]):
        for t in triplets:
            self.add(t)

    def __len__(self) -> int:
        return len(self._state)

    def resolved(self) -> dict[TripletKey, Triplet]:
        out = {}
        for key, (lo_votes, hi_votes, last) in self._state.items():
            if lo_votes > hi_votes:
                out[key] = Triplet(key.probe, key.lo, key.hi)
            elif hi_votes > lo_votes:
                out[key] = Triplet(key.probe, key.hi, key.lo)
            else:
                out[key] = last
        return out

    def resolved_list(self) -> list[Triplet]:
        return list(self.resolved().values())


def dedup_triplets(triplets: Iterable[Triplet]) -> dict[TripletKey, Triplet]:
    """Collapse a triplet list to one orientation per unique key."""
    deduper = TripletDeduper()
    deduper.extend(triplets)
    return deduper.resolved()


def sample_random_triplet_question(n_objects: int, rng: np.random.Generator) -> tuple[int, tuple[int, int]]:
    """Uniform probe, then a uniform unordered pair among the others.

    Returns (probe, (b, c)) with b < c.  Deterministic given rng state.
    """
    if n_objects < 3:
        raise ValueError("need at least 3 objects for a triplet question")
    probe = int(rng.integers(n_objects))
    u = int(rng.integers(n_objects - 1))
    v = int(rng.integers(n_objects - 2))
    if v >= u:
        v += 1
    # map draws from [0, n-1) onto object ids, skipping the probe
    b = u if u < probe else u + 1
    c = v if v < probe else v + 1
    return probe, (min(b, c), max(b, c))


def sample_random_grid(
    n_objects: int, spec: GridSpec, rng: np.random.Generator, task_id: str = ""
) -> GridTask:
    """Uniform probe plus a uniform random subset of the rest, shuffled."""
    if n_objects < spec.n + 1:
        raise ValueError(f"need at least n+1={spec.n + 1} objects, got {n_objects}")
    probe = int(rng.integers(n_objects))
    draw = rng.choice(n_objects - 1, size=spec.n, replace=False)
    grid = tuple(int(g) if g < probe else int(g) + 1 for g in draw)
    return GridTask(task_id=task_id, probe=probe, grid=grid, spec=spec)


def _binary_entropy(p):
    p = np.clip(p, 0.0, 1.0)
    out = np.zeros_like(p, dtype=float)
    mask = (p > 0.0) & (p < 1.0)
    pm = p[mask]
    out[mask] = -(pm * np.log2(pm) + (1.0 - pm) * np.log2(1.0 - pm))
    return out


def ckl_probability(d2_near: np.ndarray, d2_far: np.ndarray, mu: float) -> np.ndarray:
    """P(first argument is the nearer one) under the crowd-kernel model."""
    return (d2_far + mu) / (d2_near + d2_far + 2.0 * mu)


def ckl_select_question(
    current: Embedding,
    n_objects: int,
    config: CklConfig,
    rng: np.random.Generator,
    answered: Sequence[Triplet] = (),
) -> tuple[int, tuple[int, int]]:
    """Pick the question with the largest expected information gain.

    Draws config.pool_size candidate questions uniformly, scores each by
    H(mean p) - mean H(p) over candidate placements of its probe, and
    returns the argmax (ties to the earliest draw).  Placements are the
    probe's current position plus shared Gaussian perturbations (scale =
    median pairwise distance / 4), weighted by the likelihood of the
    already answered triplets under the crowd-kernel probability model.

    rng consumption order (relied on by replay and tests): degenerate
    check first (no draws), then pool_size question draws, then one
    (posterior_samples x dim) normal perturbation matrix.

    A degenerate embedding with all points coincident falls back to one
    uniform random question.
    """
    if current.n_points != n_objects:
        raise ConstraintError(f"embedding has {current.n_points} rows, expected {n_objects}")
    x = current.coords
    iu = np.triu_indices(n_objects, k=1)
    pairwise = np.sqrt(np.sum((x[iu[0]] - x[iu[1]]) ** 2, axis=1))
    median_dist = float(np.median(pairwise))
    if median_dist == 0.0:
        return sample_random_triplet_question(n_objects, rng)

    candidates = [sample_random_triplet_question(n_objects, rng) for _ in range(config.pool_size)]
    perturb = rng.normal(size=(config.posterior_samples, current.dim))
    scale = median_dist / 4.0

    best_gain = -np.inf
    best = candidates[0]
    for probe, (b, c) in candidates:
        placements = x[probe] + scale * perturb
        weights = _placement_weights(x, probe, placements, answered, config.mu)
        d2b = np.sum((placements - x[b]) ** 2, axis=1)
        d2c = np.sum((placements - x[c]) ** 2, axis=1)
        p = ckl_probability(d2b, d2c, config.mu)
        mean_p = float(np.sum(weights * p))
        gain = float(_binary_entropy(np.array([mean_p]))[0] - np.sum(weights * _binary_entropy(p)))
        if gain > best_gain:
            best_gain = gain
            best = (probe, (b, c))
    return best


def _placement_weights(x, moved, placements, answered, mu):
    """Posterior weights of probe placements: likelihood of past answers.

    Only answered triplets that mention the moved object change across
    placements; the rest cancel in the normalization.
    """
    s = placements.shape[0]
    relevant = [t for t in answered if moved in (t.probe, t.near, t.far)]
    if not relevant:
        return np.full(s, 1.0 / s)
    log_w = np.zeros(s)
    for t in relevant:
        pos_probe = placements if t.probe == moved else np.broadcast_to(x[t.probe], placements.shape)
        pos_near = placements if t.near == moved else np.broadcast_to(x[t.near], placements.shape)
        pos_far = placements if t.far == moved else np.broadcast_to(x[t.far], placements.shape)
        d2n = np.sum((pos_probe - pos_near) ** 2, axis=1)
        d2f = np.sum((pos_probe - pos_far) ** 2, axis=1)
        log_w += np.log(ckl_probability(d2n, d2f, mu))
    log_w -= np.max(log_w)
    w = np.exp(log_w)
    return w / np.sum(w)


@dataclass(frozen=True)
class OccurrenceStats:
    """Per-object appearance counts over a triplet list, with mean and std."""

    histogram: np.ndarray
    mean: float
    std: float


def occurrence_stats(triplets: Sequence[Triplet], n_objects: int) -> OccurrenceStats:
    """Count object appearances in any triplet role.

    The mean is 3*|triplets|/n_objects exactly; std is the population
    standard deviation of the counts.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    hist = np.zeros(n_objects, dtype=np.int64)
    for t in triplets:
        hist[t.probe] += 1
        hist[t.near] += 1
        hist[t.far] += 1
    mean = 3 * len(triplets) / n_objects
    std = float(np.sqrt(np.mean((hist - mean) ** 2)))
    return OccurrenceStats(histogram=hist, mean=mean, std=std)
