"""Ground-truth datasets and synthetic workers.

A synthetic worker answers grid and triplet questions by Euclidean
distance in a hidden feature space.  The default worker is perfect;
the noisy variant softens choices with a temperature and exists for
robustness studies, not for reproducing the synthetic runs.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field

import numpy as np

from .collection import GridAnswer, GridTask
from .embedding import Embedding, Triplet, TsteConfig, tste_fit
from .errors import ConstraintError, ParseError


@dataclass(frozen=True)
class GroundTruth:
    """Labeled vectors defining the oracle's hidden perceptual distance."""

    vectors: np.ndarray
    labels: np.ndarray
    names: tuple[str, ...] | None = None

    def __post_init__(self):
        vectors = np.asarray(self.vectors, dtype=np.float64)
        labels = np.asarray(self.labels)
        if vectors.ndim != 2:
            raise ConstraintError("vectors must be an N x D matrix")
        if not np.all(np.isfinite(vectors)):
            raise ConstraintError("ground-truth vectors must be finite")
        if labels.shape[0] != vectors.shape[0]:
            raise ConstraintError("labels length must equal the number of vectors")
        object.__setattr__(self, "vectors", vectors)
        object.__setattr__(self, "labels", labels)

    @property
    def n_points(self) -> int:
        return self.vectors.shape[0]

    def distances_from(self, probe: int, objects) -> np.ndarray:
        diff = self.vectors[np.asarray(objects)] - self.vectors[probe]
        return np.sqrt(np.sum(diff**2, axis=1))


@dataclass
class WorkerModel:
    """A synthetic annotator: 'perfect' or 'noisy' with a temperature.

    Noisy workers own their rng state (created from the seed), so a
    single instance must not be shared across threads.  temperature=0
    reduces the noisy worker to the perfect one.
    """

    kind: str = "perfect"
    temperature: float = 0.0
    seed: int = 0
    _rng: np.random.Generator = field(init=False, repr=False)

    def __post_init__(self):
        if self.kind not in ("perfect", "noisy"):
            raise ConstraintError(f"unknown worker kind {self.kind!r}")
        if self.temperature < 0:
            raise ConstraintError("temperature must be >= 0")
        self._rng = np.random.default_rng(self.seed)

    @property
    def is_deterministic(self) -> bool:
        return self.kind == "perfect" or self.temperature == 0.0


def _check_indices(gt: GroundTruth, indices):
    for i in indices:
        if not 0 <= i < gt.n_points:
            raise ConstraintError(f"object index {i} out of range for {gt.n_points} objects")


def oracle_answer_grid(gt: GroundTruth, task: GridTask, worker: WorkerModel) -> GridAnswer:
    """Answer a grid question: the k items nearest the probe.

    Perfect workers break distance ties by lower object index.  Noisy
    workers pick k items without replacement with probability
    proportional to exp(-distance / temperature).
    """
    _check_indices(gt, (task.probe, *task.grid))
    k = task.spec.k
    dists = gt.distances_from(task.probe, task.grid)
    if worker.is_deterministic:
        order = np.lexsort((np.asarray(task.grid), dists))
        positions = sorted(int(p) for p in order[:k])
    else:
        positions = sorted(_noisy_subset(dists, k, worker))
    return GridAnswer(task_id=task.task_id, selected=tuple(positions), elapsed_ms=0)


def _noisy_subset(dists, k, worker):
    remaining = list(range(len(dists)))
    picked = []
    for _ in range(k):
        weights = np.exp(-(dists[remaining] - np.min(dists[remaining])) / worker.temperature)
        weights /= np.sum(weights)
        choice = int(worker._rng.choice(len(remaining), p=weights))
        picked.append(remaining.pop(choice))
    return picked


def oracle_answer_triplet(gt: GroundTruth, probe: int, pair: tuple[int, int], worker: WorkerModel) -> Triplet:
    """Answer a single triplet question by orienting the pair.

    Perfect workers put the closer object as near (ties to the lower
    index).  Noisy workers choose b as near with the logistic of the
    distance gap at the given temperature.
    """
    b, c = pair
    if len({probe, b, c}) != 3:
        raise ConstraintError("probe and pair must be pairwise distinct")
    _check_indices(gt, (probe, b, c))
    d_b, d_c = gt.distances_from(probe, (b, c))
    if worker.is_deterministic:
        if d_b < d_c or (d_b == d_c and b < c):
            return Triplet(probe, b, c)
        return Triplet(probe, c, b)
    gap = np.clip((d_c - d_b) / worker.temperature, -700.0, 700.0)
    p_b_near = 1.0 / (1.0 + np.exp(-gap))
    if worker._rng.random() < p_b_near:
        return Triplet(probe, b, c)
    return Triplet(probe, c, b)


def generate_mixture_dataset(
    n_points: int, n_clusters: int, dim: int, spread: float, seed: int
) -> GroundTruth:
    """A Gaussian-mixture stand-in for externally extracted feature sets.

    Cluster centers are standard Gaussian scaled by 10; points fall
    round-robin onto clusters and scatter with the given spread.
    """
    if not n_points >= n_clusters >= 1:
        raise ValueError(f"need n_points >= n_clusters >= 1, got {n_points}, {n_clusters}")
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if spread < 0:
        raise ValueError("spread must be >= 0")
    rng = np.random.default_rng(seed)
    centers = rng.normal(size=(n_clusters, dim)) * 10.0
    labels = np.arange(n_points) % n_clusters
    points = centers[labels] + rng.normal(size=(n_points, dim)) * spread
    return GroundTruth(vectors=points, labels=labels)


def load_vectors(path) -> GroundTruth:
    """Read a ground truth from CSV with header id,label,v0..v{D-1}.

    Rows must be ordered by id with ids dense from 0; every row must
    carry the same number of coordinates.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise ParseError("empty vector file", line=1) from None
        if len(header) < 3 or header[0] != "id" or header[1] != "label":
            raise ParseError(f"expected header id,label,v0,..., got {header!r}", line=1)
        dim = len(header) - 2
        vectors, labels = [], []
        for line_no, row in enumerate(reader, start=2):
            if len(row) != dim + 2:
                raise ParseError(f"expected {dim + 2} fields, got {len(row)}", line=line_no)
            try:
                row_id = int(row[0])
            except ValueError:
                raise ParseError(f"id {row[0]!r} is not an integer", line=line_no) from None
            if row_id != len(vectors):
                raise ParseError(
                    f"ids must be dense from 0: expected {len(vectors)}, got {row_id}", line=line_no
                )
            try:
                vectors.append([float(v) for v in row[2:]])
            except ValueError:
                raise ParseError(f"non-numeric coordinate in {row[2:]!r}", line=line_no) from None
            labels.append(_parse_label(row[1]))
    if not vectors:
        raise ParseError("vector file has no rows", line=2)
    return GroundTruth(vectors=np.array(vectors), labels=np.array(labels))


def _parse_label(text: str):
    try:
        return int(text)
    except ValueError:
        return text


def save_vectors(gt: GroundTruth, path):
    """Write a ground truth in the load_vectors CSV format."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["id", "label"] + [f"v{j}" for j in range(gt.vectors.shape[1])])
        for i in range(gt.n_points):
            writer.writerow([i, gt.labels[i]] + [repr(float(v)) for v in gt.vectors[i]])


def bootstrap_ground_truth(
    triplet_path, n_objects: int, dim: int, config: TsteConfig
) -> GroundTruth:
    """Turn a triplet-only dataset into an oracle substrate.

    Fits an embedding to the file's triplets and returns it as a ground
    truth with a single dummy label.  Deterministic given the config seed.
    """
    from .formats import read_triplets_csv

    triplets = read_triplets_csv(triplet_path)
    emb = tste_fit(triplets, n_objects, config)
    return GroundTruth(vectors=emb.coords, labels=np.zeros(n_objects, dtype=np.int64))


def as_embedding(gt: GroundTruth) -> Embedding:
    """View the ground-truth vectors as an embedding for the metrics."""
    return Embedding(gt.vectors)
