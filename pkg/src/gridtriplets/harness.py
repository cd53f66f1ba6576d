"""End-to-end experiment driver.

Runs collection strategies against a synthetic oracle, fits embeddings
at screen-count checkpoints, and records both quality metrics together
with the running cost.  One "screen" is one answered question of either
kind, the unit of human effort.

Dollar convention per strategy: grid screens are priced by screens_cost;
random and ckl screens (one triplet each) by one_at_a_time_cost.  Runs
are deterministic per seed: the TGE held-out sample depends only on the
run seed (so strategies under one seed share it), question sampling gets
an independent stream per (seed, strategy), and checkpoint fits seed the
solver with tste.seed + run seed.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from typing import Sequence

import numpy as np
import yaml

from .collection import (
    CklConfig,
    GridAnswer,
    GridSpec,
    GridTask,
    OccurrenceStats,
    TripletDeduper,
    ckl_select_question,
    expand_grid_answer,
    occurrence_stats,
    sample_random_grid,
    sample_random_triplet_question,
)
from .econ import HitPricing, one_at_a_time_cost, screens_cost
from .embedding import (
    Embedding,
    Triplet,
    TsteConfig,
    loo_nn_error,
    triplet_generalization_error,
    tste_fit,
)
from .errors import ParseError
from .oracle import GroundTruth, WorkerModel, generate_mixture_dataset, load_vectors, oracle_answer_grid, oracle_answer_triplet

TGE_SENTINEL = 0.5  # recorded when a checkpoint has no triplets to fit
CKL_REFIT_EVERY = 50  # answers between CKL embedding refits, bounds runtime


@dataclass(frozen=True)
class Strategy:
    """A way of choosing the next question: random triplets, grids, or CKL."""

    kind: str
    grid: GridSpec | None = None
    ckl: CklConfig | None = None

    def __post_init__(self):
        if self.kind not in ("random_triplet", "grid", "ckl"):
            raise ValueError(f"unknown strategy kind {self.kind!r}")
        if self.kind == "grid" and self.grid is None:
            raise ValueError("grid strategy needs a GridSpec")
        if self.kind == "ckl" and self.ckl is None:
            object.__setattr__(self, "ckl", CklConfig())

    @property
    def label(self) -> str:
        if self.kind == "grid":
            return f"grid_{self.grid.n}_choose_{self.grid.k}"
        return self.kind

    @property
    def triplets_per_screen(self) -> int:
        if self.kind == "grid":
            return self.grid.k * (self.grid.n - self.grid.k)
        return 1


@dataclass(frozen=True)
class DatasetSpec:
    """Where the ground truth comes from: the mixture generator or a file."""

    kind: str = "mixture"
    n_points: int = 200
    n_clusters: int = 10
    dim: int = 2
    spread: float = 1.0
    seed: int = 7
    path: str | None = None

    def load(self) -> GroundTruth:
        if self.kind == "mixture":
            return generate_mixture_dataset(
                self.n_points, self.n_clusters, self.dim, self.spread, self.seed
            )
        if self.kind == "vectors":
            if not self.path:
                raise ValueError("vectors dataset needs a path")
            return load_vectors(self.path)
        raise ValueError(f"unknown dataset kind {self.kind!r}")


@dataclass(frozen=True)
class CurvePoint:
    """One checkpoint on a quality-vs-effort curve."""

    screens: int
    triplets_total: int
    triplets_unique: int
    dollars: float
    tge: float
    loo_nn: float

    @property
    def no_triplets(self) -> bool:
        return self.triplets_unique == 0


@dataclass(frozen=True)
class ExperimentConfig:
    dataset: DatasetSpec = DatasetSpec()
    strategies: tuple[Strategy, ...] = (
        Strategy("random_triplet"),
        Strategy("grid", grid=GridSpec(12, 4)),
    )
    budget_screens: int = 600
    checkpoints: tuple[int, ...] = (25, 50, 100, 200, 400, 600)
    embed_dim: int = 2
    tste: TsteConfig = TsteConfig(dim=2)
    pricing: HitPricing = HitPricing()
    seeds: tuple[int, ...] = (1, 2, 3, 4, 5)
    holdout_triplets: int = 10_000

    def __post_init__(self):
        if list(self.checkpoints) != sorted(self.checkpoints):
            raise ValueError("checkpoints must be sorted ascending")
        if self.checkpoints and self.checkpoints[-1] > self.budget_screens:
            raise ValueError("checkpoints must not exceed budget_screens")
        object.__setattr__(self, "tste", replace(self.tste, dim=self.embed_dim))


def _sample_holdout(gt: GroundTruth, count: int, rng: np.random.Generator) -> list[Triplet]:
    worker = WorkerModel("perfect")
    out = []
    for _ in range(count):
        probe, pair = sample_random_triplet_question(gt.n_points, rng)
        out.append(oracle_answer_triplet(gt, probe, pair, worker))
    return out


def _run_one(
    gt: GroundTruth,
    strategy: Strategy,
    seed: int,
    config: ExperimentConfig,
    held_out: list[Triplet],
) -> list[CurvePoint]:
    n = gt.n_points
    worker = WorkerModel("perfect")
    # the stream hangs off the strategy label, not its position, so a
    # strategy's curve does not change when the list is reordered
    rng = np.random.default_rng([seed, 202, *strategy.label.encode()])
    fit_config = replace(config.tste, seed=config.tste.seed + seed)

    deduper = TripletDeduper()
    answered_raw: list[Triplet] = []
    current_emb: Embedding | None = None  # CKL's working embedding
    curve: list[CurvePoint] = []

    def record(screens: int):
        unique = deduper.resolved_list()
        if unique:
            fitted = tste_fit(unique, n, fit_config)
            tge = triplet_generalization_error(fitted, held_out)
        else:
            fitted = tste_fit([], n, fit_config)
            tge = TGE_SENTINEL
        loo = loo_nn_error(fitted, gt.labels)
        if strategy.kind == "grid":
            dollars = screens_cost(screens, config.pricing)
        else:
            dollars = one_at_a_time_cost(screens, config.pricing)
        curve.append(
            CurvePoint(
                screens=screens,
                triplets_total=len(answered_raw),
                triplets_unique=len(unique),
                dollars=dollars,
                tge=tge,
                loo_nn=loo,
            )
        )

    ci = 0
    while ci < len(config.checkpoints) and config.checkpoints[ci] == 0:
        record(0)
        ci += 1
    for screen in range(1, config.budget_screens + 1):
        if strategy.kind == "grid":
            task = sample_random_grid(n, strategy.grid, rng, task_id=f"s{screen}")
            answer = oracle_answer_grid(gt, task, worker)
            new = expand_grid_answer(task, answer)
        elif strategy.kind == "random_triplet":
            probe, pair = sample_random_triplet_question(n, rng)
            new = [oracle_answer_triplet(gt, probe, pair, worker)]
        else:
            if current_emb is None or len(answered_raw) % CKL_REFIT_EVERY == 0:
                current_emb = tste_fit(deduper.resolved_list(), n, fit_config)
            probe, pair = ckl_select_question(
                current_emb, n, strategy.ckl, rng, answered=answered_raw
            )
            new = [oracle_answer_triplet(gt, probe, pair, worker)]
        answered_raw.extend(new)
        deduper.extend(new)
        while ci < len(config.checkpoints) and config.checkpoints[ci] == screen:
            record(screen)
            ci += 1
    return curve


def run_experiment(config: ExperimentConfig) -> dict[tuple[str, int], list[CurvePoint]]:
    """Run every (strategy, seed) pair and return its checkpoint curve.

    Keys are (strategy label, seed) in configured order; values are
    CurvePoint lists, one per checkpoint.
    """
    gt = config.dataset.load()
    results: dict[tuple[str, int], list[CurvePoint]] = {}
    for seed in config.seeds:
        holdout_rng = np.random.default_rng([seed, 101])
        held_out = _sample_holdout(gt, config.holdout_triplets, holdout_rng)
        for strategy in config.strategies:
            results[(strategy.label, seed)] = _run_one(gt, strategy, seed, config, held_out)
    return results


def build_reference_embedding(
    all_answers: Sequence[tuple[GridTask, GridAnswer]], config: TsteConfig
) -> Embedding:
    """Fit the evaluation reference for human-collected data.

    Expands every answer, dedups, and fits; used when no vector ground
    truth exists.
    """
    if not all_answers:
        raise ValueError("need at least one answered grid")
    deduper = TripletDeduper()
    n_points = 0
    for task, answer in all_answers:
        deduper.extend(expand_grid_answer(task, answer))
        n_points = max(n_points, task.probe + 1, max(task.grid) + 1)
    return tste_fit(deduper.resolved_list(), n_points, config)


@dataclass(frozen=True)
class DistributionReport:
    """Occurrence histograms of equal-count grid vs. random collections."""

    n_objects: int
    n_triplets: int
    grid: OccurrenceStats
    random: OccurrenceStats


def reproduce_distribution_figure(
    gt: GroundTruth,
    n_triplets: int,
    spec: GridSpec = GridSpec(16, 4),
    seed: int = 0,
) -> DistributionReport:
    """Collect equal triplet counts by grid and by random single questions.

    Grid screens are answered until at least n_triplets accumulate, then
    the list is truncated to exactly n_triplets so both histograms share
    the same mass.
    """
    n = gt.n_points
    worker = WorkerModel("perfect")
    grid_rng = np.random.default_rng([seed, 11])
    random_rng = np.random.default_rng([seed, 12])
    grid_triplets: list[Triplet] = []
    screen = 0
    while len(grid_triplets) < n_triplets:
        screen += 1
        task = sample_random_grid(n, spec, grid_rng, task_id=f"g{screen}")
        answer = oracle_answer_grid(gt, task, worker)
        grid_triplets.extend(expand_grid_answer(task, answer))
    grid_triplets = grid_triplets[:n_triplets]
    random_triplets = []
    for _ in range(n_triplets):
        probe, pair = sample_random_triplet_question(n, random_rng)
        random_triplets.append(oracle_answer_triplet(gt, probe, pair, worker))
    return DistributionReport(
        n_objects=n,
        n_triplets=n_triplets,
        grid=occurrence_stats(grid_triplets, n),
        random=occurrence_stats(random_triplets, n),
    )


CURVES_HEADER = ["strategy", "seed", "screens", "triplets_total", "triplets_unique", "dollars", "tge", "loo_nn"]
_CURVES_COMMENT = (
    "# dollars: screens_cost for grid strategies, one_at_a_time_cost for "
    "random_triplet and ckl; ckl refits every %d answers\n" % CKL_REFIT_EVERY
)


def curves_csv_text(results: dict[tuple[str, int], list[CurvePoint]]) -> str:
    buf = io.StringIO()
    buf.write(_CURVES_COMMENT)
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(CURVES_HEADER)
    for (label, seed), curve in results.items():
        for p in curve:
            writer.writerow(
                [label, seed, p.screens, p.triplets_total, p.triplets_unique,
                 repr(p.dollars), repr(p.tge), repr(p.loo_nn)]
            )
    return buf.getvalue()


def emit_curves_csv(results: dict[tuple[str, int], list[CurvePoint]], path):
    """Write one CSV row per curve point, in deterministic order."""
    with open(path, "w", newline="", encoding="utf-8") as fh:
        fh.write(curves_csv_text(results))


def parse_curves_csv(path) -> dict[tuple[str, int], list[CurvePoint]]:
    """Inverse of emit_curves_csv; comment lines are skipped."""
    results: dict[tuple[str, int], list[CurvePoint]] = {}
    with open(path, newline="", encoding="utf-8") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    try:
        header = next(reader)
    except StopIteration:
        raise ParseError("empty curves file", line=1) from None
    if header != CURVES_HEADER:
        raise ParseError(f"unexpected curves header {header!r}", line=1)
    for row in reader:
        label, seed = row[0], int(row[1])
        point = CurvePoint(
            screens=int(row[2]),
            triplets_total=int(row[3]),
            triplets_unique=int(row[4]),
            dollars=float(row[5]),
            tge=float(row[6]),
            loo_nn=float(row[7]),
        )
        results.setdefault((label, seed), []).append(point)
    return results


# --- configuration file handling ---------------------------------------


def default_config() -> ExperimentConfig:
    return ExperimentConfig()


def config_to_dict(config: ExperimentConfig) -> dict:
    strategies = []
    for s in config.strategies:
        entry: dict = {"kind": s.kind}
        if s.kind == "grid":
            entry.update(n=s.grid.n, k=s.grid.k)
        if s.kind == "ckl":
            entry.update(
                mu=s.ckl.mu,
                pool_size=s.ckl.pool_size,
                posterior_samples=s.ckl.posterior_samples,
                seed=s.ckl.seed,
            )
        strategies.append(entry)
    d = config.dataset
    return {
        "dataset": {
            "kind": d.kind,
            "n_points": d.n_points,
            "n_clusters": d.n_clusters,
            "dim": d.dim,
            "spread": d.spread,
            "seed": d.seed,
            "path": d.path,
        },
        "strategies": strategies,
        "budget_screens": config.budget_screens,
        "checkpoints": list(config.checkpoints),
        "embed_dim": config.embed_dim,
        "tste": {
            "alpha": config.tste.alpha,
            "max_iters": config.tste.max_iters,
            "learning_rate": config.tste.learning_rate,
            "tolerance": config.tste.tolerance,
            "seed": config.tste.seed,
        },
        "pricing": {
            "hit_price": config.pricing.hit_price,
            "usable_screens_per_hit": config.pricing.usable_screens_per_hit,
            "catch_screens_per_hit": config.pricing.catch_screens_per_hit,
            "per_triplet_price": config.pricing.per_triplet_price,
            "platform_fee_fraction": config.pricing.platform_fee_fraction,
            "catch_fraction": config.pricing.catch_fraction,
        },
        "seeds": list(config.seeds),
        "holdout_triplets": config.holdout_triplets,
    }


def config_from_dict(data: dict) -> ExperimentConfig:
    base = default_config()
    dataset = DatasetSpec(**{**config_to_dict(base)["dataset"], **data.get("dataset", {})})
    strategies = []
    for entry in data.get("strategies", config_to_dict(base)["strategies"]):
        kind = entry["kind"]
        if kind == "grid":
            strategies.append(Strategy("grid", grid=GridSpec(entry["n"], entry["k"])))
        elif kind == "ckl":
            ckl_kwargs = {k: entry[k] for k in ("mu", "pool_size", "posterior_samples", "seed") if k in entry}
            strategies.append(Strategy("ckl", ckl=CklConfig(**ckl_kwargs)))
        else:
            strategies.append(Strategy(kind))
    embed_dim = data.get("embed_dim", base.embed_dim)
    tste_kwargs = {**config_to_dict(base)["tste"], **data.get("tste", {})}
    pricing_kwargs = {**config_to_dict(base)["pricing"], **data.get("pricing", {})}
    return ExperimentConfig(
        dataset=dataset,
        strategies=tuple(strategies),
        budget_screens=data.get("budget_screens", base.budget_screens),
        checkpoints=tuple(data.get("checkpoints", base.checkpoints)),
        embed_dim=embed_dim,
        tste=TsteConfig(dim=embed_dim, **tste_kwargs),
        pricing=HitPricing(**pricing_kwargs),
        seeds=tuple(data.get("seeds", base.seeds)),
        holdout_triplets=data.get("holdout_triplets", base.holdout_triplets),
    )


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        data = yaml.safe_load(fh) or {}
    return config_from_dict(data)


def dump_config(config: ExperimentConfig) -> str:
    return yaml.safe_dump(config_to_dict(config), sort_keys=False)
