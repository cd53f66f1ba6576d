"""Experiment state for live collection, event-sourced from disk.

Persistence per experiment is a manifest JSON (catalog, grid spec,
pricing, seed, targets) plus an append-only answers.log with one JSON
document per line.  The full task sequence regenerates deterministically
from the manifest seed, so manifest + log reconstruct every queryable
state; in-flight task assignments are deliberately not persisted.

Tasks are served in HIT-sized blocks (default 8 usable + 2 catch) with
catch positions shuffled within each block.  A catch trial is a grid
that contains an exact duplicate of the probe, which the worker must
select; failures are recorded, never filtered by default.
"""

from __future__ import annotations

import json
import math
import uuid
from dataclasses import dataclass
from datetime import datetime, timezone
from pathlib import Path
from statistics import median

import numpy as np

from ..collection import (
    GridAnswer,
    GridSpec,
    GridTask,
    TripletDeduper,
    expand_grid_answer,
    sample_random_grid,
)
from ..econ import HitPricing, hourly_wage
from ..errors import ConstraintError
from ..formats import triplets_csv_text


class SubmissionRejected(Exception):
    """An invalid submission; carries a machine-readable code."""

    def __init__(self, code: str, detail: str = ""):
        super().__init__(detail or code)
        self.code = code
        self.detail = detail


@dataclass(frozen=True)
class ServedTask:
    task: GridTask
    is_catch: bool
    # position of the probe duplicate within a catch grid, else None
    duplicate_position: int | None = None


@dataclass
class CollectionExperiment:
    """Manifest of one collection run."""

    experiment_id: str
    catalog: list[dict]  # [{"id": int, "image": str}, ...] with dense ids
    spec: GridSpec
    target_screens: int
    pricing: HitPricing
    seed: int
    instruction: str
    usable_per_hit: int
    catch_per_hit: int
    created_at: str

    def to_json(self) -> dict:
        return {
            "experiment_id": self.experiment_id,
            "catalog": self.catalog,
            "spec": {"n": self.spec.n, "k": self.spec.k},
            "target_screens": self.target_screens,
            "pricing": {
                "hit_price": self.pricing.hit_price,
                "usable_screens_per_hit": self.pricing.usable_screens_per_hit,
                "catch_screens_per_hit": self.pricing.catch_screens_per_hit,
                "per_triplet_price": self.pricing.per_triplet_price,
                "platform_fee_fraction": self.pricing.platform_fee_fraction,
                "catch_fraction": self.pricing.catch_fraction,
            },
            "seed": self.seed,
            "instruction": self.instruction,
            "usable_per_hit": self.usable_per_hit,
            "catch_per_hit": self.catch_per_hit,
            "created_at": self.created_at,
        }

    @classmethod
    def from_json(cls, data: dict) -> "CollectionExperiment":
        return cls(
            experiment_id=data["experiment_id"],
            catalog=data["catalog"],
            spec=GridSpec(data["spec"]["n"], data["spec"]["k"]),
            target_screens=data["target_screens"],
            pricing=HitPricing(**data["pricing"]),
            seed=data["seed"],
            instruction=data["instruction"],
            usable_per_hit=data["usable_per_hit"],
            catch_per_hit=data["catch_per_hit"],
            created_at=data["created_at"],
        )


@dataclass(frozen=True)
class AnswerRecord:
    """One line of the append-only log."""

    task_id: str
    worker_id: str
    selected: tuple[int, ...]
    elapsed_ms: int
    received_at: str
    is_catch: bool
    catch_passed: bool | None = None

    def to_json(self) -> dict:
        doc = {
            "task_id": self.task_id,
            "worker_id": self.worker_id,
            "selected": list(self.selected),
            "elapsed_ms": self.elapsed_ms,
            "received_at": self.received_at,
            "is_catch": self.is_catch,
        }
        if self.is_catch:
            doc["catch_passed"] = self.catch_passed
        return doc

    @classmethod
    def from_json(cls, data: dict) -> "AnswerRecord":
        return cls(
            task_id=data["task_id"],
            worker_id=data["worker_id"],
            selected=tuple(data["selected"]),
            elapsed_ms=data["elapsed_ms"],
            received_at=data["received_at"],
            is_catch=data["is_catch"],
            catch_passed=data.get("catch_passed"),
        )


@dataclass(frozen=True)
class WorkerStats:
    worker_id: str
    screens_answered: int
    median_seconds: float
    catch_pass_rate: float
    implied_wage: float


def generate_task_sequence(experiment: CollectionExperiment) -> list[ServedTask]:
    """Regenerate the full deterministic task sequence from the manifest.

    target_screens counts usable screens; catch trials are added on top,
    catch_per_hit per block of usable_per_hit, at shuffled positions.
    """
    spec = experiment.spec
    n_objects = len(experiment.catalog)
    rng = np.random.default_rng(experiment.seed)
    n_blocks = -(-experiment.target_screens // experiment.usable_per_hit)  # ceil
    usable_left = experiment.target_screens
    tasks: list[ServedTask] = []
    counter = 0
    for _ in range(n_blocks):
        block_usable = min(experiment.usable_per_hit, usable_left)
        usable_left -= block_usable
        block_size = block_usable + experiment.catch_per_hit
        catch_positions = set(
            int(p) for p in rng.choice(block_size, size=experiment.catch_per_hit, replace=False)
        )
        for slot in range(block_size):
            task_id = f"{experiment.experiment_id}-t{counter:06d}"
            counter += 1
            if slot in catch_positions:
                tasks.append(_make_catch_task(task_id, n_objects, spec, rng))
            else:
                tasks.append(_make_usable_task(task_id, n_objects, spec, rng))
    return tasks


def _make_usable_task(task_id, n_objects, spec, rng) -> ServedTask:
    return ServedTask(sample_random_grid(n_objects, spec, rng, task_id=task_id), is_catch=False)


def _make_catch_task(task_id, n_objects, spec, rng) -> ServedTask:
    probe = int(rng.integers(n_objects))
    draw = rng.choice(n_objects - 1, size=spec.n - 1, replace=False)
    others = [int(g) if g < probe else int(g) + 1 for g in draw]
    dup_pos = int(rng.integers(spec.n))
    grid = others[:dup_pos] + [probe] + others[dup_pos:]
    task = GridTask(task_id=task_id, probe=probe, grid=tuple(grid), spec=spec)
    return ServedTask(task, is_catch=True, duplicate_position=dup_pos)


class ExperimentStore:
    """All experiments under one data directory; single-writer discipline."""

    def __init__(self, data_dir):
        self.data_dir = Path(data_dir)
        self.data_dir.mkdir(parents=True, exist_ok=True)
        self._experiments: dict[str, CollectionExperiment] = {}
        self._tasks: dict[str, list[ServedTask]] = {}
        self._task_index: dict[str, dict[str, int]] = {}
        self._answered: dict[str, dict[str, AnswerRecord]] = {}
        self._answer_order: dict[str, list[str]] = {}
        self._assignments: dict[str, dict[str, int]] = {}  # worker -> task index
        self._served_through: dict[str, int] = {}
        self._seen_by_worker: dict[str, dict[str, set[str]]] = {}
        for manifest in sorted(self.data_dir.glob("*/manifest.json")):
            self._load_experiment(manifest)

    # --- creation and loading -------------------------------------

    def create_experiment(
        self,
        catalog: list[dict],
        spec: GridSpec,
        target_screens: int,
        pricing: HitPricing | None = None,
        seed: int | None = None,
        instruction: str = "Select the images most similar to the probe.",
    ) -> str:
        pricing = pricing or HitPricing()
        if target_screens < 0:
            raise ConstraintError("target_screens must be >= 0")
        _validate_catalog(catalog, spec)
        if seed is None:
            seed = int(np.random.SeedSequence().entropy % (2**63))
        experiment_id = uuid.uuid4().hex[:12]
        experiment = CollectionExperiment(
            experiment_id=experiment_id,
            catalog=catalog,
            spec=spec,
            target_screens=target_screens,
            pricing=pricing,
            seed=seed,
            instruction=instruction,
            usable_per_hit=pricing.usable_screens_per_hit,
            catch_per_hit=pricing.catch_screens_per_hit,
            created_at=_now(),
        )
        exp_dir = self.data_dir / experiment_id
        exp_dir.mkdir(parents=True)
        with open(exp_dir / "manifest.json", "w", encoding="utf-8") as fh:
            json.dump(experiment.to_json(), fh, indent=2)
            fh.write("\n")
        (exp_dir / "answers.log").touch()
        self._install(experiment)
        return experiment_id

    def _load_experiment(self, manifest_path: Path):
        with open(manifest_path, encoding="utf-8") as fh:
            experiment = CollectionExperiment.from_json(json.load(fh))
        self._install(experiment)
        log_path = manifest_path.parent / "answers.log"
        if log_path.exists():
            with open(log_path, encoding="utf-8") as fh:
                for line in fh:
                    if line.strip():
                        self._apply(experiment.experiment_id, AnswerRecord.from_json(json.loads(line)))

    def _install(self, experiment: CollectionExperiment):
        eid = experiment.experiment_id
        self._experiments[eid] = experiment
        tasks = generate_task_sequence(experiment)
        self._tasks[eid] = tasks
        self._task_index[eid] = {st.task.task_id: i for i, st in enumerate(tasks)}
        self._answered[eid] = {}
        self._answer_order[eid] = []
        self._assignments[eid] = {}
        self._served_through[eid] = 0
        self._seen_by_worker[eid] = {}

    def _apply(self, eid: str, record: AnswerRecord):
        """Fold one log record into queryable state."""
        self._answered[eid][record.task_id] = record
        self._answer_order[eid].append(record.task_id)
        seen = self._seen_by_worker[eid].setdefault(record.worker_id, set())
        seen.add(record.task_id)
        idx = self._task_index[eid][record.task_id]
        self._served_through[eid] = max(self._served_through[eid], idx + 1)

    # --- serving ----------------------------------------------------

    def get_experiment(self, experiment_id: str) -> CollectionExperiment:
        try:
            return self._experiments[experiment_id]
        except KeyError:
            raise SubmissionRejected("unknown_experiment", f"no experiment {experiment_id!r}") from None

    def next_task(self, experiment_id: str, worker_id: str) -> ServedTask | None:
        """The worker's open assignment, or the next unserved task.

        Idempotent until the returned task is answered; returns None when
        the experiment is exhausted for this worker.
        """
        self.get_experiment(experiment_id)
        tasks = self._tasks[experiment_id]
        assignment = self._assignments[experiment_id].get(worker_id)
        if assignment is not None and tasks[assignment].task.task_id not in self._answered[experiment_id]:
            return tasks[assignment]
        cursor = self._served_through[experiment_id]
        seen = self._seen_by_worker[experiment_id].get(worker_id, set())
        while cursor < len(tasks):
            candidate = tasks[cursor]
            if candidate.task.task_id not in self._answered[experiment_id] and candidate.task.task_id not in seen:
                self._assignments[experiment_id][worker_id] = cursor
                self._served_through[experiment_id] = cursor + 1
                return candidate
            cursor += 1
        return None

    def submit_answer(
        self, experiment_id: str, worker_id: str, task_id: str, selected, elapsed_ms: int
    ) -> AnswerRecord:
        exp = self.get_experiment(experiment_id)
        index = self._task_index[experiment_id].get(task_id)
        if index is None:
            raise SubmissionRejected("unknown_task", f"no task {task_id!r}")
        existing = self._answered[experiment_id].get(task_id)
        if existing is not None:
            # A retry of the exact same submission is acknowledged without
            # a second log record, so client retries after timeouts are safe.
            if (
                existing.worker_id == worker_id
                and existing.selected == tuple(sorted(int(p) for p in selected))
                and existing.elapsed_ms == int(elapsed_ms)
            ):
                return existing
            raise SubmissionRejected("already_answered", f"task {task_id!r} already has an answer")
        assignment = self._assignments[experiment_id].get(worker_id)
        if assignment != index:
            raise SubmissionRejected("task_not_assigned", f"task {task_id!r} is not assigned to {worker_id!r}")
        served = self._tasks[experiment_id][index]
        selected = tuple(sorted(int(p) for p in selected))
        if len(set(selected)) != len(selected) or len(selected) != exp.spec.k:
            raise SubmissionRejected(
                "wrong_selection_count", f"need exactly {exp.spec.k} distinct selections"
            )
        if any(p < 0 or p >= exp.spec.n for p in selected):
            raise SubmissionRejected("invalid_position", f"positions must lie in [0, {exp.spec.n})")
        if elapsed_ms < 0:
            raise SubmissionRejected("invalid_elapsed", "elapsed_ms must be >= 0")
        record = AnswerRecord(
            task_id=task_id,
            worker_id=worker_id,
            selected=selected,
            elapsed_ms=int(elapsed_ms),
            received_at=_now(),
            is_catch=served.is_catch,
            catch_passed=(served.duplicate_position in selected) if served.is_catch else None,
        )
        with open(self.data_dir / experiment_id / "answers.log", "a", encoding="utf-8") as fh:
            fh.write(json.dumps(record.to_json()) + "\n")
        self._apply(experiment_id, record)
        del self._assignments[experiment_id][worker_id]
        return record

    # --- queries ----------------------------------------------------

    def export_triplets(
        self, experiment_id: str, exclude_failed_catch_workers: float | None = None
    ) -> tuple[str, int, int]:
        """CSV text of deduplicated triplets from non-catch answers.

        Returns (csv_text, raw_count, unique_count).  With a threshold,
        answers from workers whose catch pass rate falls below it are
        dropped before expansion.
        """
        self.get_experiment(experiment_id)
        excluded = set()
        if exclude_failed_catch_workers is not None:
            for stats in self.worker_stats(experiment_id):
                if stats.catch_pass_rate < exclude_failed_catch_workers:
                    excluded.add(stats.worker_id)
        deduper = TripletDeduper()
        raw = 0
        tasks = self._tasks[experiment_id]
        index = self._task_index[experiment_id]
        for task_id in self._answer_order[experiment_id]:
            record = self._answered[experiment_id][task_id]
            if record.is_catch or record.worker_id in excluded:
                continue
            served = tasks[index[task_id]]
            answer = GridAnswer(task_id=task_id, selected=record.selected, elapsed_ms=record.elapsed_ms)
            expanded = expand_grid_answer(served.task, answer)
            raw += len(expanded)
            deduper.extend(expanded)
        return triplets_csv_text(deduper.resolved_list()), raw, len(deduper)

    def worker_stats(self, experiment_id: str) -> list[WorkerStats]:
        exp = self.get_experiment(experiment_id)
        by_worker: dict[str, list[AnswerRecord]] = {}
        for task_id in self._answer_order[experiment_id]:
            record = self._answered[experiment_id][task_id]
            by_worker.setdefault(record.worker_id, []).append(record)
        out = []
        for worker_id in sorted(by_worker):
            records = by_worker[worker_id]
            seconds = median(r.elapsed_ms / 1000.0 for r in records)
            catches = [r for r in records if r.is_catch]
            # no catch trials answered counts as a clean record
            pass_rate = (
                sum(1 for r in catches if r.catch_passed) / len(catches) if catches else 1.0
            )
            wage = hourly_wage(seconds, exp.pricing) if seconds > 0 else math.inf
            out.append(
                WorkerStats(
                    worker_id=worker_id,
                    screens_answered=len(records),
                    median_seconds=seconds,
                    catch_pass_rate=pass_rate,
                    implied_wage=wage,
                )
            )
        return out

    def stats(self, experiment_id: str) -> dict:
        exp = self.get_experiment(experiment_id)
        records = [self._answered[experiment_id][tid] for tid in self._answer_order[experiment_id]]
        _, raw, unique = self.export_triplets(experiment_id)
        return {
            "experiment_id": experiment_id,
            "target_screens": exp.target_screens,
            "screens_answered": len(records),
            "usable_answered": sum(1 for r in records if not r.is_catch),
            "catch_answered": sum(1 for r in records if r.is_catch),
            "raw_triplets": raw,
            "unique_triplets": unique,
            "workers": [
                {
                    "worker_id": w.worker_id,
                    "screens_answered": w.screens_answered,
                    "median_seconds": w.median_seconds,
                    "catch_pass_rate": w.catch_pass_rate,
                    "implied_wage": w.implied_wage if math.isfinite(w.implied_wage) else None,
                }
                for w in self.worker_stats(experiment_id)
            ],
        }


def replay_export(data_dir, experiment_id: str) -> tuple[str, int, int]:
    """Offline replay: manifest + answers.log -> the same export CSV.

    Reads only the two files, regenerates the task sequence, expands
    non-catch answers in log order, and dedups.  Byte-identical to the
    live server's export by construction.
    """
    exp_dir = Path(data_dir) / experiment_id
    with open(exp_dir / "manifest.json", encoding="utf-8") as fh:
        experiment = CollectionExperiment.from_json(json.load(fh))
    tasks = {st.task.task_id: st for st in generate_task_sequence(experiment)}
    deduper = TripletDeduper()
    raw = 0
    with open(exp_dir / "answers.log", encoding="utf-8") as fh:
        for line in fh:
            if not line.strip():
                continue
            record = AnswerRecord.from_json(json.loads(line))
            if record.is_catch:
                continue
            served = tasks[record.task_id]
            answer = GridAnswer(
                task_id=record.task_id, selected=record.selected, elapsed_ms=record.elapsed_ms
            )
            expanded = expand_grid_answer(served.task, answer)
            raw += len(expanded)
            deduper.extend(expanded)
    return triplets_csv_text(deduper.resolved_list()), raw, len(deduper)


def _validate_catalog(catalog: list[dict], spec: GridSpec):
    if len(catalog) < spec.n + 1:
        raise ConstraintError(
            f"catalog of {len(catalog)} objects cannot host a grid of {spec.n} plus a probe"
        )
    for i, entry in enumerate(catalog):
        if entry.get("id") != i:
            raise ConstraintError(f"catalog ids must be dense from 0, entry {i} has id {entry.get('id')!r}")
        if not entry.get("image"):
            raise ConstraintError(f"catalog entry {i} is missing an image path")


def _now() -> str:
    return datetime.now(timezone.utc).isoformat()
