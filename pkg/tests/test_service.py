"""Collection service tests: state machine, HTTP API, replay."""

import json
from collections import Counter

import numpy as np
import pytest
from fastapi.testclient import TestClient

from gridtriplets import GridSpec, HitPricing
from gridtriplets.errors import ConstraintError
from gridtriplets.service import ExperimentStore, SubmissionRejected, replay_export
from gridtriplets.service.api import create_app
from gridtriplets.service.experiments import CollectionExperiment, generate_task_sequence


def catalog_of(n):
    return [{"id": i, "image": f"img/{i:03d}.jpg"} for i in range(n)]


def make_store(tmp_path, n_objects=30, spec=(8, 2), target=40, seed=99, **kwargs):
    store = ExperimentStore(tmp_path / "data")
    eid = store.create_experiment(
        catalog=catalog_of(n_objects),
        spec=GridSpec(*spec),
        target_screens=target,
        seed=seed,
        **kwargs,
    )
    return store, eid


class TestCreate:
    def test_catalog_too_small_rejected(self, tmp_path):
        store = ExperimentStore(tmp_path / "data")
        with pytest.raises(ConstraintError):
            store.create_experiment(catalog_of(8), GridSpec(8, 2), 10)

    def test_non_dense_ids_rejected(self, tmp_path):
        store = ExperimentStore(tmp_path / "data")
        catalog = catalog_of(10)
        catalog[3]["id"] = 7
        with pytest.raises(ConstraintError):
            store.create_experiment(catalog, GridSpec(4, 1), 10)

    def test_same_seed_same_task_sequence(self, tmp_path):
        store, eid_a = make_store(tmp_path, seed=5)
        eid_b = store.create_experiment(catalog_of(30), GridSpec(8, 2), 40, seed=5)
        tasks_a = generate_task_sequence(store.get_experiment(eid_a))
        tasks_b = generate_task_sequence(store.get_experiment(eid_b))
        assert [(t.task.probe, t.task.grid, t.is_catch) for t in tasks_a] == [
            (t.task.probe, t.task.grid, t.is_catch) for t in tasks_b
        ]

    def test_full_collection_cost(self, tmp_path):
        from gridtriplets import screens_cost

        store, eid = make_store(tmp_path, n_objects=100, spec=(16, 4), target=408)
        exp = store.get_experiment(eid)
        assert screens_cost(exp.target_screens, exp.pricing) == pytest.approx(5.10, abs=1e-9)


class TestTaskSequence:
    def test_every_block_has_exactly_two_catch_trials(self, tmp_path):
        store, eid = make_store(tmp_path, target=80)
        tasks = generate_task_sequence(store.get_experiment(eid))
        assert len(tasks) == 100  # 10 blocks of 8 usable + 2 catch
        for start in range(0, 100, 10):
            block = tasks[start : start + 10]
            assert sum(t.is_catch for t in block) == 2

    def test_catch_grid_contains_probe_duplicate(self, tmp_path):
        store, eid = make_store(tmp_path, target=80)
        for served in generate_task_sequence(store.get_experiment(eid)):
            if served.is_catch:
                assert served.task.grid[served.duplicate_position] == served.task.probe
                assert served.task.grid.count(served.task.probe) == 1
            else:
                assert served.task.probe not in served.task.grid

    def test_duplicate_position_roughly_uniform(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=40, spec=(8, 2), target=2000, seed=3)
        positions = Counter(
            t.duplicate_position
            for t in generate_task_sequence(store.get_experiment(eid))
            if t.is_catch
        )
        # 500 catch trials over 8 positions: expect 62.5 each
        assert set(positions) == set(range(8))
        for count in positions.values():
            assert 30 <= count <= 100


class TestServing:
    def test_rerequest_is_idempotent(self, tmp_path):
        store, eid = make_store(tmp_path)
        first = store.next_task(eid, "w1")
        second = store.next_task(eid, "w1")
        assert first is second

    def test_workers_get_distinct_tasks(self, tmp_path):
        store, eid = make_store(tmp_path)
        t1 = store.next_task(eid, "w1")
        t2 = store.next_task(eid, "w2")
        assert t1.task.task_id != t2.task.task_id

    def test_exhaustion_signals_done(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=10, spec=(4, 1), target=2, seed=1)
        rng = np.random.default_rng(0)
        while (served := store.next_task(eid, "w")) is not None:
            sel = sorted(int(p) for p in rng.choice(4, size=1))
            store.submit_answer(eid, "w", served.task.task_id, sel, 1000)
        assert store.next_task(eid, "w") is None

    def test_no_worker_sees_a_task_twice(self, tmp_path):
        store, eid = make_store(tmp_path, target=16)
        seen = set()
        rng = np.random.default_rng(0)
        while (served := store.next_task(eid, "w")) is not None:
            assert served.task.task_id not in seen
            seen.add(served.task.task_id)
            sel = sorted(int(p) for p in rng.choice(8, size=2, replace=False))
            store.submit_answer(eid, "w", served.task.task_id, sel, 900)


class TestSubmission:
    def test_valid_answer_appends_record(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        before = store.stats(eid)["screens_answered"]
        store.submit_answer(eid, "w1", served.task.task_id, [0, 3], 850)
        assert store.stats(eid)["screens_answered"] == before + 1
        log = (store.data_dir / eid / "answers.log").read_text(encoding="utf-8").strip().splitlines()
        assert len(log) == 1
        record = json.loads(log[0])
        assert record["task_id"] == served.task.task_id
        assert record["selected"] == [0, 3]
        assert record["elapsed_ms"] == 850

    def test_wrong_selection_count_rejected(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        with pytest.raises(SubmissionRejected) as err:
            store.submit_answer(eid, "w1", served.task.task_id, [0], 100)
        assert err.value.code == "wrong_selection_count"

    def test_invalid_position_rejected(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        with pytest.raises(SubmissionRejected) as err:
            store.submit_answer(eid, "w1", served.task.task_id, [0, 8], 100)
        assert err.value.code == "invalid_position"

    def test_unknown_task_rejected(self, tmp_path):
        store, eid = make_store(tmp_path)
        with pytest.raises(SubmissionRejected) as err:
            store.submit_answer(eid, "w1", "nope", [0, 1], 100)
        assert err.value.code == "unknown_task"

    def test_unassigned_task_rejected(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        with pytest.raises(SubmissionRejected) as err:
            store.submit_answer(eid, "w2", served.task.task_id, [0, 1], 100)
        assert err.value.code == "task_not_assigned"

    def test_rejected_submission_not_persisted(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        with pytest.raises(SubmissionRejected):
            store.submit_answer(eid, "w1", served.task.task_id, [0], 100)
        assert (store.data_dir / eid / "answers.log").read_text(encoding="utf-8") == ""

    def test_identical_retry_is_acknowledged_once(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        first = store.submit_answer(eid, "w1", served.task.task_id, [1, 2], 500)
        again = store.submit_answer(eid, "w1", served.task.task_id, [1, 2], 500)
        assert again == first
        log = (store.data_dir / eid / "answers.log").read_text(encoding="utf-8").strip().splitlines()
        assert len(log) == 1

    def test_conflicting_resubmission_rejected(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w1")
        store.submit_answer(eid, "w1", served.task.task_id, [1, 2], 500)
        with pytest.raises(SubmissionRejected) as err:
            store.submit_answer(eid, "w1", served.task.task_id, [1, 3], 500)
        assert err.value.code == "already_answered"

    def test_catch_pass_recording(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=20, spec=(4, 1), target=8, seed=2)
        tasks = generate_task_sequence(store.get_experiment(eid))
        saw_pass = saw_fail = False
        for i, served in enumerate(tasks):
            got = store.next_task(eid, "w")
            assert got.task.task_id == served.task.task_id
            if served.is_catch:
                pick = served.duplicate_position if i % 2 == 0 else (served.duplicate_position + 1) % 4
                record = store.submit_answer(eid, "w", got.task.task_id, [pick], 100)
                assert record.catch_passed == (pick == served.duplicate_position)
                saw_pass |= record.catch_passed
                saw_fail |= not record.catch_passed
            else:
                record = store.submit_answer(eid, "w", got.task.task_id, [0], 100)
                assert record.catch_passed is None
        assert saw_pass and saw_fail


def run_scripted_session(store, eid, n_workers=3, answer_seed=0):
    """Answer every task with scripted selections; returns records count."""
    rng = np.random.default_rng(answer_seed)
    exp = store.get_experiment(eid)
    workers = [f"w{i}" for i in range(n_workers)]
    answered = 0
    active = True
    while active:
        active = False
        for worker in workers:
            served = store.next_task(eid, worker)
            if served is None:
                continue
            active = True
            sel = sorted(int(p) for p in rng.choice(exp.spec.n, size=exp.spec.k, replace=False))
            store.submit_answer(eid, worker, served.task.task_id, sel, int(rng.integers(500, 9000)))
            answered += 1
    return answered


class TestExportAndStats:
    def test_single_sixteen_choose_four_answer_yields_48(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=40, spec=(16, 4), target=1, seed=4)
        while True:
            served = store.next_task(eid, "w")
            store.submit_answer(eid, "w", served.task.task_id, [0, 1, 2, 3], 100)
            if not served.is_catch:
                break
        _, raw, unique = store.export_triplets(eid)
        assert raw == 48

    def test_empty_experiment_exports_header_only(self, tmp_path):
        store, eid = make_store(tmp_path)
        text, raw, unique = store.export_triplets(eid)
        assert text == "probe,near,far\n"
        assert raw == unique == 0

    def test_export_equals_offline_replay(self, tmp_path):
        store, eid = make_store(tmp_path, target=24, seed=6)
        run_scripted_session(store, eid)
        live, raw_live, unique_live = store.export_triplets(eid)
        replayed, raw_replay, unique_replay = replay_export(store.data_dir, eid)
        assert live == replayed
        assert (raw_live, unique_live) == (raw_replay, unique_replay)

    def test_rebuilt_store_reconstructs_state(self, tmp_path):
        store, eid = make_store(tmp_path, target=24, seed=7)
        run_scripted_session(store, eid)
        rebuilt = ExperimentStore(store.data_dir)
        assert rebuilt.export_triplets(eid) == store.export_triplets(eid)
        assert rebuilt.stats(eid) == store.stats(eid)

    def test_worker_stats_median_and_wage(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=20, spec=(4, 1), target=8, seed=8)
        times = [3570, 3570, 3570]  # median 3.57 s, the published (4,1) time
        for elapsed in times:
            served = store.next_task(eid, "w")
            store.submit_answer(eid, "w", served.task.task_id, [0], elapsed)
        stats = store.worker_stats(eid)[0]
        assert stats.median_seconds == pytest.approx(3.57)
        assert stats.implied_wage == pytest.approx(10.08, abs=0.02)
        assert abs(stats.implied_wage - 10.09) <= 0.02  # published wage

    def test_single_answer_median(self, tmp_path):
        store, eid = make_store(tmp_path)
        served = store.next_task(eid, "w")
        store.submit_answer(eid, "w", served.task.task_id, [0, 1], 4321)
        assert store.worker_stats(eid)[0].median_seconds == pytest.approx(4.321)

    def test_fast_worker_beats_seventeen_dollars(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=20, spec=(8, 1), target=640, seed=9)
        count = 0
        while count < 800:
            served = store.next_task(eid, "fast")
            if served is None:
                break
            store.submit_answer(eid, "fast", served.task.task_id, [0], 2100)
            count += 1
        stats = store.worker_stats(eid)[0]
        assert stats.screens_answered == 800
        assert stats.implied_wage > 17.0

    def test_exclude_failed_catch_workers(self, tmp_path):
        store, eid = make_store(tmp_path, n_objects=20, spec=(4, 1), target=8, seed=10)
        for served_info in generate_task_sequence(store.get_experiment(eid)):
            served = store.next_task(eid, "w")
            # always pick position 0: fails any catch whose duplicate is elsewhere
            store.submit_answer(eid, "w", served.task.task_id, [0], 100)
        stats = store.worker_stats(eid)[0]
        if stats.catch_pass_rate < 1.0:
            text, raw, unique = store.export_triplets(eid, exclude_failed_catch_workers=1.0)
            assert raw == 0 and text == "probe,near,far\n"
        full, raw_full, _ = store.export_triplets(eid)
        assert raw_full > 0


@pytest.fixture
def client(tmp_path):
    app = create_app(tmp_path / "data", assets_dir=None)
    return TestClient(app)


def http_create(client, n_objects=30, spec=(8, 2), target=40, seed=123):
    response = client.post(
        "/experiments",
        json={
            "catalog": catalog_of(n_objects),
            "spec": {"n": spec[0], "k": spec[1]},
            "target_screens": target,
            "seed": seed,
        },
    )
    assert response.status_code == 200
    return response.json()["experiment_id"]


class TestHttpApi:
    def test_full_loop(self, client):
        eid = http_create(client, n_objects=12, spec=(4, 2), target=4, seed=5)
        answered = 0
        while True:
            payload = client.get(f"/experiments/{eid}/next", params={"worker": "w1"}).json()
            if payload.get("done"):
                break
            assert set(payload) == {"task_id", "probe", "grid", "k", "instruction"}
            assert len(payload["grid"]) == 4
            assert payload["k"] == 2
            assert payload["probe"].startswith("/assets/")
            ack = client.post(
                f"/experiments/{eid}/answers",
                json={"task_id": payload["task_id"], "worker": "w1", "selected": [0, 1], "elapsed_ms": 700},
            )
            assert ack.status_code == 200 and ack.json()["ok"]
            answered += 1
        assert answered == 6  # 4 usable + the block's full 2 catch trials

    def test_catch_payload_schema_matches_normal(self, client, tmp_path):
        eid = http_create(client, n_objects=20, spec=(4, 1), target=8, seed=6)
        keysets = set()
        while True:
            payload = client.get(f"/experiments/{eid}/next", params={"worker": "w"}).json()
            if payload.get("done"):
                break
            keysets.add(tuple(sorted(payload)))
            client.post(
                f"/experiments/{eid}/answers",
                json={"task_id": payload["task_id"], "worker": "w", "selected": [0], "elapsed_ms": 100},
            )
        assert len(keysets) == 1  # catch tasks are indistinguishable on the wire

    def test_rejection_codes(self, client):
        eid = http_create(client)
        payload = client.get(f"/experiments/{eid}/next", params={"worker": "w"}).json()
        bad = client.post(
            f"/experiments/{eid}/answers",
            json={"task_id": payload["task_id"], "worker": "w", "selected": [0], "elapsed_ms": 5},
        )
        assert bad.status_code == 409
        assert bad.json()["code"] == "wrong_selection_count"
        missing = client.get("/experiments/nope/next", params={"worker": "w"})
        assert missing.status_code == 404
        assert missing.json()["code"] == "unknown_experiment"

    def test_create_validation_error(self, client):
        response = client.post(
            "/experiments",
            json={"catalog": catalog_of(4), "spec": {"n": 4, "k": 1}, "target_screens": 5},
        )
        assert response.status_code == 422

    def test_csv_endpoint_and_headers(self, client):
        eid = http_create(client, n_objects=12, spec=(4, 2), target=4, seed=7)
        rng = np.random.default_rng(0)
        while True:
            payload = client.get(f"/experiments/{eid}/next", params={"worker": "w"}).json()
            if payload.get("done"):
                break
            sel = sorted(int(p) for p in rng.choice(4, size=2, replace=False))
            client.post(
                f"/experiments/{eid}/answers",
                json={"task_id": payload["task_id"], "worker": "w", "selected": sel, "elapsed_ms": 100},
            )
        response = client.get(f"/experiments/{eid}/triplets.csv")
        assert response.status_code == 200
        assert response.headers["content-type"].startswith("text/csv")
        assert int(response.headers["x-raw-triplets"]) == 4 * 4  # 4 usable screens x k(n-k)
        assert response.text.startswith("probe,near,far\n")

    def test_stats_endpoint(self, client):
        eid = http_create(client, n_objects=12, spec=(4, 2), target=4, seed=8)
        payload = client.get(f"/experiments/{eid}/next", params={"worker": "w"}).json()
        client.post(
            f"/experiments/{eid}/answers",
            json={"task_id": payload["task_id"], "worker": "w", "selected": [2, 3], "elapsed_ms": 3500},
        )
        stats = client.get(f"/experiments/{eid}/stats").json()
        assert stats["screens_answered"] == 1
        assert stats["workers"][0]["worker_id"] == "w"
        assert stats["workers"][0]["median_seconds"] == pytest.approx(3.5)

    def test_static_assets_served(self, tmp_path):
        assets = tmp_path / "assets"
        assets.mkdir()
        (assets / "probe.jpg").write_bytes(b"fake-jpeg")
        app = create_app(tmp_path / "data", assets_dir=assets)
        client = TestClient(app)
        response = client.get("/assets/probe.jpg")
        assert response.status_code == 200
        assert response.content == b"fake-jpeg"
