"""HTTP service: endpoint contracts, persistence, and writer semantics."""

from __future__ import annotations

import contextlib
import threading
import time

import pytest
from fastapi.testclient import TestClient

from oneedit.scenario import RunConfig
from oneedit.service import ServiceError, ServicePaths, SessionState, build_app


def make_state(fixture, state_dir, queue_size=64, **overrides) -> SessionState:
    cfg = RunConfig().override(**overrides) if overrides else RunConfig()
    paths = ServicePaths(
        kg=fixture.files["kg"],
        schema=fixture.files["schema"],
        rules=fixture.files["rules"],
        aliases=fixture.files["aliases"],
        state_dir=str(state_dir),
    )
    return SessionState(paths, cfg, queue_size=queue_size)


@contextlib.contextmanager
def service(fixture, state_dir, **overrides):
    state = make_state(fixture, state_dir, **overrides)
    try:
        yield state, TestClient(build_app(state))
    finally:
        state.close()


class TestEditEndpoint:
    def test_utterance_edit_returns_the_full_trace(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            r = client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"})
            assert r.status_code == 200
            doc = r.json()
            assert doc["kind"] == "edit"
            assert doc["triple"] == {"s": "S00", "r": "head", "o": "B00"}
            assert doc["conflict"]["kind"] == "Coverage"
            assert doc["conflict"]["existing_forward"] == {"s": "S00", "r": "head", "o": "A00"}
            assert doc["answer"]["answer"] == "B00"
            assert doc["new_keys"], "an applied edit must name its cache keys"
            kinds = {a["kind"] for a in doc["actions"]}
            assert "kg_remove" in kinds  # the file-seeded head had no cache entry
            removed = {tuple(a["triple"].values()) for a in doc["actions"] if a["kind"] == "kg_remove"}
            assert ("A00", "head_of", "S00") in {(t["s"], t["r"], t["o"]) for a in doc["actions"]
                                                 if a["kind"] == "kg_remove" for t in [a["triple"]]}, (
                f"stale inverse twin must be removed with its fact, got {removed}"
            )

            health = client.get("/api/health").json()
            assert health["status"] == "ok"
            assert health["requests"] == 1
            assert health["active_entries"] == len(doc["new_keys"])

    def test_raw_triple_edit(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            r = client.post("/api/edit", json={"triple": {"s": "S01", "r": "head", "o": "C01"}})
            assert r.status_code == 200
            assert r.json()["answer"]["answer"] == "C01"

    def test_question_text_passes_through_with_an_answer(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            r = client.post("/api/edit", json={"user": "u1", "text": "Who is the head of S00?"})
            doc = r.json()
            assert doc["kind"] == "generate"
            assert doc["actions"] == []
            assert doc["answer"]["answer"] == "A00"
            r2 = client.post("/api/edit", json={"user": "u1", "text": "tell me a story"})
            assert r2.json()["kind"] == "generate"
            assert r2.json()["answer"] is None

    @pytest.mark.parametrize(
        "body",
        [
            {},
            {"text": "   "},
            {"user": "u1"},
            {"triple": {"s": "S00", "r": "head"}},
            {"triple": {"s": "", "r": "head", "o": "B00"}},
        ],
    )
    def test_bad_bodies_are_rejected(self, small_fixture, tmp_path, body):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            assert client.post("/api/edit", json=body).status_code == 400

    def test_unknown_relation_is_unprocessable(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            r = client.post("/api/edit", json={"triple": {"s": "S00", "r": "owns", "o": "X"}})
            assert r.status_code == 422

    def test_strict_mode_refuses_file_seeded_conflicts(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s", strict=True) as (_state, client):
            r = client.post("/api/edit", json={"triple": {"s": "S00", "r": "head", "o": "B00"}})
            assert r.status_code == 409
            doc = r.json()
            assert doc["conflict"]["kind"] == "Coverage"
            assert doc["conflict"]["existing_forward"]["o"] == "A00"
            # nothing happened
            assert client.get("/api/health").json()["active_entries"] == 0


class TestQueryEndpoint:
    def test_edited_answers_carry_their_cache_key(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            edit = client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"}).json()
            primary = next(
                a["key"] for a in edit["actions"] if a["kind"] == "edit" and a["source"] == "primary"
            )
            q = client.post("/api/query", json={"subject": "S00", "relation": "head"}).json()
            assert q["answer"] == "B00"
            assert q["overridden"] is True
            assert q["provenance"] == primary

    def test_file_seeded_answers_have_no_provenance(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            q = client.post("/api/query", json={"subject": "F000", "relation": "motto"}).json()
            assert q["answer"] == "G000"
            assert q["overridden"] is False
            assert q["provenance"] is None

    def test_unanswerable_queries_404(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            assert client.post("/api/query", json={"subject": "Ghost", "relation": "head"}).status_code == 404
            assert client.post("/api/query", json={"subject": "S00"}).status_code == 400


class TestRollbackEndpoint:
    def test_primary_rollback_unwinds_the_whole_request(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (state, client):
            before_triples = client.get("/api/health").json()["triples"]
            edit = client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"}).json()
            primary = next(
                a["key"] for a in edit["actions"] if a["kind"] == "edit" and a["source"] == "primary"
            )
            r = client.post(f"/api/rollback/{primary}", json={"user": "u1"})
            assert r.status_code == 200
            rolled_keys = {a["key"] for a in r.json()["actions"] if a["kind"] == "rollback"}
            assert set(edit["new_keys"]) <= rolled_keys

            health = client.get("/api/health").json()
            assert health["active_entries"] == 0
            assert health["triples"] == before_triples
            q = client.post("/api/query", json={"subject": "S00", "relation": "head"}).json()
            assert q["answer"] == "A00"
            view = state.view()
            assert view.g.lookup("S00", "head") == {"A00"}
            assert view.g.lookup("A00", "head_of") == {"S00"}, "restored fact brings its twin back"

    def test_non_primary_rollback_is_surgical(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            edit = client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"}).json()
            implied = next(
                a["key"] for a in edit["actions"] if a["kind"] == "edit" and a["source"] == "implied"
            )
            r = client.post(f"/api/rollback/{implied}")
            assert r.status_code == 200
            assert len([a for a in r.json()["actions"] if a["kind"] == "rollback"]) == 1
            q = client.post("/api/query", json={"subject": "S00", "relation": "head"}).json()
            assert q["answer"] == "B00", "the primary edit must survive a surgical rollback"

    def test_double_rollback_is_gone(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            edit = client.post("/api/edit", json={"user": "u1", "text": "Set S01 head to B01"}).json()
            key = edit["new_keys"][0]
            assert client.post(f"/api/rollback/{key}").status_code == 200
            assert client.post(f"/api/rollback/{key}").status_code == 410

    def test_unknown_key_404(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            assert client.post("/api/rollback/e999999-deadbeef-u1").status_code == 404


class TestReadEndpoints:
    def test_history_filters_are_conjunctive(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"})
            client.post("/api/edit", json={"user": "u2", "text": "Set S01 head to C01"})
            client.post("/api/edit", json={"user": "u2", "text": "Set S02 head to C02"})

            all_entries = client.get("/api/history").json()["entries"]
            assert len(all_entries) == 3
            u2 = client.get("/api/history", params={"user": "u2"}).json()["entries"]
            assert [e["request_id"] for e in u2] == [2, 3]
            both = client.get(
                "/api/history", params={"user": "u2", "subject": "S01"}
            ).json()["entries"]
            assert [e["triple"]["s"] for e in both] == ["S01"]
            none = client.get(
                "/api/history", params={"user": "u1", "subject": "S01"}
            ).json()["entries"]
            assert none == []

    def test_cache_listing_shows_status_and_source(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            edit = client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"}).json()
            client.post(f"/api/rollback/{edit['new_keys'][0]}")
            entries = client.get("/api/cache").json()["entries"]
            assert len(entries) == len(edit["new_keys"])
            assert {e["status"] for e in entries} == {"RolledBack"}
            assert {e["source"] for e in entries} >= {"primary", "implied"}

    def test_neighborhood_has_nodes_and_edges(self, small_fixture, tmp_path):
        with service(small_fixture, tmp_path / "s") as (_state, client):
            doc = client.get("/api/graph/neighborhood", params={"subject": "S00", "n": 3}).json()
            assert doc["subject"] == "S00"
            assert len(doc["triples"]) == 3
            assert doc["nodes"] == sorted(doc["nodes"])
            for edge, t in zip(doc["edges"], doc["triples"]):
                assert edge == {"source": t["s"], "relation": t["r"], "target": t["o"]}
            assert client.get("/api/graph/neighborhood").status_code == 422


class TestWriterQueue:
    def test_full_queue_returns_503(self, small_fixture, tmp_path):
        state = make_state(small_fixture, tmp_path / "s", queue_size=1)
        try:
            release = threading.Event()
            a_started = threading.Event()

            def slow():
                a_started.set()
                release.wait(timeout=10)

            results = []
            t_a = threading.Thread(target=lambda: results.append(state.submit(slow)))
            t_a.start()
            assert a_started.wait(timeout=5)

            t_b = threading.Thread(target=lambda: results.append(state.submit(lambda: "b")))
            t_b.start()
            deadline = time.monotonic() + 5
            while not state._queue.full() and time.monotonic() < deadline:
                time.sleep(0.005)
            assert state._queue.full(), "second job should be parked in the queue"

            with pytest.raises(ServiceError) as exc:
                state.submit(lambda: "c")
            assert exc.value.status == 503

            release.set()
            t_a.join(timeout=5)
            t_b.join(timeout=5)
            assert "b" in results
        finally:
            release.set()
            state.close()


class TestPersistence:
    def test_restart_replays_to_the_identical_state(self, small_fixture, tmp_path):
        state_dir = tmp_path / "s"
        with service(small_fixture, state_dir) as (state, client):
            client.post("/api/edit", json={"user": "u1", "text": "Set S00 head to B00"})
            client.post("/api/edit", json={"user": "u2", "text": "Set S00 head to C00"})
            edit3 = client.post("/api/edit", json={"user": "u1", "text": "Set S01 head to B01"}).json()
            client.post(f"/api/rollback/{edit3['new_keys'][0]}", json={"user": "u1"})
            view = state.view()
            want_model = view.m.state_view()
            want_triples = view.g.triples()
            want_cache = [(e.key, e.status, e.request_id) for e in view.cache.entries]
            want_requests = len(view.audit)

        reborn = make_state(small_fixture, state_dir)
        try:
            view2 = reborn.view()
            assert view2.m.state_view() == want_model
            assert view2.g.triples() == want_triples
            assert [(e.key, e.status, e.request_id) for e in view2.cache.entries] == want_cache
            assert len(view2.audit) == want_requests
            # request ids keep counting instead of colliding
            record = reborn.submit(lambda: reborn.do_edit("u3", text="Set S02 head to D02"))
            assert record["request_id"] == want_requests + 1
        finally:
            reborn.close()

    def test_noise_timeline_survives_restart(self, small_fixture, tmp_path):
        """Direct backend: a restarted service draws the same noise a
        continuous one would, because the RNG state rides in the log."""
        straight_dir, broken_dir = tmp_path / "a", tmp_path / "b"
        script = [f"Set S0{i} head to B0{i}" for i in range(3)]

        with service(small_fixture, straight_dir, backend="direct", seed=5) as (state, client):
            for text in script:
                client.post("/api/edit", json={"user": "u1", "text": text})
            want = state.view().m.state_view()

        with service(small_fixture, broken_dir, backend="direct", seed=5) as (state, client):
            client.post("/api/edit", json={"user": "u1", "text": script[0]})
        with service(small_fixture, broken_dir, backend="direct", seed=5) as (state, client):
            for text in script[1:]:
                client.post("/api/edit", json={"user": "u1", "text": text})
            got = state.view().m.state_view()

        assert got == want


def test_concurrent_writers_linearize(small_fixture, tmp_path):
    """Threads racing on distinct subjects: last write per subject wins,
    every request lands exactly once, and a restart agrees byte for byte."""
    state_dir = tmp_path / "s"
    finals = {}
    with service(small_fixture, state_dir) as (state, client):
        app_client = client

        def hammer(i: int):
            mine = TestClient(build_app(state))
            subject = f"S0{i}"
            for step, obj in enumerate([f"B0{i}", f"C0{i}", f"D0{i}"]):
                r = mine.post("/api/edit", json={"user": f"u{i+1}", "triple": {"s": subject, "r": "head", "o": obj}})
                assert r.status_code == 200
                finals[subject] = obj

        threads = [threading.Thread(target=hammer, args=(i,)) for i in range(3)]
        for t in threads:
            t.start()
        for t in threads:
            t.join(timeout=30)

        health = app_client.get("/api/health").json()
        assert health["requests"] == 9
        for subject, obj in finals.items():
            q = app_client.post("/api/query", json={"subject": subject, "relation": "head"}).json()
            assert q["answer"] == obj
        want_model = state.view().m.state_view()
        want_triples = state.view().g.triples()

    reborn = make_state(small_fixture, state_dir)
    try:
        assert reborn.view().m.state_view() == want_model
        assert reborn.view().g.triples() == want_triples
    finally:
        reborn.close()
