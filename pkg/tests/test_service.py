import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from savanna.errors import InvalidArgumentError
from savanna.evaluation import SynthParams, synth_generate
from savanna.service import (
    WorkbenchService,
    create_app,
    ingest_dataset,
    write_synthetic_dataset,
)
from savanna.service.stages import run_codebook, run_features, run_fuse, run_proposals, run_train


def make_png_dir(root, n=3):
    (root / "images").mkdir(parents=True)
    rng = np.random.default_rng(0)
    for i in range(n):
        arr = rng.integers(0, 256, size=(16, 16, 3), dtype=np.uint8)
        Image.fromarray(arr).save(root / "images" / f"img{i}.png")
    return root


class TestIngest:
    def test_three_valid_pngs(self, tmp_path):
        report = ingest_dataset(make_png_dir(tmp_path / "ds"))
        assert len(report.manifest.images) == 3
        assert report.invalid == []

    def test_corrupt_file_reported_not_fatal(self, tmp_path):
        root = make_png_dir(tmp_path / "ds")
        (root / "images" / "broken.png").write_bytes(b"this is not a png")
        report = ingest_dataset(root)
        assert len(report.manifest.images) == 3
        assert [name for name, _ in report.invalid] == ["broken.png"]

    def test_reingest_is_byte_identical(self, tmp_path):
        root = make_png_dir(tmp_path / "ds")
        ingest_dataset(root)
        first = (root / "manifest.json").read_bytes()
        ingest_dataset(root)
        assert (root / "manifest.json").read_bytes() == first

    def test_empty_images_rejected(self, tmp_path):
        root = tmp_path / "ds"
        (root / "images").mkdir(parents=True)
        with pytest.raises(InvalidArgumentError):
            ingest_dataset(root)

    def test_duplicate_stems_reported(self, tmp_path):
        root = make_png_dir(tmp_path / "ds", n=1)
        arr = np.zeros((8, 8, 3), dtype=np.uint8)
        Image.fromarray(arr).save(root / "images" / "img0.bmp")  # same stem as img0.png
        report = ingest_dataset(root)
        assert len(report.manifest.images) == 1
        assert any("duplicate" in reason for _, reason in report.invalid)

    def test_manifest_load_checks_files_exist(self, tmp_path):
        from savanna.service.manifest import DatasetManifest

        root = make_png_dir(tmp_path / "ds")
        ingest_dataset(root)
        (root / "images" / "img1.png").unlink()
        with pytest.raises(InvalidArgumentError, match="missing files"):
            DatasetManifest.load(root)


class TestFuseFromVolunteerAnnotations:
    def test_polygon_documents_fuse_into_objects(self, tmp_path):
        root = make_png_dir(tmp_path / "crowd", n=2)
        ann = root / "annotations"
        ann.mkdir()
        doc = {
            "image_id": "img0",
            "viewer_count": 3,
            "polygons": [
                {"volunteer_id": "a", "vertices": [[2, 2], [9, 2], [9, 9], [2, 9]]},
                {"volunteer_id": "b", "vertices": [[3, 3], [10, 3], [10, 10], [3, 10]]},
                {"volunteer_id": "c", "vertices": [[13, 13], [15, 13], [15, 15], [13, 15]]},
            ],
        }
        (ann / "img0.json").write_text(json.dumps(doc))
        report = ingest_dataset(root)
        result = run_fuse(report.manifest)
        assert result == {"stage": "fuse", "objects": 1, "source": "volunteers"}


@pytest.fixture(scope="module")
def prepared_root(tmp_path_factory):
    """A small generated dataset with every pipeline stage run."""
    root = tmp_path_factory.mktemp("data")
    ds_dir = root / "demo"
    dataset = synth_generate(
        SynthParams(
            image_count=6,
            width=128,
            height=128,
            animals_per_image=2,
            animal_length_cm=(120.0, 180.0),
            bushes_per_image=4,
            holes_per_image=14,
            stones_per_image=30,
            seed=11,
        )
    )
    manifest = write_synthetic_dataset(dataset, ds_dir)
    run_fuse(manifest)
    run_proposals(manifest)
    run_codebook(manifest, k=8, seed=0, n_patches=400, n_positive=100)
    run_features(manifest, k=8)
    run_train(manifest, k=8, eval_fraction=0.4, seed=0)
    return root


@pytest.fixture()
def client(prepared_root):
    return TestClient(create_app(prepared_root))


def start_session(client):
    resp = client.post("/sessions", json={"dataset_id": "demo"})
    assert resp.status_code == 200, resp.text
    return resp.json()


class TestEndpoints:
    def test_datasets_listing(self, client, tmp_path):
        listing = client.get("/datasets").json()
        assert [d["dataset_id"] for d in listing] == ["demo"]
        assert "proposals" in listing[0]["stages"]

    def test_empty_root_lists_nothing(self, tmp_path):
        empty_client = TestClient(create_app(tmp_path / "nothing"))
        assert empty_client.get("/datasets").json() == []

    def test_unknown_stage_rejected(self, client):
        resp = client.post("/datasets/demo/pipeline", json={"stage": "nope"})
        assert resp.status_code == 400
        assert resp.json()["code"] == "invalid_argument"

    def test_unknown_dataset_404(self, client):
        resp = client.get("/datasets/absent/ground_truth")
        assert resp.status_code == 404
        assert resp.json()["code"] == "not_found"

    def test_session_flow_counts_match_verdicts(self, client):
        record = start_session(client)
        sid = record["session_id"]
        base = record["counts"]
        query = client.get(f"/sessions/{sid}/query").json()
        assert 1 <= len(query["items"]) <= 8
        verdicts = []
        for i, item in enumerate(query["items"]):
            if i == 0:
                verdicts.append({"proposal_id": item["proposal_id"], "decision": "animal", "promote_to_exemplar": True})
            elif i == 1:
                verdicts.append({"proposal_id": item["proposal_id"], "decision": "unclear"})
            else:
                verdicts.append({"proposal_id": item["proposal_id"], "decision": "background"})
        resp = client.post(f"/sessions/{sid}/feedback", json={"verdicts": verdicts, "idempotency_key": "k1"})
        assert resp.status_code == 200, resp.text
        counts = resp.json()["record"]["counts"]
        assert counts["queries_answered"] == base["queries_answered"] + 1
        assert counts["positives"] == base["positives"] + 1
        assert counts["negatives"] == base["negatives"] - 2
        assert counts["promoted"] == 1
        assert counts["removed_unclear"] == 1

    def test_feedback_outside_query_is_409(self, client):
        sid = start_session(client)["session_id"]
        client.get(f"/sessions/{sid}/query")
        resp = client.post(
            f"/sessions/{sid}/feedback",
            json={"verdicts": [{"proposal_id": "not-in-query", "decision": "background"}]},
        )
        assert resp.status_code == 409
        assert resp.json()["code"] == "verdict_not_in_query"

    def test_idempotent_retry_single_log_batch(self, client, prepared_root):
        sid = start_session(client)["session_id"]
        query = client.get(f"/sessions/{sid}/query").json()
        verdicts = [{"proposal_id": i["proposal_id"], "decision": "background"} for i in query["items"]]
        body = {"verdicts": verdicts, "idempotency_key": "retry-me"}
        first = client.post(f"/sessions/{sid}/feedback", json=body).json()
        second = client.post(f"/sessions/{sid}/feedback", json=body).json()
        assert first == second
        log_path = prepared_root / "demo" / "derived" / "sessions" / sid / "log.jsonl"
        batches = {json.loads(line)["batch"] for line in log_path.read_text().splitlines()}
        assert len(batches) == 1
        audit = client.get(f"/sessions/{sid}/audit").json()
        assert audit["consistent"] is True
        assert audit["live_counts"]["queries_answered"] == 1

    def test_query_get_is_idempotent_while_pending(self, client):
        sid = start_session(client)["session_id"]
        q1 = client.get(f"/sessions/{sid}/query").json()
        q2 = client.get(f"/sessions/{sid}/query").json()
        assert q1 == q2

    def test_metrics_reports_pr_curve(self, client):
        sid = start_session(client)["session_id"]
        metrics = client.get(f"/sessions/{sid}/metrics")
        assert metrics.status_code == 200
        payload = metrics.json()
        assert payload["kind"] == "pr"
        assert 0.0 <= payload["auc"] <= 1.0
        assert payload["points"]

    def test_finalize_and_record_status(self, client):
        sid = start_session(client)["session_id"]
        resp = client.post(f"/sessions/{sid}/finalize", json={"idempotency_key": "fin"})
        assert resp.status_code == 200
        assert resp.json()["record"]["status"] == "finalized"
        again = client.post(f"/sessions/{sid}/finalize", json={"idempotency_key": "fin"}).json()
        assert again == resp.json()

    def test_chip_is_100x100_png(self, client):
        sid = start_session(client)["session_id"]
        query = client.get(f"/sessions/{sid}/query").json()
        pid = query["items"][0]["proposal_id"]
        resp = client.get(f"/chips/{pid}")
        assert resp.status_code == 200
        assert resp.headers["content-type"] == "image/png"
        img = Image.open(io.BytesIO(resp.content))
        assert img.size == (100, 100)

    def test_unknown_chip_404(self, client):
        assert client.get("/chips/absent:p0").status_code == 404

    def test_export_includes_promotions(self, client):
        sid = start_session(client)["session_id"]
        query = client.get(f"/sessions/{sid}/query").json()
        pid = query["items"][0]["proposal_id"]
        client.post(
            f"/sessions/{sid}/feedback",
            json={"verdicts": [{"proposal_id": pid, "decision": "animal", "promote_to_exemplar": True}]},
        )
        export = client.get("/datasets/demo/ground_truth").json()
        sources = {e["source"] for e in export}
        assert sources == {"fusion", "active_learning"}
        promoted = [e for e in export if e["source"] == "active_learning"]
        assert any(e["object_id"] == pid for e in promoted)

    def test_promotion_then_rejection_nets_zero(self, client, prepared_root):
        sid = start_session(client)["session_id"]
        query = client.get(f"/sessions/{sid}/query").json()
        pid = query["items"][0]["proposal_id"]
        client.post(
            f"/sessions/{sid}/feedback",
            json={"verdicts": [{"proposal_id": pid, "decision": "animal", "promote_to_exemplar": True}]},
        )
        verification = prepared_root / "demo" / "derived" / "verification.json"
        verification.write_text(json.dumps({pid: "rejected"}))
        try:
            export = client.get("/datasets/demo/ground_truth").json()
            assert all(e["object_id"] != pid for e in export)
        finally:
            verification.unlink()

    def test_restart_restores_session_from_disk(self, client, prepared_root):
        sid = start_session(client)["session_id"]
        query = client.get(f"/sessions/{sid}/query").json()
        verdicts = [{"proposal_id": i["proposal_id"], "decision": "background"} for i in query["items"][:2]]
        verdicts.append({"proposal_id": query["items"][2]["proposal_id"], "decision": "animal", "promote_to_exemplar": True})
        before = client.post(f"/sessions/{sid}/feedback", json={"verdicts": verdicts}).json()["record"]

        fresh = TestClient(create_app(prepared_root))  # simulated restart
        restored = fresh.get(f"/sessions/{sid}").json()
        assert restored["counts"]["positives"] == before["counts"]["positives"]
        assert restored["counts"]["negatives"] == before["counts"]["negatives"]
        audit = fresh.get(f"/sessions/{sid}/audit").json()
        assert audit["consistent"] is True

    def test_service_layer_matches_library_result(self, prepared_root):
        # The endpoint result must equal the library call on the same inputs.
        service = WorkbenchService(prepared_root)
        record = service.create_session(
            __import__("savanna.service.app", fromlist=["SessionCreateIn"]).SessionCreateIn(dataset_id="demo")
        )
        handle = service.sessions[record["session_id"]]
        assert record["counts"] == handle.session.counts()
