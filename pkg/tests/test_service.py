"""The HTTP surface: endpoints, schemas, and error mapping."""

import asyncio

import httpx
import numpy as np
import pytest

from pelletvision import io as pvio
from pelletvision.service.app import create_app


class AsgiClient:
    """Synchronous wrapper over the in-process ASGI transport."""

    def __init__(self, app):
        self.app = app

    def _request(self, method: str, path: str, **kwargs):
        async def go():
            transport = httpx.ASGITransport(app=self.app)
            async with httpx.AsyncClient(
                    transport=transport, base_url="http://test") as client:
                return await client.request(method, path, **kwargs)

        return asyncio.run(go())

    def get(self, path: str):
        return self._request("GET", path)

    def post(self, path: str, json=None):
        return self._request("POST", path, json=json)


@pytest.fixture(scope="module")
def client():
    return AsgiClient(create_app())


class TestHealth:
    def test_health(self, client):
        response = client.get("/v1/health")
        assert response.status_code == 200
        body = response.json()
        assert body["status"] == "ok"
        assert body["tool_version"]


class TestPipelineEndpoints:
    def test_synth_then_targets_then_postprocess(self, client, tmp_path):
        response = client.post("/v1/synth", json={
            "out_dir": str(tmp_path / "scene"), "seed": 5,
            "height": 96, "width": 96, "n_objects": 4})
        assert response.status_code == 200
        body = response.json()
        assert body["placed"] == 4
        assert body["complete"] is True
        assert body["provenance"]["tool_version"]
        assert body["effective_config"]["n_rays"] == "32"

        response = client.post("/v1/gen-targets", json={
            "labels_path": str(tmp_path / "scene" / "labels.png"),
            "classes_path": str(tmp_path / "scene" / "classes.png"),
            "out_dir": str(tmp_path / "maps"),
            "config": {"n_rays": 16}})
        assert response.status_code == 200
        assert response.json()["n_rays"] == 16

        response = client.post("/v1/postprocess", json={
            "maps_dir": str(tmp_path / "maps"),
            "out_dir": str(tmp_path / "inst"),
            "config": {"n_rays": 16}})
        assert response.status_code == 200
        body = response.json()
        assert body["n_instances"] == 4
        assert (tmp_path / "inst" / "instances.png").is_file()

        response = client.post("/v1/evaluate", json={
            "pred_path": str(tmp_path / "inst" / "instances.png"),
            "gt_path": str(tmp_path / "scene" / "labels.png")})
        assert response.status_code == 200
        body = response.json()
        assert body["match_report"]["precision"] == 1.0
        assert body["match_report"]["recall"] == 1.0
        assert 0.8 <= body["mask_iou"] <= 1.0

    def test_measure_requires_mm_per_px(self, client, tmp_path):
        from pelletvision.postproc import InstanceMap, InstanceRecord

        inst = InstanceMap(labels=np.zeros((4, 4), dtype=np.int32), records=[])
        pvio.write_instance_map(inst, tmp_path / "i.png", tmp_path / "i.csv")
        response = client.post("/v1/measure", json={
            "labels_path": str(tmp_path / "i.png"),
            "records_path": str(tmp_path / "i.csv"),
            "out_dir": str(tmp_path / "out")})
        assert response.status_code == 400
        assert response.json()["kind"] == "usage"
        assert "mm_per_px" in response.json()["message"]

    def test_normalize_roundtrip(self, client, tmp_path, rng):
        image = rng.integers(60, 190, size=(16, 16, 3)).astype(np.uint8)
        pvio.write_rgb_image(image, tmp_path / "img.png")
        response = client.post("/v1/normalize", json={
            "inputs": [str(tmp_path / "img.png")],
            "out_dir": str(tmp_path / "norm"),
            "ref_mean": 60.0, "ref_std": 8.0})
        assert response.status_code == 200
        body = response.json()
        assert body["images"][0]["l_mean"] == pytest.approx(60.0, abs=0.5)

    def test_split_endpoint(self, client, tmp_path, rng):
        for i in range(8):
            classes = rng.integers(0, 5, size=(12, 12)).astype(np.int32)
            pvio.write_label_map(classes, tmp_path / f"img{i}.png")
        response = client.post("/v1/split", json={
            "out_manifest": str(tmp_path / "split.txt"),
            "seed": 3, "classes_dir": str(tmp_path),
            "config": {"split_restarts": 4}})
        assert response.status_code == 200
        body = response.json()
        assert len(body["split"]["test_ids"]) == 2
        assert (tmp_path / "split.txt").is_file()


class TestErrorMapping:
    def test_missing_file_is_data_error_422(self, client, tmp_path):
        response = client.post("/v1/evaluate", json={
            "pred_path": str(tmp_path / "a.png"),
            "gt_path": str(tmp_path / "b.png")})
        assert response.status_code == 422
        assert response.json()["kind"] == "data"

    def test_bad_parameter_is_usage_error_400(self, client, tmp_path):
        response = client.post("/v1/synth", json={
            "out_dir": str(tmp_path), "seed": 1,
            "config": {"prob_threshold": 2.0}})
        assert response.status_code == 400
        assert response.json()["kind"] == "usage"

    def test_schema_violation_is_usage_error_400(self, client):
        response = client.post("/v1/synth", json={"seed": "not-an-int"})
        assert response.status_code == 400
        assert response.json()["kind"] == "usage"

    def test_shape_mismatch_is_data_error(self, client, tmp_path, rng):
        a = rng.integers(0, 3, size=(8, 8)).astype(np.int32)
        b = rng.integers(0, 3, size=(9, 8)).astype(np.int32)
        pvio.write_label_map(a, tmp_path / "a.png")
        pvio.write_label_map(b, tmp_path / "b.png")
        response = client.post("/v1/evaluate", json={
            "pred_path": str(tmp_path / "a.png"),
            "gt_path": str(tmp_path / "b.png")})
        assert response.status_code == 422
        assert response.json()["kind"] == "data"
