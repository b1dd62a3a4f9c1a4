import base64

import pytest
from fastapi.testclient import TestClient

from msqkit.markedset import MarkedSet, from_progressions
from msqkit.presets import autocorr_set
from msqkit.service import create_app
from msqkit.squares import ProgressionFamily


@pytest.fixture(scope="module")
def client():
    return TestClient(create_app())


def set_b64_of(s: MarkedSet) -> str:
    return base64.b64encode(s.serialize()).decode()


class TestBasics:
    def test_health(self, client):
        body = client.get("/health").json()
        assert body["status"] == "ok"

    def test_construct(self, client):
        resp = client.post(
            "/construct", json={"n": 4, "k": 1, "starts": [1, 5, 9, 13]}
        )
        body = resp.json()
        assert resp.status_code == 200
        assert body["magic_sum"] == 34
        assert sorted(body["entries"]) == list(range(1, 17))

    def test_construct_bad_order_maps_to_422(self, client):
        resp = client.post("/construct", json={"n": 6, "k": 1, "starts": [1, 7, 13, 19, 25, 31]})
        assert resp.status_code == 422
        assert resp.json()["detail"]["error_type"] == "UnsupportedOrderError"

    def test_validate(self, client):
        good = [[2, 7, 6], [9, 5, 1], [4, 3, 8]]
        assert client.post("/validate", json={"entries": good}).json() == {
            "is_magic": True,
            "magic_sum": 15,
        }
        bad = [[1, 2], [3, 4]]
        assert client.post("/validate", json={"entries": bad}).json()["is_magic"] is False

    def test_missing_field_is_422(self, client):
        assert client.post("/construct", json={"n": 4}).status_code == 422


class TestSetsAndSpectra:
    def test_genset_roundtrip(self, client):
        body = client.post(
            "/genset",
            json={"q": 5, "family": {"n": 4, "k": 1, "starts": [1, 5, 9, 13]}},
        ).json()
        assert body["ones"] == 16
        recovered = MarkedSet.deserialize(base64.b64decode(body["data_b64"]))
        assert sorted(recovered.iter_marked()) == list(range(1, 17))

    def test_genset_with_noise_is_seeded(self, client):
        req = {
            "q": 8,
            "indices": [3, 5],
            "noise": {"kind": "bernoulli-density", "density": 0.2, "seed": 9},
        }
        first = client.post("/genset", json=req).json()
        second = client.post("/genset", json=req).json()
        assert first == second
        assert first["ones"] > 2

    def test_spectrum_and_sample(self, client):
        s = from_progressions(ProgressionFamily(n=4, starts=(1, 5, 9, 13), k=1), 5)
        payload = {"set_b64": set_b64_of(s)}
        spec = client.post("/spectrum", json=payload).json()
        assert len(spec["probabilities"]) == 32
        assert abs(sum(spec["probabilities"]) - 1) < 1e-9
        assert spec["csv"].splitlines()[0] == "k,probability"
        counts = client.post(
            "/sample", json={"set_b64": set_b64_of(s), "shots": 50, "seed": 3}
        ).json()
        assert sum(counts["counts"].values()) == 50

    def test_bad_payload_is_422(self, client):
        resp = client.post("/spectrum", json={"set_b64": "not-base64!!"})
        assert resp.status_code == 422


class TestPipelines:
    def test_detect_solution(self, client):
        fam = ProgressionFamily(n=4, starts=(10, 60, 110, 160), k=3)
        s = from_progressions(fam, 8)
        body = client.post(
            "/detect",
            json={
                "set_b64": set_b64_of(s),
                "n": 4,
                "representatives": list(fam.starts),
            },
        ).json()
        assert body["outcome"] == "solution"
        assert body["family"]["k"] == 3

    def test_detect_none(self, client):
        body = client.post(
            "/detect", json={"set_b64": set_b64_of(MarkedSet(q=6, mask=0)), "n": 4}
        ).json()
        assert body["outcome"] == "none-of-form"

    def test_autocorr(self, client):
        s = autocorr_set(noise_seed=None)
        body = client.post(
            "/autocorr", json={"set_b64": set_b64_of(s), "s_from": 0, "s_to": 30}
        ).json()
        values = dict((int(k), v) for k, v in body["values"])
        assert values[0] == 36
        assert values[25] == 30

    def test_recover_spacing_only(self, client):
        s = autocorr_set(noise_seed=0)
        body = client.post(
            "/recover",
            json={
                "set_b64": set_b64_of(s),
                "k": 2,
                "n": 6,
                "shots": 0,
                "s_max": 128,
                "spacing_only": True,
            },
        ).json()
        assert body["outcome"] == "solution"
        assert body["spacing"] == 25

    def test_recover_full_reconstruction(self, client):
        fam = ProgressionFamily(n=4, starts=(5, 45, 85, 125), k=3)
        s = from_progressions(fam, 8)
        body = client.post(
            "/recover",
            json={"set_b64": set_b64_of(s), "k": 3, "n": 4, "shots": 0, "s_max": 120},
        ).json()
        assert body["outcome"] == "solution"
        assert body["spacing"] == 40
        assert body["square"]["magic_sum"] == sum(
            body["square"]["entries"][:4]
        )

    def test_bound(self, client):
        body = client.post("/bound", json={"z": 3, "horizon": 10_000}).json()
        assert (body["t0"], body["U"]) == (2, 27)

    def test_certify(self, client):
        s = MarkedSet.from_indices(6, [1, 5, 9])
        body = client.post("/certify", json={"set_b64": set_b64_of(s), "n": 3}).json()
        assert body["verdict"] == "inconclusive"

    def test_protocol_demo(self, client):
        body = client.post(
            "/protocol-demo",
            json={
                "n": 4,
                "q": 5,
                "k": 1,
                "starts": [1, 5, 9, 13],
                "message_bits": "1011",
                "exact_mode": True,
                "seed": 2,
                "include_transcript": True,
            },
        ).json()
        assert body["ok"] is True
        assert body["bits_match"] is True
        assert body["decoded_bits"] == "1011"
        assert body["reconstruction_matches_secret"] is True
        assert body["transcript_jsonl"].count("\n") == body["frames"]
