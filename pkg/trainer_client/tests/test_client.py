"""SDK behavior against the live service and against scripted transports."""

import concurrent.futures
import json
import socket

import httpx
import pytest

from rolereward_client import (
    AdvantageVector,
    ClientConfig,
    ResponseSchemaError,
    ScoreBreakdown,
    ServiceError,
    TrainerClient,
    TransportError,
    ValidationError,
    advantages,
    score_batch,
)

OPEN, CLOSE = "<think>", "</think>"


def canonical(obj) -> bytes:
    return json.dumps(obj, ensure_ascii=False, sort_keys=True, separators=(",", ":")).encode("utf-8")


def breakdown_to_json(result: ScoreBreakdown) -> dict:
    return {
        "spec_id": result.spec_id,
        "total": result.total,
        "breakdown": {"accuracy": result.accuracy, "format": result.format},
    }


def vector_to_json(vector: AdvantageVector) -> dict:
    return {"prompt_id": vector.prompt_id, "advantages": list(vector.advantages), "degenerate": vector.degenerate}


def corpus_pairs(spec_rows):
    """One hit and one miss per curated spec, well-formed think/answer text."""
    pairs = []
    for row in spec_rows:
        needle = row.get("keyword") or row["expression"].split('"')[1]
        pairs.append((row["id"], f"{OPEN}这件事我记得清楚{CLOSE}自然是{needle}了"))
        pairs.append((row["id"], f"{OPEN}一时想不起来{CLOSE}这个我说不好"))
    return pairs


@pytest.fixture(scope="module")
def config(service_url):
    return ClientConfig(base_url=service_url, timeout=10.0, max_retries=2)


@pytest.fixture(scope="module")
def client(config):
    with TrainerClient(config) as handle:
        yield handle


@pytest.fixture()
def report(capsys):
    def _report(name: str, ok: bool, detail: str = ""):
        with capsys.disabled():
            suffix = f" - {detail}" if detail else ""
            print(f"[acceptance] {'PASS' if ok else 'FAIL'}: {name}{suffix}", flush=True)
        assert ok, name

    return _report


class TestScoreBatchRoundTrip:
    def test_equals_raw_endpoint_on_golden_corpus(self, report, client, config, spec_rows):
        pairs = corpus_pairs(spec_rows)
        results = client.score_batch(pairs)

        raw_requests = [{"spec_id": spec_id, "response": text} for spec_id, text in pairs]
        raw = httpx.post(f"{config.base_url}/v1/score_batch", json=raw_requests, timeout=10.0)
        ok = raw.status_code == 200 and canonical([breakdown_to_json(r) for r in results]) == canonical(raw.json())
        report(
            "SDK score_batch equals the raw endpoint byte-for-byte after canonicalization",
            ok,
            f"{len(pairs)} golden-corpus rollouts",
        )

    def test_three_pairs_come_back_in_order(self, client, spec_rows):
        ids = [row["id"] for row in spec_rows[:3]]
        pairs = [(spec_id, f"{OPEN}想想{CLOSE}不知道") for spec_id in ids]
        results = client.score_batch(pairs)
        assert [r.spec_id for r in results] == ids

    def test_inline_spec_objects_are_accepted(self, client):
        results = client.score_batch(
            [({"id": "adhoc", "type": "STV", "keyword": "钥匙"}, f"{OPEN}在老地方{CLOSE}钥匙在抽屉里")]
        )
        assert results[0].accuracy == 1 and results[0].format == 1 and results[0].total == 2.0

    def test_unknown_spec_id_surfaces_service_error(self, client):
        with pytest.raises(ServiceError) as excinfo:
            client.score_batch([("ghost-spec", "text")])
        assert excinfo.value.status == 404
        assert excinfo.value.code == "unknown_spec"
        assert excinfo.value.message

    def test_malformed_pair_rejected_locally(self, client):
        with pytest.raises(ValidationError, match="pair 0"):
            client.score_batch([(42, "text")])

    def test_shared_handle_is_thread_safe(self, client, spec_rows):
        pairs = corpus_pairs(spec_rows)
        serial = client.score_batch(pairs)
        with concurrent.futures.ThreadPoolExecutor(max_workers=8) as pool:
            futures = [pool.submit(client.score_batch, pairs) for _ in range(8)]
            assert all(future.result() == serial for future in futures)

    def test_one_shot_helper_matches_handle(self, client, config, spec_rows):
        pairs = corpus_pairs(spec_rows)[:4]
        assert score_batch(config, pairs) == client.score_batch(pairs)


class TestAdvantagesRoundTrip:
    def _groups_from_corpus(self, client, spec_rows):
        """Reward groups derived from scoring golden-corpus rollouts."""
        groups = []
        for row in spec_rows[:5]:
            pairs = [(row["id"], f"{OPEN}想想{CLOSE}答案{i}") for i in range(4)]
            totals = [r.total for r in client.score_batch(pairs)]
            groups.append((row["id"], totals))
        return groups

    def test_equals_raw_endpoint_on_golden_corpus(self, report, client, config, spec_rows):
        groups = self._groups_from_corpus(client, spec_rows)
        results = client.advantages(groups)

        raw_bodies = []
        for prompt_id, rewards in groups:
            raw = httpx.post(
                f"{config.base_url}/v1/advantages",
                json={"prompt_id": prompt_id, "rewards": rewards},
                timeout=10.0,
            )
            assert raw.status_code == 200
            raw_bodies.append(raw.json())
        report(
            "SDK advantages equal the raw endpoint byte-for-byte after canonicalization",
            canonical([vector_to_json(v) for v in results]) == canonical(raw_bodies),
            f"{len(groups)} reward groups from golden-corpus scores",
        )

    def test_constant_group_yields_zeros(self, client):
        vectors = client.advantages([("flat", [1.0, 1.0, 1.0])])
        assert vectors[0].degenerate is True
        assert vectors[0].advantages == (0.0, 0.0, 0.0)

    def test_two_groups_come_back_in_order(self, client):
        vectors = client.advantages([("g1", [0.0, 1.0, 2.0]), ("g2", [5.0, 5.0, 8.0])])
        assert [v.prompt_id for v in vectors] == ["g1", "g2"]
        assert len(vectors[0].advantages) == 3

    def test_mapping_input_preserves_order(self, client):
        vectors = client.advantages({"g2": [1.0, 2.0], "g1": [3.0, 4.0]})
        assert [v.prompt_id for v in vectors] == ["g2", "g1"]

    def test_mismatched_group_sizes_rejected_before_sending(self):
        config = ClientConfig(base_url="http://127.0.0.1:1")  # nothing listens here
        with TrainerClient(config) as client:
            with pytest.raises(ValidationError, match="expected 3"):
                client.advantages([("g1", [1.0, 2.0, 3.0]), ("g2", [1.0, 2.0])])

    def test_explicit_group_size_is_enforced_locally(self):
        config = ClientConfig(base_url="http://127.0.0.1:1")
        with TrainerClient(config) as client:
            with pytest.raises(ValidationError, match="expected 7"):
                client.advantages([("g1", [1.0, 2.0, 3.0])], group_size=7)

    def test_single_reward_groups_rejected_locally(self):
        config = ClientConfig(base_url="http://127.0.0.1:1")
        with TrainerClient(config) as client:
            with pytest.raises(ValidationError, match="at least 2"):
                client.advantages([("g1", [1.0])])

    def test_one_shot_helper_matches_handle(self, client, config):
        groups = [("g1", [0.0, 1.0, 2.0])]
        assert advantages(config, groups) == client.advantages(groups)


class TestRetriesAndTransport:
    def _client(self, handler, max_retries=2):
        calls = []
        sleeps = []

        def transport_handler(request):
            calls.append(request)
            return handler(request, len(calls))

        client = TrainerClient(
            ClientConfig(base_url="http://service.test", max_retries=max_retries, backoff_base=0.1),
            transport=httpx.MockTransport(transport_handler),
            sleep=sleeps.append,
        )
        return client, calls, sleeps

    def test_service_down_raises_transport_error_after_retries(self):
        def handler(request, count):
            raise httpx.ConnectError("connection refused", request=request)

        client, calls, sleeps = self._client(handler, max_retries=2)
        with pytest.raises(TransportError, match="after 3 attempts"):
            client.score_batch([("spec", "text")])
        assert len(calls) == 3
        assert sleeps == [0.1, 0.2]  # exponential backoff between attempts

    def test_5xx_is_retried_then_surfaced_as_transport_error(self):
        def handler(request, count):
            return httpx.Response(503, json={"code": "unavailable", "message": "down"})

        client, calls, _ = self._client(handler, max_retries=1)
        with pytest.raises(TransportError, match="HTTP 503"):
            client.score_batch([("spec", "text")])
        assert len(calls) == 2

    def test_429_is_retried(self):
        def handler(request, count):
            return httpx.Response(429, json={"code": "throttled", "message": "slow down"})

        client, calls, _ = self._client(handler, max_retries=1)
        with pytest.raises(TransportError):
            client.score_batch([("spec", "text")])
        assert len(calls) == 2

    def test_recovers_when_a_retry_succeeds(self):
        def handler(request, count):
            if count < 3:
                raise httpx.ConnectError("flaky", request=request)
            return httpx.Response(
                200, json=[{"spec_id": "spec", "total": 1.0, "breakdown": {"accuracy": 1, "format": 0}}]
            )

        client, calls, _ = self._client(handler, max_retries=2)
        results = client.score_batch([("spec", "text")])
        assert results == [ScoreBreakdown(spec_id="spec", total=1.0, accuracy=1, format=0)]
        assert len(calls) == 3

    def test_4xx_is_not_retried(self):
        def handler(request, count):
            return httpx.Response(400, json={"code": "malformed_request", "message": "bad"})

        client, calls, _ = self._client(handler, max_retries=3)
        with pytest.raises(ServiceError) as excinfo:
            client.score_batch([("spec", "text")])
        assert len(calls) == 1
        assert excinfo.value.code == "malformed_request"

    def test_local_validation_sends_nothing(self):
        def handler(request, count):
            return httpx.Response(200, json=[])

        client, calls, _ = self._client(handler)
        with pytest.raises(ValidationError):
            client.advantages([("g1", [1.0, 2.0]), ("g2", [1.0])])
        assert calls == []

    def test_wrong_shape_body_raises_schema_error(self):
        def handler(request, count):
            return httpx.Response(200, json={"unexpected": "shape"})

        client, calls, _ = self._client(handler)
        with pytest.raises(ResponseSchemaError, match="expected a list"):
            client.score_batch([("spec", "text")])

    def test_short_result_list_raises_schema_error(self):
        def handler(request, count):
            return httpx.Response(200, json=[])

        client, calls, _ = self._client(handler)
        with pytest.raises(ResponseSchemaError, match="received 0 results"):
            client.score_batch([("spec", "text")])

    def test_non_json_body_raises_schema_error(self):
        def handler(request, count):
            return httpx.Response(200, text="<html>proxy error</html>")

        client, calls, _ = self._client(handler)
        with pytest.raises(ResponseSchemaError, match="non-JSON"):
            client.score_batch([("spec", "text")])


class TestClientConfig:
    def test_zero_timeout_rejected(self):
        with pytest.raises(ValidationError, match="timeout"):
            ClientConfig(base_url="http://x", timeout=0)

    def test_negative_retries_rejected(self):
        with pytest.raises(ValidationError, match="max_retries"):
            ClientConfig(base_url="http://x", max_retries=-1)

    def test_empty_base_url_rejected(self):
        with pytest.raises(ValidationError, match="base_url"):
            ClientConfig(base_url="")


def test_health_reports_spec_count(client, spec_rows):
    body = client.health()
    assert body["status"] == "ok"
    assert body["spec_count"] == len(spec_rows)


def test_real_socket_connection_refused_is_transport_error():
    probe = socket.socket()
    probe.bind(("127.0.0.1", 0))
    port = probe.getsockname()[1]
    probe.close()  # nothing listens on this port anymore
    config = ClientConfig(base_url=f"http://127.0.0.1:{port}", max_retries=1, backoff_base=0.0)
    with TrainerClient(config) as client:
        with pytest.raises(TransportError, match="after 2 attempts"):
            client.score_batch([("spec", "text")])
