"""Shared fixtures: a live scoring service populated from the golden corpus.

The SDK under test only ever sees the HTTP surface; these fixtures use the
service package to host that surface in-process on a real socket.
"""

import sys
import threading
import time
from pathlib import Path

import pytest
import uvicorn

sys.path.insert(0, str(Path(__file__).resolve().parents[2] / "tests"))

from golden_corpus import build_corpus  # noqa: E402
from rolereward import curation  # noqa: E402
from rolereward.judge import backend_config_from_file, client_from_config  # noqa: E402
from rolereward.records import SpecStore, curated_to_json, read_jsonl, sample_from_json, write_jsonl  # noqa: E402
from rolereward.rewards import default_scoring_config  # noqa: E402
from rolereward.service import ServiceSettings, create_app  # noqa: E402


@pytest.fixture(scope="session")
def corpus(tmp_path_factory):
    return build_corpus(tmp_path_factory.mktemp("corpus"))


@pytest.fixture(scope="session")
def spec_rows(corpus):
    """Curate the corpus through both pipelines; accepted records become the
    service's spec file."""
    judge = client_from_config(backend_config_from_file(corpus["backend"]))
    rows = []
    for pipeline, input_key in ((curation.stv_curate, "stv_input"), (curation.mtdp_curate, "mtdp_input")):
        for number, obj in read_jsonl(corpus[input_key]):
            result = pipeline(sample_from_json(obj, number), judge)
            if isinstance(result, curation.CuratedRecord):
                rows.append(curated_to_json(result))
    return rows


@pytest.fixture(scope="session")
def service_url(spec_rows, tmp_path_factory):
    path = tmp_path_factory.mktemp("service") / "specs.jsonl"
    write_jsonl(path, spec_rows)
    settings = ServiceSettings(spec_store=SpecStore(path), scoring=default_scoring_config())
    app = create_app(settings)

    config = uvicorn.Config(app, host="127.0.0.1", port=0, log_level="warning")
    server = uvicorn.Server(config)
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.time() + 10
    while not server.started:
        if time.time() > deadline:
            raise RuntimeError("service did not start within 10s")
        time.sleep(0.01)
    port = server.servers[0].sockets[0].getsockname()[1]
    yield f"http://127.0.0.1:{port}"
    server.should_exit = True
    thread.join(timeout=5)
