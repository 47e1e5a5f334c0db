from __future__ import annotations

import socket
import threading
import time
from types import SimpleNamespace

import pytest
import uvicorn

from casefs.casefile import CaseFile, create_case_file
from casefs.repo import ContentStream, Repository
from casefs.wire import create_app

# criterion number -> (description, passed, detail); filled by test_acceptance
ACCEPTANCE_RESULTS: dict[int, tuple[str, bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_RESULTS):
        title, passed, detail = ACCEPTANCE_RESULTS[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {title}  ({detail})")


@pytest.fixture
def repo():
    with Repository() as r:
        yield r


def build_figure(repo) -> SimpleNamespace:
    """Case "project XX" with Data A, Incoming documents/{picture B, document C} and C -> B."""
    handle = create_case_file(repo, "project XX")
    cf = CaseFile(repo, handle)
    data_a = cf.create_document_item("Data A", properties={"cmis:description": "structured record"})
    incoming = cf.create_folder_item("Incoming documents")
    picture_b = cf.create_document_item(
        "picture B", parent_item=incoming, content=ContentStream.of(b"\x89PNG fake", "image/png")
    )
    document_c = cf.create_document_item(
        "document C", parent_item=incoming, content=ContentStream.of(b"%PDF fake", "application/pdf")
    )
    rel = cf.create_relationship_item("C refers to B", document_c, picture_b)
    return SimpleNamespace(
        repo=repo, handle=handle, cf=cf, data_a=data_a, incoming=incoming,
        picture_b=picture_b, document_c=document_c, rel=rel,
    )


@pytest.fixture
def figure(repo):
    return build_figure(repo)


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="session")
def live_server():
    """A real uvicorn server in a thread; tests swap ``app.state.repo`` as needed."""
    app = create_app(Repository())
    port = _free_port()
    server = uvicorn.Server(uvicorn.Config(app, host="127.0.0.1", port=port, log_level="warning"))
    thread = threading.Thread(target=server.run, daemon=True)
    thread.start()
    deadline = time.monotonic() + 10
    while not server.started:
        if time.monotonic() > deadline:
            raise RuntimeError("server did not start")
        time.sleep(0.02)
    yield SimpleNamespace(app=app, url=f"http://127.0.0.1:{port}")
    server.should_exit = True
    thread.join(timeout=5)
