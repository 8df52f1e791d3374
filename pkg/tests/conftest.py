import json
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer

import pytest

from fflm.backend import ScoreRequest, synthetic_score


def write_jsonl(path, rows):
    with open(path, "w", encoding="utf-8") as fh:
        for row in rows:
            fh.write(json.dumps(row) + "\n")
    return path


class StubScoreServer:
    """Wire-protocol stub backed by the synthetic scorer.

    ``mode`` selects the reply: ``ok``, ``mismatch`` (one logprob short),
    ``positive`` (a logprob > 0), ``status500``, ``garbage`` (non-JSON body).
    """

    def __init__(self, seed=0):
        self.seed = seed
        self.mode = "ok"
        self.received = []
        self.auth_headers = []
        stub = self

        class Handler(BaseHTTPRequestHandler):
            def log_message(self, *args):
                pass

            def do_POST(self):
                body = json.loads(self.rfile.read(int(self.headers["Content-Length"])))
                stub.received.append((self.path, body))
                stub.auth_headers.append(self.headers.get("Authorization"))
                if stub.mode == "status500":
                    self.send_response(500)
                    self.end_headers()
                    return
                if stub.mode == "garbage":
                    payload = b"not json"
                else:
                    req = ScoreRequest(body["conditioning"], body["target"], body["model"])
                    series = synthetic_score(req, stub.seed)
                    logprobs = list(series.logprobs)
                    if stub.mode == "mismatch":
                        logprobs = logprobs[:-1]
                    elif stub.mode == "positive":
                        logprobs[0] = 0.25
                    payload = json.dumps(
                        {"model": body["model"], "tokens": list(series.tokens), "logprobs": logprobs}
                    ).encode()
                self.send_response(200)
                self.send_header("Content-Type", "application/json")
                self.send_header("Content-Length", str(len(payload)))
                self.end_headers()
                self.wfile.write(payload)

        self.server = ThreadingHTTPServer(("127.0.0.1", 0), Handler)
        self.url = f"http://127.0.0.1:{self.server.server_address[1]}"
        self.thread = threading.Thread(target=self.server.serve_forever, daemon=True)

    def __enter__(self):
        self.thread.start()
        return self

    def __exit__(self, *exc):
        self.server.shutdown()
        self.server.server_close()


@pytest.fixture
def stub_server():
    with StubScoreServer(seed=3) as server:
        yield server


# -- acceptance reporting ------------------------------------------------------------

def pytest_configure(config):
    config.addinivalue_line("markers", "acceptance(name): exit criterion, reported in the summary")
    config._acceptance = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("acceptance")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and not rep.passed):
        item.config._acceptance.append((marker.args[0], rep.passed, rep.duration))


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = getattr(config, "_acceptance", [])
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for name, passed, duration in results:
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'}  {name}  ({duration:.2f}s)")
