import threading

import pytest

from embed_service.app import make_server

from service_acceptance_log import SERVICE_ACCEPTANCE


def _spawn(**kwargs):
    server = make_server(port=0, **kwargs)
    thread = threading.Thread(target=server.serve_forever, daemon=True)
    thread.start()
    return server, thread


@pytest.fixture(scope="session")
def live_endpoint():
    server, thread = _spawn()
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


@pytest.fixture(scope="session")
def unloaded_endpoint():
    server, thread = _spawn(loaded=False)
    yield f"http://127.0.0.1:{server.server_address[1]}"
    server.shutdown()
    server.server_close()
    thread.join(timeout=5)


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not SERVICE_ACCEPTANCE:
        return
    terminalreporter.section("service acceptance")
    for label, ok, detail in SERVICE_ACCEPTANCE:
        status = "PASS" if ok else "FAIL"
        terminalreporter.write_line(f"{status}  {label}  ({detail})")
