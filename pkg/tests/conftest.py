import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

_RESULTS = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(n): acceptance criterion number")
    config.addinivalue_line("markers", "slow: takes more than a few seconds")


@pytest.fixture
def verdict(request):
    """Detail text a criterion test attaches to its pass/fail line."""
    lines = []
    request.node._verdict = lines
    return lines.append


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("criterion")
    if mark is None:
        return
    n = mark.args[0]
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        detail = "; ".join(getattr(item, "_verdict", []))
        _RESULTS[n] = ("PASS" if rep.passed else "FAIL", detail)


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_RESULTS):
        status, detail = _RESULTS[n]
        terminalreporter.write_line(f"criterion {n:2d}: {status}  {detail}")


# --- shared synthetic campaigns ------------------------------------------------

def _campaign(tmp_path_factory, quantize):
    import time

    from hybridcrane import io
    from hybridcrane.estimation.pipeline import run_pipeline
    from hybridcrane.reference import lab_params
    from hybridcrane.synth import synthesize_dataset

    truth = lab_params()
    start = time.perf_counter()
    records, rows, extra = synthesize_dataset(truth, seed=0, quantize=quantize)
    synth_s = time.perf_counter() - start
    d = tmp_path_factory.mktemp("quantized" if quantize else "noiseless")
    io.write_dataset(d, records, rows, extra)
    records, rows, manifest = io.read_dataset(d)
    start = time.perf_counter()
    result = run_pipeline(records, rows, known=manifest["known"])
    return {"truth": truth, "dir": d, "records": records, "rows": rows, "manifest": manifest,
            "result": result, "seconds": synth_s + time.perf_counter() - start}


@pytest.fixture(scope="session")
def noiseless_campaign(tmp_path_factory):
    return _campaign(tmp_path_factory, quantize=False)


@pytest.fixture(scope="session")
def quantized_campaign(tmp_path_factory):
    return _campaign(tmp_path_factory, quantize=True)
