import contextlib
import time

import numpy as np
import pytest

from aplmdd.numcore import numeric_grad, relative_error


def check_grads(loss, analytic: dict, arrays: dict, eps=1e-5):
    """Max relative error over every array; ``loss()`` re-reads the arrays."""
    worst = 0.0
    for name, arr in arrays.items():
        num = numeric_grad(loss, arr, eps)
        worst = max(worst, relative_error(analytic[name], num))
    return worst


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# --- acceptance reporting: one PASS/FAIL line per criterion in the terminal summary -----------

def pytest_configure(config):
    config.acceptance_lines = []


def pytest_terminal_summary(terminalreporter, config):
    if config.acceptance_lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(config.acceptance_lines):
            terminalreporter.write_line(line)


@pytest.fixture
def criterion(request):
    """``with criterion(n, title) as c:`` records PASS/FAIL, elapsed time and ``c["detail"]``."""
    @contextlib.contextmanager
    def run(number, title):
        rec = {"detail": ""}
        t0 = time.perf_counter()
        status = "FAIL"
        try:
            yield rec
            status = "PASS"
        except BaseException as e:
            rec["detail"] = rec["detail"] or f"{type(e).__name__}: {str(e).splitlines()[0] if str(e) else ''}"
            raise
        finally:
            line = f"criterion {number} {status}: {title} ({time.perf_counter() - t0:.1f}s) {rec['detail']}".rstrip()
            request.config.acceptance_lines.append(line)
            print(line)
    return run
