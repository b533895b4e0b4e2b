import re

import numpy as np
import pytest

from delaybt.sysmodel import DelaySystem, DelayTerm, Kind


def random_system(rng, d, n=2, k=1, m=2, q=0.5, taus=(0.1,), omega=1.0, kind=Kind.DETERMINISTIC):
    """Random system whose logarithmic norm is exactly -omega.

    The delay matrices are scaled so that sum ||N_i|| / sqrt(2 omega) = q,
    which makes q the contraction number for the rigorous envelope M = 1.
    """
    G = rng.standard_normal((d, d)) / np.sqrt(d)
    mu = np.linalg.eigvalsh(0.5 * (G + G.T))[-1]
    A = G - (mu + omega) * np.eye(d)
    Ns = [rng.standard_normal((d, d)) for _ in taus]
    total = sum(np.linalg.norm(N, 2) for N in Ns)
    scale = q * np.sqrt(2 * omega) / total if total > 0 else 0.0
    delays = tuple(DelayTerm(scale * N, t) for N, t in zip(Ns, taus))
    B = rng.standard_normal((d, n))
    B_in = rng.standard_normal((d, k))
    C = rng.standard_normal((m, d))
    return DelaySystem(A, delays, B, B_in, C, kind)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    """One PASS/FAIL line per acceptance criterion."""
    results = {}
    for outcome in ("passed", "failed", "error"):
        for rep in terminalreporter.stats.get(outcome, []):
            nodeid = getattr(rep, "nodeid", "")
            m = re.search(r"test_acceptance\.py::test_criterion_(\d+)_(\w+)", nodeid)
            if not m or getattr(rep, "when", "call") not in ("call", "setup"):
                continue
            key = int(m.group(1))
            ok = outcome == "passed"
            prev = results.get(key)
            results[key] = (m.group(2), ok and (prev is None or prev[1]))
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results):
        name, ok = results[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  ({name})")
