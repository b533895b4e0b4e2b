import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from delaybt.bench.generators import gen_stuart_landau
from delaybt.sysmodel import (
    DelaySystem,
    DelayTerm,
    HistorySpec,
    InitialState,
    Kind,
    SignalSpec,
    SystemFormatError,
    load_system,
    make_system,
    save_system,
    validate_system,
)


def small_system(**over):
    kw = dict(
        A=-np.eye(2),
        delays=(DelayTerm(0.1 * np.ones((2, 2)), 0.5),),
        B=np.ones((2, 1)),
        B_in=np.eye(2),
        C=np.ones((1, 2)),
    )
    kw.update(over)
    return DelaySystem(**kw)


def codes(sys):
    return [v.code for v in validate_system(sys)]


def test_valid_system_has_empty_report():
    assert validate_system(small_system()) == []


def test_duplicate_delay():
    sys = small_system(delays=(DelayTerm(np.eye(2), 0.5), DelayTerm(np.eye(2), 0.5)))
    assert "duplicate_delay" in codes(sys)


def test_dimension_mismatch():
    assert "dimension_mismatch" in codes(small_system(B=np.ones((3, 1))))
    assert "dimension_mismatch" in codes(small_system(C=np.ones((1, 3))))
    assert "dimension_mismatch" in codes(small_system(delays=(DelayTerm(np.eye(3), 0.5),)))


@pytest.mark.parametrize("tau", [0.0, -1.0, np.inf, np.nan])
def test_nonpositive_delay(tau):
    assert "nonpositive_delay" in codes(small_system(delays=(DelayTerm(np.eye(2), tau),)))


def test_nonfinite_and_empty():
    A = -np.eye(2)
    A[0, 1] = np.nan
    assert "nonfinite_entry" in codes(small_system(A=A))
    assert "empty_dimension" in codes(small_system(B=np.ones((2, 0))))


def test_validate_is_pure():
    sys = small_system(B=np.ones((3, 1)))
    assert validate_system(sys) == validate_system(sys)


def test_matrices_are_read_only():
    sys = small_system()
    with pytest.raises(ValueError):
        sys.A[0, 0] = 1.0


def test_roundtrip_stuart_landau(tmp_path):
    sys = gen_stuart_landau(50)
    save_system(sys, tmp_path / "sl.json")
    assert load_system(tmp_path / "sl.json") == sys


def test_manifest_layout(tmp_path):
    save_system(small_system(), tmp_path / "s.json")
    man = json.loads((tmp_path / "s.json").read_text())
    assert set(man) >= {"kind", "d", "n", "k", "m", "delays", "files"}
    assert set(man["files"]) == {"A", "B", "B_in", "C"}
    head = (tmp_path / man["files"]["A"]).read_text().splitlines()[0]
    assert head == "%%MatrixMarket matrix array real general"


@settings(max_examples=25, deadline=None)
@given(
    arrays(np.float64, (3, 3), elements=st.floats(-1e300, 1e300, allow_nan=False)),
    st.floats(1e-6, 1e6),
)
def test_roundtrip_bit_exact(tmp_path_factory, M, tau):
    sys = DelaySystem(M, (DelayTerm(M.T, tau),), M[:, :2], M[:, :1], M[:1], Kind.BILINEAR)
    p = tmp_path_factory.mktemp("rt") / "sys.json"
    save_system(sys, p)
    assert load_system(p) == sys


def test_missing_artifact(tmp_path):
    save_system(small_system(), tmp_path / "s.json")
    (tmp_path / "s.N1.mtx").unlink()
    with pytest.raises(SystemFormatError, match="missing artifact"):
        load_system(tmp_path / "s.json")


def test_malformed_manifest(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text("{not json")
    with pytest.raises(SystemFormatError, match="malformed"):
        load_system(p)
    p.write_text(json.dumps({"kind": "DeterministicDelay"}))
    with pytest.raises(SystemFormatError, match="malformed"):
        load_system(p)


def test_dimension_conflict(tmp_path):
    save_system(small_system(), tmp_path / "s.json")
    man = json.loads((tmp_path / "s.json").read_text())
    man["d"] = 3
    (tmp_path / "s.json").write_text(json.dumps(man))
    with pytest.raises(SystemFormatError, match="dimension conflict"):
        load_system(tmp_path / "s.json")


def test_stochastic_two_delays_loads(tmp_path):
    sys = make_system(-np.eye(2), [np.eye(2), 0.5 * np.eye(2)], [0.1, 0.2], np.eye(2), np.eye(2), np.eye(2), Kind.STOCHASTIC)
    save_system(sys, tmp_path / "two.json")
    back = load_system(tmp_path / "two.json")
    assert back.kind is Kind.STOCHASTIC and back.taus == [0.1, 0.2]
    assert validate_system(back) == []


def test_signal_forms():
    t = np.linspace(0, 1, 5)
    assert np.array_equal(SignalSpec.zero(2).evaluate(t), np.zeros((5, 2)))
    np.testing.assert_array_equal(SignalSpec.constant(3.0, 2).evaluate(t), np.full((5, 2), 3.0))
    np.testing.assert_allclose(SignalSpec.parse("sin:20", 3).evaluate(t)[:, 2], np.sin(20 * t))
    assert SignalSpec.parse("sin:20", 1).to_text() == "sin:20"
    with pytest.raises(ValueError):
        SignalSpec.parse("cos:1", 1)
    with pytest.raises(ValueError):
        SignalSpec.sampled([1.0, np.inf])
    with pytest.raises(ValueError):
        SignalSpec.sampled(np.ones(4)).evaluate(t)


def test_history_and_initial_state():
    h = HistorySpec(np.arange(6.0).reshape(3, 2))
    np.testing.assert_array_equal(h.on_grid(2, 2), [[0, 1], [2, 3]])
    with pytest.raises(ValueError):
        h.on_grid(3, 2)
    sys = small_system()
    np.testing.assert_array_equal(InitialState(w=np.array([1.0, 2.0])).resolve(sys), [1.0, 2.0])
    with pytest.raises(ValueError):
        InitialState()
    with pytest.raises(ValueError):
        InitialState(w=np.ones(2), explicit=np.ones(2))


def test_similarity_and_scaling():
    sys = small_system()
    S = np.array([[2.0, 1.0], [0.0, 1.0]])
    t = sys.similarity(S)
    np.testing.assert_allclose(t.C @ t.B, sys.C @ sys.B)
    np.testing.assert_allclose(sys.scale_delays(3.0).Ns[0], 3.0 * sys.Ns[0])
