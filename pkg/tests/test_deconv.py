import numpy as np
import pytest

from lrpr.deconv import (
    DECONV_LAMBDA,
    SubspaceModel,
    build_structured_ensemble,
    forward_conv_magnitudes,
    lifted_measurements,
    random_subspace_model,
    recover_signals,
    signal_from_json,
    signal_to_json,
)
from lrpr.metrics import vec_sin_angle
from lrpr.model import measure
from lrpr.numlin import dft_matrix
from lrpr.rng import RngSpec, complex_normal
from lrpr.solver import SolverConfig, Status

from conftest import unit


def test_identity_subspaces_give_dft_rows():
    M = 6
    sm = SubspaceModel(np.eye(M), np.eye(M))
    ens = build_structured_ensemble(sm)
    F = dft_matrix(M)
    assert np.allclose(ens.a, np.conj(F))
    assert np.allclose(np.linalg.norm(ens.a, axis=1), 1)
    assert (ens.d1, ens.d2, ens.M) == (M, M, M)


def test_index_bookkeeping():
    sm = SubspaceModel(np.eye(4)[:, :2], np.eye(4)[:, :3])
    ens = build_structured_ensemble(sm)
    F = dft_matrix(4)
    for m in range(4):
        assert np.allclose(ens.a[m], np.conj(F[m, 0:2]))
    assert ens.shape == (2, 3)


def test_subspace_model_validation():
    with pytest.raises(ValueError):
        SubspaceModel(np.ones((4, 2)), np.ones((5, 2)))


def test_forward_matches_lifted(gen):
    sm = random_subspace_model(32, 3, 4, RngSpec(1))
    u = complex_normal(gen, (3,))
    v = complex_normal(gen, (4,))
    assert np.all(forward_conv_magnitudes(sm, np.zeros(3), v) == 0)
    f = forward_conv_magnitudes(sm, u, v)
    lifted = measure(build_structured_ensemble(sm), np.outer(u, v.conj())).clean
    assert np.linalg.norm(f - sm.M * lifted) <= 1e-10 * np.linalg.norm(f)
    assert np.allclose(lifted, lifted_measurements(sm, u, v))
    assert np.allclose(forward_conv_magnitudes(sm, np.exp(0.9j) * u, v), f, rtol=1e-12)


def _problem(t, M=256, d=8):
    spec = RngSpec(300, t)
    sm = random_subspace_model(M, d, d, spec.derive("sub"))
    g = spec.derive("sig").generator()
    u = unit(complex_normal(g, (d,)))
    v = unit(complex_normal(g, (d,)))
    return sm, u, v


def test_recovery_pilot_regime():
    hits = 0
    for t in range(10):
        sm, u, v = _problem(t)
        uh, vh, _, rep = recover_signals(sm, lifted_measurements(sm, u, v))
        hits += max(vec_sin_angle(uh, u), vec_sin_angle(vh, v)) <= 1e-3
    assert hits >= 7


def test_recovery_homogeneity():
    sm, u, v = _problem(1)
    y = lifted_measurements(sm, u, v)
    cfg = SolverConfig(lam=DECONV_LAMBDA)
    u1, v1, s1, _ = recover_signals(sm, y, cfg)
    u2, v2, s2, _ = recover_signals(sm, 4.0 * y, cfg)
    assert s2 == pytest.approx(2.0 * s1, rel=1e-4)
    assert vec_sin_angle(u1, u2) <= 1e-4 and vec_sin_angle(v1, v2) <= 1e-4


def test_zero_measurements():
    sm = random_subspace_model(16, 2, 2, RngSpec(0))
    u, v, s, rep = recover_signals(sm, np.zeros(16))
    assert u is None and v is None and s == 0
    assert rep.status is Status.CONVERGED and not np.any(rep.Xhat)
    with pytest.raises(ValueError):
        recover_signals(sm, np.zeros(5))


def test_signal_json_roundtrip(gen):
    x = complex_normal(gen, (5,))
    assert np.array_equal(signal_from_json(signal_to_json(x)), x)
    with pytest.raises(ValueError):
        signal_from_json([[1.0, 2.0, 3.0]])
