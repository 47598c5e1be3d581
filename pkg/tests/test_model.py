import numpy as np
import pytest

from lrpr.model import (
    Ensemble,
    EnsembleKind,
    Observations,
    adjoint_map,
    forward_map,
    make_noise,
    measure,
    noise_budget,
    opnorm_estimate,
    sample_gaussian_iid,
    sample_rank1_complex,
)
from lrpr.rng import RngSpec, complex_normal

from conftest import random_rank1


def test_gaussian_ensemble_moments_and_determinism():
    ens = sample_gaussian_iid(10, 10, 10_000, RngSpec(1))
    assert abs(ens.phis.mean()) <= 0.01
    assert abs(ens.phis.var() - 1) <= 0.02
    again = sample_gaussian_iid(10, 10, 10_000, RngSpec(1))
    assert np.array_equal(ens.phis, again.phis)
    assert ens.is_real and not np.iscomplexobj(ens.phis)


def test_rank1_ensemble_moments_and_determinism():
    ens = sample_rank1_complex(50, 50, 10_000, RngSpec(2))
    a = np.abs(ens.a) ** 2
    assert abs(a.mean() - 1) <= 0.01
    assert abs((a**2).mean() - 2) <= 0.05
    again = sample_rank1_complex(50, 50, 10_000, RngSpec(2))
    assert np.array_equal(ens.a, again.a) and np.array_equal(ens.b, again.b)


def test_ensemble_validation():
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.GAUSSIAN_IID, 2, 2, 0, phis=np.zeros((0, 2, 2)))
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.GAUSSIAN_IID, 2, 2, 1, phis=np.full((1, 2, 2), np.inf))
    with pytest.raises(ValueError):
        Ensemble(EnsembleKind.GAUSSIAN_IID, 2, 2, 1, phis=1j * np.ones((1, 2, 2)))
    ens = sample_gaussian_iid(2, 2, 3, RngSpec(0))
    with pytest.raises(ValueError):
        ens.phis[0, 0, 0] = 1.0


@pytest.mark.parametrize("sampler", [sample_gaussian_iid, sample_rank1_complex])
def test_forward_map_linear_and_zero(sampler, gen):
    ens = sampler(4, 3, 20, RngSpec(5))
    X = complex_normal(gen, (4, 3))
    Y = complex_normal(gen, (4, 3))
    assert np.all(forward_map(ens, np.zeros((4, 3))) == 0)
    assert np.allclose(forward_map(ens, X + Y), forward_map(ens, X) + forward_map(ens, Y),
                       atol=1e-12)
    # trace definition, materialized
    z = np.array([np.trace(ens.matrix(m).conj().T @ X) for m in range(ens.M)])
    assert np.allclose(forward_map(ens, X), z, atol=1e-12)


def test_forward_map_rank1_factorization(gen):
    ens = sample_rank1_complex(5, 4, 30, RngSpec(9))
    u, v, X = random_rank1(gen, 5, 4)
    z = (ens.a.conj() @ u) * (ens.b @ v.conj())
    assert np.allclose(forward_map(ens, X), z, atol=1e-12)
    y = measure(ens, X).y
    assert np.allclose(y, np.abs(ens.a.conj() @ u) ** 2 * np.abs(ens.b @ v.conj()) ** 2,
                       atol=1e-12)


@pytest.mark.parametrize("sampler", [sample_gaussian_iid, sample_rank1_complex])
def test_adjoint(sampler, gen):
    ens = sampler(4, 3, 20, RngSpec(6))
    assert np.all(adjoint_map(ens, np.zeros(20)) == 0)
    assert np.allclose(adjoint_map(ens, np.eye(20)[0]), ens.matrix(0))
    X = complex_normal(gen, (4, 3))
    z = complex_normal(gen, (20,))
    lhs = np.vdot(forward_map(ens, X), z)
    rhs = np.vdot(X, adjoint_map(ens, z))
    scale = np.linalg.norm(X) * np.linalg.norm(z) * np.sqrt(ens.M * 12)
    assert abs(lhs - rhs) <= 1e-10 * scale


def test_transpose_measures_transpose(gen):
    for ens in (sample_gaussian_iid(4, 3, 10, RngSpec(1)), sample_rank1_complex(4, 3, 10, RngSpec(1))):
        X = complex_normal(gen, (4, 3)) if not ens.is_real else gen.standard_normal((4, 3))
        assert np.allclose(forward_map(ens.transpose(), X.T), forward_map(ens, X))


def test_measure_properties(gen):
    ens = sample_rank1_complex(3, 3, 15, RngSpec(4))
    xi = gen.standard_normal(15)
    obs = measure(ens, np.zeros((3, 3)), xi)
    assert np.array_equal(obs.y, xi)
    X = complex_normal(gen, (3, 3))
    c = 0.3 - 1.2j
    assert np.allclose(measure(ens, c * X).clean, abs(c) ** 2 * measure(ens, X).clean)
    obs = measure(ens, X, xi)
    assert np.allclose(obs.y, obs.clean + obs.xi) and np.all(obs.clean >= 0)


def test_observations_roundtrip():
    obs = Observations([1.0, 2.0], [0.1, -0.1], [0.9, 2.1], meta={"k": 1})
    back = Observations.from_dict(obs.to_dict())
    assert np.array_equal(back.y, obs.y) and np.array_equal(back.xi, obs.xi)
    with pytest.raises(ValueError):
        Observations([1.0, np.nan])


def test_ensemble_roundtrip():
    for ens in (sample_gaussian_iid(2, 3, 4, RngSpec(1)), sample_rank1_complex(2, 3, 4, RngSpec(1))):
        back = Ensemble.from_dict(ens.to_dict())
        assert back.kind is ens.kind and back.seed == ens.seed
        X = np.ones((2, 3))
        assert np.array_equal(forward_map(back, X), forward_map(ens, X))


def test_opnorm_single_measurement(gen):
    phi = gen.standard_normal((1, 3, 4))
    ens = Ensemble(EnsembleKind.GAUSSIAN_IID, 3, 4, 1, phis=phi)
    est = opnorm_estimate(ens, 50, RngSpec(0))
    assert est == pytest.approx(np.linalg.norm(phi), rel=0.01)


def test_opnorm_zero_and_monotone():
    ens = Ensemble(EnsembleKind.GAUSSIAN_IID, 2, 2, 3, phis=np.zeros((3, 2, 2)))
    assert opnorm_estimate(ens, 10, RngSpec(0)) == 0
    ens = sample_rank1_complex(6, 6, 40, RngSpec(3))
    ests = [opnorm_estimate(ens, k, RngSpec(0)) for k in (1, 2, 5, 20, 50)]
    assert all(b >= a - 1e-12 for a, b in zip(ests, ests[1:]))
    # never above the exact norm
    A = np.stack([ens.matrix(m).conj().ravel() for m in range(40)])
    assert ests[-1] <= np.linalg.norm(A, 2) * (1 + 1e-12)


def test_noise_and_budget():
    assert np.all(make_noise("zero", 4, 0) == 0)
    assert np.all(make_noise("constant", 4, 0, level=-1.0) == -1.0)
    u = make_noise("uniform", 1000, 3, low=0.0, high=2.0)
    assert u.min() >= 0 and u.max() <= 2
    assert np.array_equal(make_noise("gaussian", 5, 1, 1.0), make_noise("gaussian", 5, 1, 1.0))
    with pytest.raises(ValueError):
        make_noise("laplace", 3, 0)
    assert noise_budget([-1.0, 1.0, -3.0, 0.0]) == pytest.approx(1.0)
    assert noise_budget([1.0], eps=0.5) == pytest.approx(0.5)
