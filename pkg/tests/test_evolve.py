import numpy as np
import pytest
from scipy.linalg import expm

from oracles import built
from fractal_pqst.evolve import EvolutionError, Propagator, evolve, fidelity_curve, pqst_check
from fractal_pqst.graph import path_graph
from fractal_pqst.jacobi import JacobiMatrix, krawtchouk_chain
from fractal_pqst.lift import LiftedHamiltonian, average, indicator, lift_hamiltonian, norm

CASES = [("hk", l) for l in range(0, 5)] + [("lp", l) for l in range(1, 4)]


def test_time_zero_is_identity():
    _, H = built("hk", 2)
    psi = np.random.default_rng(0).normal(size=H.size)
    assert np.allclose(evolve(H, psi, 0.0), psi, atol=1e-13)


def test_single_edge_swaps_at_pi():
    H = lift_hamiltonian(path_graph(1), krawtchouk_chain(1))
    out = evolve(H, np.array([1.0, 0.0]), np.pi)
    # e^{i pi sigma_x / 2} = i sigma_x
    assert np.allclose(out, [0, 1j], atol=1e-15)


def test_matches_matrix_exponential():
    _, H = built("lp", 2)
    psi = np.random.default_rng(1).normal(size=H.size)
    assert np.allclose(evolve(H, psi, 0.7), expm(0.7j * H.dense) @ psi, atol=1e-11)


def test_backward_time_reverses():
    _, H = built("hk", 3)
    prop = Propagator(H)
    psi = np.random.default_rng(2).normal(size=H.size)
    assert np.allclose(prop(prop(psi, 1.3), -1.3), psi, atol=1e-11)


def test_weighted_norm_is_conserved():
    _, H = built("lp", 2)
    prop = Propagator(H)
    psi = np.random.default_rng(3).normal(size=H.size) + 0j
    n0 = norm(H.graph, psi)
    for t in np.linspace(0, 2 * np.pi, 17):
        assert norm(H.graph, prop(psi, t)) == pytest.approx(n0, abs=1e-12)


@pytest.mark.parametrize("family,level", [("hk", 3), ("lp", 2)])
def test_evolution_commutes_with_averaging(family, level):
    _, H = built(family, level)
    g = H.graph
    psi = np.random.default_rng(4).normal(size=H.size)
    chain = expm(0.9j * H.source.to_dense())
    assert np.allclose(average(g, evolve(H, psi, 0.9)), chain @ average(g, psi), atol=1e-11)


@pytest.mark.parametrize("family,level", CASES)
def test_perfect_transfer_at_pi(family, level):
    _, H = built(family, level)
    rep = pqst_check(H, np.pi)
    assert rep.fidelity >= 1 - 1e-10
    assert rep.reverse_fidelity >= 1 - 1e-10
    assert rep.leakage <= 2e-10
    assert rep.norm_drift <= 1e-10


@pytest.mark.parametrize("family,level", [("hk", 2), ("lp", 2)])
def test_graph_fidelity_equals_chain_fidelity(family, level):
    _, H = built(family, level)
    N = H.source.N
    U = expm(1.1j * H.source.to_dense())
    assert pqst_check(H, 1.1).fidelity == pytest.approx(abs(U[N, 0]), abs=1e-12)


def test_no_transfer_at_time_zero():
    _, H = built("hk", 2)
    assert pqst_check(H, 0.0).fidelity <= 1e-12


def test_fidelity_curve_forward_reverse_agree():
    _, H = built("hk", 2)
    curve = fidelity_curve(H, np.linspace(0, 2 * np.pi, 9))
    assert len(curve) == 9
    for rep in curve:
        assert rep.fidelity == pytest.approx(rep.reverse_fidelity, abs=1e-12)
    assert curve[4].fidelity == pytest.approx(1.0, abs=1e-12)


def test_fidelity_curve_rejects_bad_grids():
    _, H = built("hk", 1)
    with pytest.raises(EvolutionError):
        fidelity_curve(H, [])
    with pytest.raises(EvolutionError):
        fidelity_curve(H, [1.0, 0.5])


def test_budget_and_self_adjointness():
    _, H = built("hk", 3)
    with pytest.raises(EvolutionError, match="budget"):
        Propagator(H, budget=5)
    bad = LiftedHamiltonian(H.graph, H.source, H.matrix + 0.1 * (H.matrix != 0).multiply(
        np.triu(np.ones(H.matrix.shape))))
    with pytest.raises(EvolutionError, match="self-adjoint"):
        Propagator(bad)


def test_state_shape_checked():
    _, H = built("hk", 1)
    with pytest.raises(EvolutionError):
        Propagator(H)(np.ones(3), 1.0)


def test_non_krawtchouk_chain_fails_transfer():
    H = lift_hamiltonian(path_graph(3), JacobiMatrix(np.zeros(4), np.ones(3)))
    assert pqst_check(H, np.pi).fidelity < 0.99
    assert indicator(H.graph, 3).tolist() == [0, 0, 0, 1]
