import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from oracles import krawtchouk_couplings, load_rows
from fractal_pqst.jacobi import (
    JacobiError,
    JacobiMatrix,
    dirichlet_restriction,
    eigenvector_from_recurrence,
    jacobi_spectrum,
    krawtchouk_chain,
    recurrence_polynomials,
    segment,
)

S6 = np.sqrt(6) / 2


@st.composite
def jacobi_matrices(draw, max_n=12, min_coupling=0.05):
    n = draw(st.integers(1, max_n))
    B = draw(st.lists(st.floats(-3, 3), min_size=n + 1, max_size=n + 1))
    J = draw(st.lists(st.floats(min_coupling, 3), min_size=n, max_size=n))
    return JacobiMatrix(np.array(B), np.array(J))


def _newton_step(jac, z):
    """``p_{N+1}(z) / p'_{N+1}(z)`` via the differentiated recurrence."""
    p = recurrence_polynomials(jac, z)
    d = np.zeros_like(p)
    d[1] = 1.0
    for k in range(2, len(p)):
        d[k] = p[k - 1] + (z - jac.B[k - 1]) * d[k - 1] - jac.J[k - 2] ** 2 * d[k - 2]
    return p[-1] / d[-1]


def test_krawtchouk_small_cases():
    assert np.allclose(krawtchouk_chain(4).J, [1, S6, S6, 1], atol=1e-15)
    assert np.all(krawtchouk_chain(4).B == 0)
    assert krawtchouk_chain(1).J.tolist() == [0.5]
    with pytest.raises(JacobiError):
        krawtchouk_chain(0)


@pytest.mark.parametrize("N", [1, 2, 4, 7, 16, 64, 256])
def test_krawtchouk_spectrum_is_equally_spaced(N):
    jac = krawtchouk_chain(N)
    assert np.allclose(jac.J, krawtchouk_couplings(N), rtol=0, atol=1e-12)
    assert np.array_equal(jac.J, jac.J[::-1])
    assert jac.is_mirror_symmetric()
    values = jacobi_spectrum(jac).values
    assert np.max(np.abs(values - (np.arange(N + 1) - N / 2))) <= 1e-10


def test_reference_chain_spectra():
    hk = jacobi_spectrum(krawtchouk_chain(4)).values
    ref = [float(r["eigenvalue"]) for r in load_rows("hk2_chain")]
    assert np.max(np.abs(hk - ref)) <= 1e-10
    lp = jacobi_spectrum(krawtchouk_chain(16)).values
    ref = [float(r["eigenvalue"]) for r in load_rows("lp2_chain")]
    assert np.max(np.abs(lp - ref)) <= 1e-10


def test_recurrence_values_at_two():
    p = recurrence_polynomials(krawtchouk_chain(4), 2.0)
    assert np.allclose(p, [1, 2, 3, 3, 1.5, 0], atol=1e-12)
    q = recurrence_polynomials(krawtchouk_chain(1), 0.5)
    assert abs(q[2]) < 1e-15
    jac = JacobiMatrix([0.3, -1, 2], [1, 1])
    assert recurrence_polynomials(jac, 0.3)[1] == 0


def test_dirichlet_examples():
    d = dirichlet_restriction(krawtchouk_chain(4))
    assert np.allclose(d.J, [S6, S6])
    assert np.allclose(jacobi_spectrum(d).values, [-np.sqrt(3), 0, np.sqrt(3)], atol=1e-12)
    with pytest.raises(JacobiError):
        dirichlet_restriction(krawtchouk_chain(1))


def test_lp_segment_matrix():
    seg = segment(krawtchouk_chain(16), 4, 12)
    expected = [np.sqrt(15), np.sqrt(66) / 2, np.sqrt(70) / 2, 3 * np.sqrt(2)]
    assert np.allclose(seg.matrix.J, expected + expected[::-1], rtol=0, atol=1e-12)
    assert seg.span == (4, 12) and seg.overridden == ()
    values = jacobi_spectrum(seg.dirichlet()).values
    ref = [float(r["eigenvalue"]) for r in load_rows("lp2_dirichlet")]
    assert np.max(np.abs(values - ref)) <= 1e-6


def test_hk_segment_with_boundary_override():
    jac = krawtchouk_chain(4)
    plain = segment(jac, 0, 2)
    assert np.allclose(plain.matrix.to_dense(), [[0, 1, 0], [1, 0, S6], [0, S6, 0]])
    adjusted = segment(jac, 0, 2, diagonal_override={2: 1.0})
    assert np.allclose(adjusted.matrix.to_dense(), [[0, 1, 0], [1, 0, S6], [0, S6, 1]], atol=1e-12)
    assert adjusted.overridden == (2,)
    assert jacobi_spectrum(adjusted.dirichlet()).values.tolist() == [0.0]
    assert segment(jac, 0, 4).matrix == jac
    with pytest.raises(JacobiError):
        segment(jac, 2, 5)
    with pytest.raises(JacobiError):
        segment(jac, 0, 2, diagonal_override={3: 1.0})


def test_invalid_matrices():
    with pytest.raises(JacobiError):
        JacobiMatrix([0, 0], [0.0])
    with pytest.raises(JacobiError):
        JacobiMatrix([0, 0, 0], [1.0])
    with pytest.raises(JacobiError):
        JacobiMatrix([0, np.nan], [1.0])


@settings(max_examples=60, deadline=None)
@given(jacobi_matrices())
def test_spectrum_properties(jac):
    spec = jacobi_spectrum(jac)
    assert np.all(np.diff(spec.values) > 0)
    dense = jac.to_dense()
    assert np.allclose(dense @ spec.vectors, spec.vectors * spec.values, atol=1e-9)
    assert np.allclose(spec.vectors.T @ spec.vectors, np.eye(jac.size), atol=1e-9)
    for k, lam in enumerate(spec.values):
        col = spec.vectors[:, k]
        first = col[np.flatnonzero(np.abs(col) > 1e-12)[0]]
        assert first > 0
        assert abs(_newton_step(jac, lam)) <= 1e-8 * max(1.0, abs(lam))


# the forward recurrence amplifies rounding by roughly prod(|lam - B| / J), so
# compare it with the solver only on well-conditioned chains
@settings(max_examples=60, deadline=None)
@given(jacobi_matrices(max_n=8, min_coupling=0.5))
def test_recurrence_eigenvectors_match_solver(jac):
    spec = jacobi_spectrum(jac)
    for k, lam in enumerate(spec.values):
        col = spec.vectors[:, k]
        v = eigenvector_from_recurrence(jac, lam)
        v /= np.linalg.norm(v)
        assert min(np.linalg.norm(v - col), np.linalg.norm(v + col)) < 1e-6


@settings(max_examples=40, deadline=None)
@given(jacobi_matrices())
def test_dirichlet_interlacing(jac):
    if jac.N < 2:
        return
    lam = jacobi_spectrum(jac).values
    mu = jacobi_spectrum(dirichlet_restriction(jac)).values
    assert np.all(lam[:-2] <= mu + 1e-12) and np.all(mu <= lam[2:] + 1e-12)


def test_json_round_trip():
    jac = JacobiMatrix([1, 2, 3], [0.5, 0.25])
    assert JacobiMatrix.from_dict(jac.to_dict()) == jac
    assert hash(JacobiMatrix.from_dict(jac.to_dict())) == hash(jac)
