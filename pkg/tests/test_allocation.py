import numpy as np
import pytest
from hypothesis import assume, given
from hypothesis import strategies as st

from emff.allocation import (
    PsiParams, _sgn, allocate_all, allocate_pair, amplitude_pair, psi, psi_grad, rotation_R,
)
from emff.dipole import C0, dipole_force_shape
from emff.errors import EMFFError
from emff.numerics import finite_difference_gradient

vec = st.lists(st.floats(-50, 50, allow_nan=False), min_size=3, max_size=3).map(np.array)


def test_rotation_canonical_axes():
    assert np.allclose(rotation_R([1.0, 0, 0], [0, 1.0, 0]), np.eye(3))


def test_rotation_collinear_branch():
    R = rotation_R([0, 0, 2.0], [0, 0, 5.0])
    assert np.array_equal(R, [[0, 0, 1.0], [0, 0, 0], [0, 0, 0]])


@given(vec, vec)
def test_rotation_orthonormal(r, f):
    assume(np.linalg.norm(r) > 1e-2 and np.linalg.norm(np.cross(r, f)) > 1e-3 * np.linalg.norm(r) * np.linalg.norm(f))
    R = rotation_R(r, f)
    assert np.allclose(R @ R.T, np.eye(3), atol=1e-12)
    assert np.allclose(R @ r, [np.linalg.norm(r), 0, 0], atol=1e-12 * np.linalg.norm(r))
    assert np.linalg.det(R) == pytest.approx(1.0)


def test_zero_force():
    res = amplitude_pair([1.0, 2.0, 3.0], np.zeros(3))
    assert res.branch == "zero_force"
    assert not res.c1.any() and not res.c2.any()


def test_axial_case():
    r, f = np.array([2.0, 0, 0]), np.array([3.0, 0, 0])
    res = amplitude_pair(r, f)
    assert res.branch == "axial"
    assert np.allclose(dipole_force_shape(r, res.c1, res.c2), f, atol=1e-14)


def test_zero_baseline():
    with pytest.raises(EMFFError) as exc:
        amplitude_pair(np.zeros(3), np.ones(3))
    assert exc.value.code == "zero_baseline"
    with pytest.raises(EMFFError):
        allocate_pair(np.zeros(3), np.ones(3), 0, 1)


@given(vec, vec)
def test_round_trip_and_norm_identity(r, f):
    assume(np.linalg.norm(r) > 1e-2)
    res = amplitude_pair(r, f)
    assert np.linalg.norm(dipole_force_shape(r, res.c1, res.c2) - f) <= 1e-9 * (1 + np.linalg.norm(f))
    n1, n2 = res.c1 @ res.c1, res.c2 @ res.c2
    s = _sgn(r @ f, np.linalg.norm(r) * np.linalg.norm(f))
    assert abs(n1 - (2.0 - s * s) * n2) <= 1e-9 * max(n1, 1e-300)


@given(vec, vec)
def test_psi_upper_bound(r, f):
    assume(np.linalg.norm(r) > 1e-2)
    res = amplitude_pair(r, f)
    bound = psi(r, f / (r @ r) ** 2)
    assert bound > res.c1 @ res.c1
    assert bound > res.c2 @ res.c2


def test_psi_special_values():
    eps2 = PsiParams().eps2
    assert psi([1.0, 2.0, 0.5], np.zeros(3)) == pytest.approx(np.sqrt(eps2), rel=1e-15)
    r = np.array([1.0, 2.0, 0.5])
    z = np.cross(r, [0.3, -0.2, 1.0])  # r . z = 0
    s = np.linalg.norm(r)
    phi1 = np.sqrt(np.linalg.norm(np.cross(r, z)) ** 2 + s**2 * z @ z)
    assert psi(r, z) == pytest.approx(np.sqrt(s**6 * phi1**2 + eps2), rel=1e-13)


def test_psi_gradient_matches_differences():
    rng = np.random.default_rng(11)
    for _ in range(20):
        r = rng.normal(size=3) * 2
        z = rng.normal(size=3) * 10.0 ** rng.uniform(-6, -2)
        value, g_r, g_z = psi_grad(r, z)
        assert value == psi(r, z)
        fd_r = finite_difference_gradient(lambda rr: psi(rr, z), r, eps=1e-6)
        step = 1e-4 * np.abs(z).max()
        fd_z = finite_difference_gradient(lambda zz: psi(r, zz), z, eps=step)
        assert np.linalg.norm(fd_r - g_r) <= 1e-5 * np.linalg.norm(g_r)
        assert np.linalg.norm(fd_z - g_z) <= 1e-5 * np.linalg.norm(g_z)


@given(vec, vec)
def test_allocated_pair_force_is_prescribed(r, zeta):
    assume(np.linalg.norm(r) > 0.1)
    p_ij, p_ji = allocate_pair(r, zeta, 0, 1)
    d4 = (r @ r) ** 2
    force = C0 / (2 * d4) * dipole_force_shape(r, p_ij, p_ji)
    assert np.linalg.norm(force - C0 / 2 * zeta) <= 1e-9 * C0 / 2 * (1 + np.linalg.norm(zeta))
    # the reverse call realizes the reaction force
    q_ji, q_ij = allocate_pair(-r, -zeta, 1, 0)
    assert np.allclose(q_ij, p_ij) and np.allclose(q_ji, p_ji)


def test_allocate_all_zero_and_pairs():
    r = np.array([[0.0, 0, 0], [2.0, 0, 0], [0, 3.0, 0]])
    out = allocate_all(r, np.zeros(9))
    assert set(out) == {(0, 1), (1, 0), (0, 2), (2, 0), (1, 2), (2, 1)}
    assert all(not v.any() for v in out.values())
    rng = np.random.default_rng(0)
    zeta = rng.normal(size=9)
    out = allocate_all(r, zeta)
    for k, (i, j) in enumerate([(0, 1), (0, 2), (1, 2)]):
        rij = r[i] - r[j]
        f = dipole_force_shape(rij, out[(i, j)], out[(j, i)])
        assert np.allclose(f, (rij @ rij) ** 2 * zeta[3 * k : 3 * k + 3], rtol=1e-12, atol=1e-12)
