"""Property-based tests for the density-matrix core.

These tests validate universal properties that should hold across all inputs.
"""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from geotomo.qcore import (
    bures_angle,
    fidelity,
    maximally_mixed,
    partial_transpose,
    project_to_physical,
    purity,
    sqrt_psd,
    validate_density_matrix,
)
from tests.strategies import density_matrices, full_rank_states, pure_states, seeds, spectra


@given(rho=density_matrices(), sigma=density_matrices())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_fidelity_is_symmetric_and_bounded(rho, sigma):
    """F(ρ, σ) = F(σ, ρ) and 0 ≤ F ≤ 1 for every pair of states."""
    f = fidelity(rho, sigma)
    assert 0.0 <= f <= 1.0
    assert f == pytest.approx(fidelity(sigma, rho), abs=1e-8)


@given(rho=density_matrices())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_self_fidelity_is_one(rho):
    """Every state has fidelity 1 with itself and Bures angle 0."""
    assert fidelity(rho, rho) == pytest.approx(1.0, abs=1e-8)
    assert bures_angle(rho, rho) == pytest.approx(0.0, abs=1e-4)


@given(psi=pure_states())
@settings(max_examples=50, deadline=None)
@pytest.mark.property_test
def test_fidelity_with_maximally_mixed_state(psi):
    """A pure state has fidelity 1/d with I/d."""
    assert fidelity(maximally_mixed(4), psi) == pytest.approx(0.25, abs=1e-9)


@given(p=spectra(), q=spectra())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_commuting_states_use_classical_fidelity(p, q):
    """Diagonal states give the squared Bhattacharyya coefficient (Σ √(p_i q_i))²."""
    expected = float(np.sum(np.sqrt(p * q))) ** 2
    assert fidelity(np.diag(p), np.diag(q)) == pytest.approx(expected, abs=2e-6)


@given(rho=density_matrices())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_sqrt_squares_back(rho):
    """√ρ · √ρ reproduces ρ."""
    root = sqrt_psd(rho)
    np.testing.assert_allclose(root @ root, rho, atol=1e-6)


@given(rho=density_matrices())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_purity_bounds(rho):
    """1/d ≤ Tr(ρ²) ≤ 1."""
    assert 0.25 - 1e-12 <= purity(rho) <= 1.0 + 1e-12


@given(rho=density_matrices())
@settings(max_examples=50, deadline=None)
@pytest.mark.property_test
def test_physical_states_are_fixed_points_of_projection(rho):
    """Projecting a valid state leaves it unchanged."""
    np.testing.assert_allclose(project_to_physical(rho), rho, atol=1e-9)


@given(
    st.lists(
        st.floats(min_value=-1.0, max_value=1.0, allow_nan=False), min_size=32, max_size=32
    ).filter(lambda v: any(abs(x) > 1e-3 for x in v[:16]))
)
@settings(max_examples=50, deadline=None)
@pytest.mark.property_test
def test_projection_returns_valid_state(values):
    """Any non-trivial matrix projects to a valid density matrix."""
    m = np.asarray(values[:16]).reshape(4, 4) + 1j * np.asarray(values[16:]).reshape(4, 4)
    m = m @ m.conj().T - 0.1 * np.eye(4)
    try:
        out = project_to_physical(m)
    except ArithmeticError:
        return
    assert validate_density_matrix(out).valid


@given(rho=density_matrices())
@settings(max_examples=50, deadline=None)
@pytest.mark.property_test
def test_partial_transpose_is_an_involution(rho):
    """Transposing the same subsystem twice restores the matrix and keeps the trace."""
    once = partial_transpose(rho)
    assert np.trace(once).real == pytest.approx(1.0)
    np.testing.assert_allclose(partial_transpose(once), rho, atol=1e-15)


@given(rho=density_matrices(), sigma=density_matrices(), tau=density_matrices())
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_bures_angle_triangle_inequality(rho, sigma, tau):
    """The Bures angle is a metric on states."""
    assert bures_angle(rho, tau) <= bures_angle(rho, sigma) + bures_angle(sigma, tau) + 1e-8


@given(rho=density_matrices(), sigma=full_rank_states(), seed=seeds)
@settings(max_examples=100, deadline=None)
@pytest.mark.property_test
def test_fidelity_is_unitarily_invariant(rho, sigma, seed):
    """F(UρU†, UσU†) = F(ρ, σ), and a full-rank σ overlaps every state."""
    gen = np.random.Generator(np.random.Philox(seed))
    g = gen.standard_normal((4, 4)) + 1j * gen.standard_normal((4, 4))
    u, _ = np.linalg.qr(g)
    rotated = fidelity(u @ rho @ u.conj().T, u @ sigma @ u.conj().T)
    base = fidelity(rho, sigma)
    assert rotated == pytest.approx(base, abs=1e-8)
    assert base > 0.0
