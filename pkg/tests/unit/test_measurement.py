"""Unit tests for Pauli measurement vectors."""

import numpy as np
import pytest

from geotomo.errors import PreconditionError
from geotomo.measurement import (
    expectations,
    expectations_batch,
    in_range,
    n_qubits_for_dim,
    parseval_purity,
    pauli_basis,
    pauli_words,
    reconstruct,
)
from geotomo.qcore import maximally_mixed, project_to_physical, purity, validate_density_matrix


class TestPauliWords:
    """Tests for canonical word order."""

    def test_two_qubit_order(self) -> None:
        """Test the fifteen two-qubit words in lexicographic I < X < Y < Z order."""
        words = pauli_words(2)
        assert len(words) == 15
        assert words[:4] == ["IX", "IY", "IZ", "XI"]
        assert words[4] == "XX"
        assert words[-1] == "ZZ"

    def test_single_qubit(self) -> None:
        """Test that one qubit gives X, Y, Z."""
        assert pauli_words(1) == ["X", "Y", "Z"]

    def test_basis_starts_with_identity(self) -> None:
        """Test that the full basis leads with the identity word."""
        word, mat = pauli_basis(2)[0]
        assert word == "II"
        np.testing.assert_array_equal(mat, np.eye(4))

    def test_basis_is_orthogonal(self) -> None:
        """Test Tr(P_a P_b) = 4δ_ab."""
        mats = [m for _, m in pauli_basis(2)]
        gram = np.array([[np.trace(a @ b).real for b in mats] for a in mats])
        np.testing.assert_allclose(gram, 4 * np.eye(16), atol=1e-12)

    def test_rejects_zero_qubits(self) -> None:
        """Test that n = 0 is rejected."""
        with pytest.raises(PreconditionError):
            pauli_words(0)


class TestExpectations:
    """Tests for expectations and expectations_batch."""

    def test_bell_state(self, bell_state) -> None:
        """Test ⟨XX⟩ = 1, ⟨YY⟩ = −1, ⟨ZZ⟩ = 1 and all other entries zero for |Φ+⟩."""
        x = expectations(bell_state)
        words = pauli_words(2)
        expected = np.zeros(15)
        expected[words.index("XX")] = 1.0
        expected[words.index("YY")] = -1.0
        expected[words.index("ZZ")] = 1.0
        np.testing.assert_allclose(x, expected, atol=1e-12)

    def test_maximally_mixed_is_zero(self) -> None:
        """Test that I/4 has a zero measurement vector."""
        np.testing.assert_allclose(expectations(maximally_mixed(4)), np.zeros(15), atol=1e-15)

    def test_product_state_z_values(self) -> None:
        """Test |01⟩ gives ⟨ZI⟩ = 1 and ⟨IZ⟩ = −1."""
        rho = np.diag([0.0, 1.0, 0.0, 0.0]).astype(np.complex128)
        x = dict(zip(pauli_words(2), expectations(rho), strict=True))
        assert x["ZI"] == pytest.approx(1.0)
        assert x["IZ"] == pytest.approx(-1.0)
        assert x["ZZ"] == pytest.approx(-1.0)

    def test_output_is_real(self, mixed_state) -> None:
        """Test that the vector is float64."""
        assert expectations(mixed_state).dtype == np.float64

    def test_rejects_non_hermitian(self) -> None:
        """Test that an imaginary trace above 1e-10 raises PreconditionError."""
        m = maximally_mixed(4)
        m[0, 1] = 0.3
        with pytest.raises(PreconditionError, match="imaginary"):
            expectations(m)

    def test_rejects_bad_dimension(self) -> None:
        """Test that a 3×3 matrix is rejected."""
        with pytest.raises(PreconditionError, match="power of 2"):
            expectations(np.eye(3) / 3)

    def test_batch_matches_single(self, bell_state, mixed_state) -> None:
        """Test that the batched path agrees with the per-state path."""
        stack = np.stack([bell_state, mixed_state])
        batch = expectations_batch(stack)
        assert batch.shape == (2, 15)
        np.testing.assert_allclose(batch[0], expectations(bell_state), atol=1e-14)
        np.testing.assert_allclose(batch[1], expectations(mixed_state), atol=1e-14)


class TestReconstruct:
    """Tests for linear-inversion reconstruction."""

    def test_round_trip(self, mixed_state) -> None:
        """Test reconstruct(expectations(ρ)) = ρ."""
        np.testing.assert_allclose(reconstruct(expectations(mixed_state)), mixed_state, atol=1e-12)

    def test_zero_vector(self) -> None:
        """Test that the zero vector reconstructs I/4."""
        np.testing.assert_allclose(reconstruct(np.zeros(15)), maximally_mixed(4), atol=1e-15)

    def test_unphysical_vector_is_hermitian_unit_trace(self) -> None:
        """Test that an out-of-ball vector gives a Hermitian unit-trace non-PSD matrix."""
        x = np.zeros(15)
        x[pauli_words(2).index("XX")] = 1.0
        x[pauli_words(2).index("ZZ")] = -1.0
        x[pauli_words(2).index("YY")] = -1.0
        m = reconstruct(x)
        np.testing.assert_allclose(m, m.conj().T, atol=1e-15)
        assert np.trace(m).real == pytest.approx(1.0)
        assert not validate_density_matrix(m).valid
        assert validate_density_matrix(project_to_physical(m)).valid

    def test_rejects_wrong_length(self) -> None:
        """Test that a 14-entry vector raises PreconditionError."""
        with pytest.raises(PreconditionError, match="4\\^n - 1"):
            reconstruct(np.zeros(14))


class TestParsevalAndRange:
    """Tests for parseval_purity and in_range."""

    def test_parseval_matches_trace(self, mixed_state, bell_state) -> None:
        """Test (1 + |x|²)/4 = Tr(ρ²)."""
        for rho in (mixed_state, bell_state):
            assert parseval_purity(expectations(rho)) == pytest.approx(purity(rho), abs=1e-12)

    def test_in_range(self, bell_state) -> None:
        """Test that physical vectors pass and inflated ones fail."""
        x = expectations(bell_state)
        assert in_range(x)
        assert not in_range(1.1 * x)

    def test_rounding_slack(self) -> None:
        """Test that 1 + 1e-12 is still accepted."""
        assert in_range(np.array([1.0 + 1e-12, -1.0]))

    def test_qubit_count(self) -> None:
        """Test qubit counts from dimensions."""
        assert n_qubits_for_dim(4) == 2
        assert n_qubits_for_dim(8) == 3
        with pytest.raises(PreconditionError):
            n_qubits_for_dim(6)
