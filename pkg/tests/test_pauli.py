import itertools

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvbounds.pauli import (
    MAX_QUBITS,
    PauliString,
    PauliVector,
    all_paulis,
    anticommutation_matrix,
    density_to_pauli_array,
    density_to_pauli_coeffs,
    multiply,
    pauli_array_to_density,
    pauli_coeffs_to_density,
    symplectic_product,
    wht_commutation,
)

labels = st.integers(1, 4).flatmap(lambda n: st.text("IXYZ", min_size=n, max_size=n))


def _commute_by_matrices(p, q):
    a, b = p.to_matrix(), q.to_matrix()
    return 0 if np.allclose(a @ b, b @ a) else 1


def _dense_character_matrix(n):
    # independent oracle: anticommutation from explicit matrices
    ps = all_paulis(n)
    return np.array([[(-1) ** _commute_by_matrices(p, q) for q in ps] for p in ps], dtype=float)


class TestPauliString:
    def test_label_roundtrip(self):
        for label in ["I", "X", "Y", "Z", "XIZY", "YYZZ"]:
            assert PauliString.from_label(label).label == label

    def test_bits(self):
        p = PauliString.from_label("XYZI")
        assert p.x_bits == (1, 1, 0, 0)
        assert p.z_bits == (0, 1, 1, 0)

    def test_index_convention(self):
        # per-qubit code x + 2z: I=0, X=1, Z=2, Y=3; qubit 0 most significant
        assert [PauliString.from_label(c).index for c in "IXZY"] == [0, 1, 2, 3]
        assert PauliString.from_label("XI").index == 4
        assert PauliString.from_label("IX").index == 1

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_index_roundtrip(self, n):
        for i in range(4**n):
            p = PauliString.from_index(i, n)
            assert p.index == i
            assert PauliString.from_label(p.label) == p

    def test_invalid(self):
        with pytest.raises(ValueError):
            PauliString.from_label("XQ")
        with pytest.raises(ValueError):
            PauliString(2, (1,), (0, 0))
        with pytest.raises(ValueError):
            PauliString.from_index(16, 2)

    def test_weight_support(self):
        p = PauliString.from_label("XIZY")
        assert p.weight == 3
        assert p.support == (0, 2, 3)
        assert PauliString.identity(3).is_identity()

    @given(labels)
    def test_matrix_is_kron(self, label):
        mats = {"I": np.eye(2), "X": [[0, 1], [1, 0]], "Y": [[0, -1j], [1j, 0]], "Z": [[1, 0], [0, -1]]}
        m = np.array([[1.0]])
        for c in label:
            m = np.kron(m, mats[c])
        assert np.allclose(PauliString.from_label(label).to_matrix(), m)


class TestSymplecticProduct:
    def test_examples(self):
        assert symplectic_product("X", "Z") == 1
        assert symplectic_product("XIZY", "ZIZX") == 0
        for p in all_paulis(2):
            assert symplectic_product(p, "II") == 0

    def test_matches_matrix_commutation(self):
        for p, q in itertools.product(all_paulis(2), repeat=2):
            assert symplectic_product(p, q) == _commute_by_matrices(p, q)

    @given(st.integers(1, 5).flatmap(lambda n: st.tuples(*[st.text("IXYZ", min_size=n, max_size=n)] * 3)))
    def test_symmetric_and_bilinear(self, triple):
        p, q, r = map(PauliString.from_label, triple)
        assert symplectic_product(p, q) == symplectic_product(q, p)
        qr, _ = multiply(q, r)
        assert symplectic_product(p, qr) == symplectic_product(p, q) ^ symplectic_product(p, r)

    def test_mismatched_n(self):
        with pytest.raises(ValueError):
            symplectic_product("X", "XX")

    def test_anticommutation_matrix(self):
        ps = all_paulis(2)
        gens = [PauliString.from_label(s) for s in ["XI", "ZZ", "YX"]]
        m = anticommutation_matrix(ps, gens)
        expect = [[symplectic_product(p, g) for g in gens] for p in ps]
        assert np.array_equal(m, expect)


class TestMultiply:
    def test_examples(self):
        assert multiply("X", "X") == (PauliString.from_label("I"), 0)
        assert multiply("X", "Z") == (PauliString.from_label("Y"), 3)
        assert multiply("XZ", "II") == (PauliString.from_label("XZ"), 0)

    @given(st.integers(1, 3).flatmap(lambda n: st.tuples(*[st.text("IXYZ", min_size=n, max_size=n)] * 2)))
    def test_matches_matrix_product(self, pair):
        p, q = map(PauliString.from_label, pair)
        r, k = multiply(p, q)
        assert np.allclose(p.to_matrix() @ q.to_matrix(), (1j) ** k * r.to_matrix())


class TestWHT:
    def test_examples(self):
        out = wht_commutation(np.ones(4), normalize=True)
        assert np.allclose(out, [1, 0, 0, 0])
        r = 0.7
        out = wht_commutation(np.array([1, r, r, r]), normalize=True)
        assert np.allclose(out, [(1 + 3 * r) / 4] + [(1 - r) / 4] * 3, atol=1e-15)

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_dense(self, n):
        h = _dense_character_matrix(n)
        rng = np.random.default_rng(n)
        for _ in range(10):
            v = rng.normal(size=4**n)
            assert np.max(np.abs(wht_commutation(v) - h @ v)) <= 1e-12

    @pytest.mark.parametrize("n", [1, 2, 4, 6])
    def test_involution(self, n):
        v = np.random.default_rng(7).normal(size=4**n)
        back = wht_commutation(wht_commutation(v), normalize=True)
        assert np.max(np.abs(back - v)) <= 1e-10 * np.max(np.abs(v))

    def test_pauli_vector_type_preserved(self):
        pv = PauliVector(1, np.array([1.0, 0.5, 0.5, 0.5]))
        out = wht_commutation(pv, normalize=True)
        assert isinstance(out, PauliVector)
        assert np.allclose(out.values, [0.625, 0.125, 0.125, 0.125])

    def test_bad_length(self):
        with pytest.raises(ValueError):
            wht_commutation(np.ones(5))


class TestPauliVector:
    def test_invariants(self):
        with pytest.raises(ValueError):
            PauliVector(1, np.ones(3))
        with pytest.raises(ValueError):
            PauliVector(1, np.array([1, np.nan, 0, 0]))
        with pytest.raises(ValueError):
            PauliVector(MAX_QUBITS + 1, np.ones(1))

    def test_indexing(self):
        pv = PauliVector(1, np.array([1.0, 0.1, 0.2, 0.3]))
        assert pv["Z"] == 0.2
        assert pv[PauliString.from_label("Y")] == 0.3
        assert pv[1] == 0.1


def _random_density(n, rng):
    a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
    rho = a @ a.conj().T
    return rho / np.trace(rho)


class TestDensityConversion:
    def test_examples(self):
        c = density_to_pauli_coeffs(np.diag([1.0, 0.0]).astype(complex))
        assert np.allclose(c.values, [1, 0, 1, 0])
        c = density_to_pauli_coeffs(np.eye(4) / 4)
        assert np.allclose(c.values, np.eye(16)[0])

    @pytest.mark.parametrize("n", [1, 2, 3])
    def test_matches_trace_oracle(self, n):
        rho = _random_density(n, np.random.default_rng(n))
        c = density_to_pauli_coeffs(rho).values
        oracle = [np.trace(p.to_matrix() @ rho).real for p in all_paulis(n)]
        assert np.allclose(c, oracle, atol=1e-12)
        assert abs(c[0] - 1) < 1e-12
        assert np.all(np.abs(c) <= 1 + 1e-12)

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=20)
    def test_roundtrip(self, n, seed):
        rng = np.random.default_rng(seed)
        a = rng.normal(size=(2**n, 2**n)) + 1j * rng.normal(size=(2**n, 2**n))
        h = a + a.conj().T
        back = pauli_coeffs_to_density(density_to_pauli_coeffs(h))
        assert np.max(np.abs(back - h)) <= 1e-12 * max(1.0, np.max(np.abs(h)))

    def test_batched(self):
        rng = np.random.default_rng(3)
        rhos = np.stack([_random_density(2, rng) for _ in range(5)])
        c = density_to_pauli_array(rhos)
        assert c.shape == (5, 16)
        assert np.allclose(pauli_array_to_density(c, 2), rhos)

    def test_non_power_of_two(self):
        with pytest.raises(ValueError):
            density_to_pauli_coeffs(np.eye(3))
