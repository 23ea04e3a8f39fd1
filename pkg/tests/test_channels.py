import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from mvbounds.channels import (
    PauliLindbladModel,
    PauliStochastishChannel,
    channel_from_model,
    compose,
    diamond_distance_identity_exact,
    diamond_norm_exact,
    gamma,
    invert,
    mitigated_map,
    model_fidelities,
    model_fidelity,
    ratio,
    twirled_amplitude_damping,
)
from mvbounds.pauli import PauliString, PauliVector, all_paulis


def random_model(n, rng, n_terms=None, lo=1e-3, hi=5e-2):
    ps = all_paulis(n)[1:]
    k = n_terms or rng.integers(1, min(len(ps), 8) + 1)
    idx = rng.choice(len(ps), size=k, replace=False)
    return PauliLindbladModel(n, tuple((ps[i], float(rng.uniform(lo, hi))) for i in idx))


def choi_trace_norm(fids, n):
    # Choi matrix built directly from the Pauli transfer diagonal: (1/d^2) sum_P f_P P^T (x) P
    d = 2**n
    j = np.zeros((d * d, d * d), dtype=complex)
    for p, f in zip(all_paulis(n), fids):
        m = p.to_matrix()
        j += f * np.kron(m.T, m)
    j /= d * d
    return float(np.sum(np.abs(np.linalg.eigvalsh(j))))


class TestModelFidelity:
    def test_examples(self):
        m = PauliLindbladModel.from_list([("X", 0.01)])
        assert model_fidelity(m, "X") == 1.0
        assert model_fidelity(m, "Z") == pytest.approx(math.exp(-0.02), abs=1e-15)
        assert model_fidelity(m, "Z") == pytest.approx(0.980199, abs=1e-6)
        m2 = PauliLindbladModel.from_list([("XX", 0.005), ("IZ", 0.002)])
        assert model_fidelity(m2, "ZI") == pytest.approx(math.exp(-0.01), abs=1e-15)

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError):
            model_fidelity(PauliLindbladModel.from_list([("X", 0.01)]), "XX")

    def test_vectorized_agrees(self):
        rng = np.random.default_rng(0)
        m = random_model(3, rng)
        ps = all_paulis(3)
        assert np.allclose(model_fidelities(m, ps), [model_fidelity(m, p) for p in ps])

    def test_invariants(self):
        with pytest.raises(ValueError):
            PauliLindbladModel.from_list([("X", -0.1)])
        with pytest.raises(ValueError):
            PauliLindbladModel.from_list([("X", 0.1), ("X", 0.2)])
        with pytest.raises(ValueError):
            PauliLindbladModel.from_list([("II", 0.1)])


class TestChannelFromModel:
    def test_empty_is_identity(self):
        ch = channel_from_model(PauliLindbladModel(2, ()))
        assert np.array_equal(ch.values, np.ones(16))

    def test_xy_model(self):
        lam = 0.013
        ch = channel_from_model(PauliLindbladModel.from_list([("X", lam), ("Y", lam)]))
        assert ch.fidelity("X") == pytest.approx(math.exp(-2 * lam), abs=1e-15)
        assert ch.fidelity("Y") == pytest.approx(math.exp(-2 * lam), abs=1e-15)
        assert ch.fidelity("Z") == pytest.approx(math.exp(-4 * lam), abs=1e-15)

    @given(st.integers(1, 4), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_always_cptp(self, n, seed):
        ch = channel_from_model(random_model(n, np.random.default_rng(seed), hi=0.3))
        nu = ch.coefficients()
        assert np.all(nu >= -1e-12)
        assert abs(nu.sum() - 1) <= 1e-12

    def test_matches_exponential_of_generator(self):
        # oracle: apply exp(L) to each Pauli as a product of single-term channels
        rng = np.random.default_rng(4)
        m = random_model(2, rng)
        fids = []
        for p in all_paulis(2):
            f = 1.0
            for g, lam in m.terms:
                pm, gm = p.to_matrix(), g.to_matrix()
                commutes = np.allclose(pm @ gm, gm @ pm)
                # single-term channel (1-w) rho + w G rho G with w = (1 - exp(-2 lam)) / 2
                w = (1 - math.exp(-2 * lam)) / 2
                f *= 1.0 if commutes else 1 - 2 * w
            fids.append(f)
        assert np.allclose(channel_from_model(m).values, fids, atol=1e-15)


class TestGamma:
    def test_examples(self):
        assert gamma(PauliLindbladModel(1, ())) == 1.0
        m = PauliLindbladModel.from_list([("X", 0.004), ("Z", 0.006)])
        assert gamma(m) == pytest.approx(math.exp(0.02), abs=1e-15)
        assert gamma(m) == pytest.approx(1.020201, abs=1e-6)

    @given(st.integers(1, 3), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_bounds_inverse_diamond_norm(self, n, seed):
        m = random_model(n, np.random.default_rng(seed), hi=0.2)
        assert diamond_norm_exact(invert(channel_from_model(m))) <= gamma(m) + 1e-10


class TestAlgebra:
    def test_compose_invert(self):
        ch = channel_from_model(random_model(2, np.random.default_rng(1)))
        assert np.allclose(compose(ch, invert(ch)).values, 1.0)

    def test_ratio(self):
        vals = np.ones(4)
        vals[2] = 0.95
        meas = PauliVector(1, vals)
        vals2 = np.ones(4)
        vals2[2] = 0.97
        r = ratio(meas, PauliVector(1, vals2))
        assert r.fidelity("Z") == pytest.approx(0.95 / 0.97, abs=1e-15)
        assert r.fidelity("Z") == pytest.approx(0.979381, abs=1e-6)
        assert np.array_equal(ratio(meas, meas).values, np.ones(4))

    def test_zero_denominator(self):
        z = PauliStochastishChannel.from_array([1.0, 0.0, 1.0, 0.0])
        with pytest.raises(ZeroDivisionError):
            invert(z)
        with pytest.raises(ZeroDivisionError):
            ratio(PauliStochastishChannel.identity(1), z)

    def test_identity_entry_must_be_one(self):
        with pytest.raises(ValueError):
            PauliStochastishChannel.from_array([0.9, 1, 1, 1])

    def test_mitigated_map(self):
        a = PauliLindbladModel.from_list([("X", 0.02)])
        m = PauliLindbladModel.from_list([("X", 0.01)])
        v = mitigated_map(a, m)
        assert v.fidelity("Z") == pytest.approx(math.exp(-0.02), abs=1e-15)


class TestDiamond:
    def test_examples(self):
        assert diamond_norm_exact(PauliStochastishChannel.identity(2)) == pytest.approx(1.0)
        v = PauliStochastishChannel.depolarizing(1, 1.2)
        assert np.allclose(v.coefficients(), [1.15, -0.05, -0.05, -0.05])
        assert diamond_norm_exact(v) == pytest.approx(1.3, abs=1e-14)
        assert diamond_distance_identity_exact(PauliStochastishChannel.identity(1)) == 0.0
        assert diamond_distance_identity_exact(PauliStochastishChannel.depolarizing(1, 0.9)) == pytest.approx(0.15, abs=1e-14)
        assert diamond_distance_identity_exact(v) == pytest.approx(0.3, abs=1e-14)
        assert diamond_distance_identity_exact(v) == pytest.approx(diamond_norm_exact(v) - 1, abs=1e-14)

    def test_cptp_has_unit_norm(self):
        ch = channel_from_model(random_model(3, np.random.default_rng(2)))
        assert diamond_norm_exact(ch) == pytest.approx(1.0, abs=1e-12)

    @pytest.mark.parametrize("n", [1, 2])
    def test_matches_choi_trace_norm(self, n):
        rng = np.random.default_rng(10 + n)
        for _ in range(5):
            vals = rng.uniform(0.5, 1.5, size=4**n)
            vals[0] = 1.0
            v = PauliStochastishChannel.from_array(vals)
            assert diamond_norm_exact(v) == pytest.approx(choi_trace_norm(vals, n), abs=1e-12)

    @given(st.integers(1, 3), st.integers(0, 2**32 - 1))
    @settings(max_examples=30, deadline=None)
    def test_triangle_relation(self, n, seed):
        vals = np.random.default_rng(seed).uniform(0.0, 2.0, size=4**n)
        vals[0] = 1.0
        v = PauliStochastishChannel.from_array(vals)
        assert diamond_norm_exact(v) <= 1 + diamond_distance_identity_exact(v) + 1e-10


def _amplitude_damping_ptm_diagonal(g):
    # oracle: Pauli transfer diagonal of the amplitude-damping Kraus channel
    k0 = np.array([[1, 0], [0, math.sqrt(1 - g)]])
    k1 = np.array([[0, math.sqrt(g)], [0, 0]])
    out = []
    for p in all_paulis(1):
        m = p.to_matrix()
        image = k0 @ m @ k0.conj().T + k1 @ m @ k1.conj().T
        out.append(np.trace(m @ image).real / 2)
    return np.array(out)


class TestAmplitudeDamping:
    def test_rates(self):
        m = twirled_amplitude_damping([200e-6], 100e-9)
        assert [p.label for p, _ in m.terms] == ["X", "Y"]
        assert all(r == pytest.approx(1.25e-4, rel=1e-12) for _, r in m.terms)

    def test_infinite_t1(self):
        assert twirled_amplitude_damping([math.inf, math.inf], 1e-7).terms == ()

    def test_matches_kraus_twirl(self):
        t, t1 = 3e-6, 20e-6
        ptm = _amplitude_damping_ptm_diagonal(1 - math.exp(-t / t1))
        model = channel_from_model(twirled_amplitude_damping([t1], t))
        # twirling keeps the diagonal; the non-unital part is discarded
        assert np.allclose(model.values, ptm, atol=1e-14)

    def test_drift_ratio(self):
        actual = twirled_amplitude_damping([100e-6], 100e-9)
        learnt = twirled_amplitude_damping([200e-6], 100e-9)
        v = mitigated_map(actual, learnt)
        # over-estimated T1 leaves r_Z = exp(-4 * delta) below one
        assert v.fidelity("Z") == pytest.approx(math.exp(-5e-4), rel=1e-12)
        v = mitigated_map(learnt, actual)
        assert v.fidelity("Z") == pytest.approx(math.exp(5e-4), rel=1e-12)

    def test_invalid(self):
        with pytest.raises(ValueError):
            twirled_amplitude_damping([0.0], 1e-7)
        with pytest.raises(ValueError):
            twirled_amplitude_damping([1e-4], 0.0)


class TestSerialization:
    def test_model_roundtrip(self):
        m = random_model(3, np.random.default_rng(5))
        m = PauliLindbladModel(m.n, m.terms, "even")
        assert PauliLindbladModel.from_dict(m.to_dict()) == m

    def test_channel_roundtrip(self):
        ch = channel_from_model(random_model(2, np.random.default_rng(6)))
        back = PauliStochastishChannel.from_dict(ch.to_dict())
        assert np.array_equal(back.values, ch.values)

    def test_channel_sparse_defaults(self):
        ch = PauliStochastishChannel.from_dict({"n": 2, "fidelities": {"ZZ": 0.9}})
        assert ch.fidelity("ZZ") == 0.9
        assert ch.fidelity(PauliString.from_label("XI")) == 1.0
