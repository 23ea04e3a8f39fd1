"""Pauli-Lindblad models and Pauli Stochastish channels.

A channel is stored as the diagonal of its Pauli transfer matrix (its Pauli fidelities).
Composition, inversion and fidelity ratios are then elementwise, and the Pauli error
coefficients are one :func:`~mvbounds.pauli.wht_commutation` away.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .pauli import (
    PauliString,
    PauliVector,
    anticommutation_matrix,
    as_pauli,
    pauli_codes,
    symplectic_product,
    wht_commutation,
)


@dataclass(frozen=True)
class PauliLindbladModel:
    """Generator ``L(rho) = sum_j rate_j (P_j rho P_j - rho)``; the channel is ``exp(L)``."""

    n: int
    terms: tuple[tuple[PauliString, float], ...] = ()
    layer_id: str = "layer"

    def __post_init__(self):
        terms = tuple((as_pauli(p), float(rate)) for p, rate in self.terms)
        seen = set()
        for p, rate in terms:
            if p.n != self.n:
                raise ValueError(f"generator {p} does not act on {self.n} qubits")
            if p.is_identity():
                raise ValueError("identity is not a valid generator")
            if p in seen:
                raise ValueError(f"duplicate generator {p}")
            if not (rate >= 0.0) or not math.isfinite(rate):
                raise ValueError(f"rate for {p} must be finite and nonnegative, got {rate}")
            seen.add(p)
        object.__setattr__(self, "terms", terms)

    @classmethod
    def from_list(cls, items: Iterable[tuple[str | PauliString, float]], n: int | None = None,
                  layer_id: str = "layer") -> "PauliLindbladModel":
        items = [(as_pauli(p), r) for p, r in items]
        if n is None:
            if not items:
                raise ValueError("n is required for an empty model")
            n = items[0][0].n
        return cls(n, tuple(items), layer_id)

    @classmethod
    def from_dict(cls, data: Mapping) -> "PauliLindbladModel":
        return cls(
            int(data["n"]),
            tuple((PauliString.from_label(t["pauli"]), float(t["rate"])) for t in data["terms"]),
            str(data.get("layer_id", "layer")),
        )

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "layer_id": self.layer_id,
            "terms": [{"pauli": p.label, "rate": rate} for p, rate in self.terms],
        }

    @property
    def generators(self) -> list[PauliString]:
        return [p for p, _ in self.terms]

    @property
    def rates(self) -> np.ndarray:
        return np.array([r for _, r in self.terms], dtype=float)

    def rate_map(self) -> dict[PauliString, float]:
        return dict(self.terms)

    def with_rates(self, rates: Sequence[float]) -> "PauliLindbladModel":
        if len(rates) != len(self.terms):
            raise ValueError("rate vector length does not match the number of terms")
        return PauliLindbladModel(
            self.n, tuple((p, float(r)) for p, r in zip(self.generators, rates)), self.layer_id
        )


@dataclass(frozen=True)
class PauliStochastishChannel:
    """Trace-preserving map with diagonal Pauli transfer matrix ``fidelities``.

    Entries may be negative or exceed one; the map need not be completely positive.
    """

    n: int
    fidelities: PauliVector = field(repr=False)

    def __post_init__(self):
        f = self.fidelities
        if not isinstance(f, PauliVector):
            f = PauliVector(self.n, f)
            object.__setattr__(self, "fidelities", f)
        if f.n != self.n:
            raise ValueError("fidelity vector has the wrong qubit count")
        if f.values[0] != 1.0:
            raise ValueError(f"identity fidelity must equal 1, got {f.values[0]!r}")

    @classmethod
    def identity(cls, n: int) -> "PauliStochastishChannel":
        return cls(n, PauliVector(n, np.ones(4**n)))

    @classmethod
    def from_array(cls, values) -> "PauliStochastishChannel":
        values = np.array(values, dtype=float)
        n = int(round(math.log(values.size, 4))) if values.size > 1 else 0
        return cls(n, PauliVector(n, values))

    @classmethod
    def depolarizing(cls, n: int, r: float) -> "PauliStochastishChannel":
        """Global depolarizing-like map: fidelity ``r`` on every non-identity Pauli."""
        vals = np.full(4**n, float(r))
        vals[0] = 1.0
        return cls(n, PauliVector(n, vals))

    @classmethod
    def from_dict(cls, data: Mapping) -> "PauliStochastishChannel":
        n = int(data["n"])
        vals = np.ones(4**n)
        for label, f in data.get("fidelities", {}).items():
            p = PauliString.from_label(label)
            if p.n != n:
                raise ValueError(f"Pauli {label} does not act on {n} qubits")
            vals[p.index] = float(f)
        return cls(n, PauliVector(n, vals))

    def to_dict(self) -> dict:
        vals = self.fidelities.values
        fids = {}
        for i in np.flatnonzero(vals != 1.0):
            fids[PauliString.from_index(int(i), self.n).label] = float(vals[i])
        return {"n": self.n, "fidelities": fids}

    @property
    def values(self) -> np.ndarray:
        return self.fidelities.values

    def fidelity(self, p: PauliString | str) -> float:
        return self.fidelities[p]

    def coefficients(self) -> np.ndarray:
        """Pauli error coefficients ``nu`` (probabilities when the map is a Pauli channel)."""
        return wht_commutation(self.values, normalize=True)

    def is_cptp(self, atol: float = 1e-12) -> bool:
        nu = self.coefficients()
        return bool(np.all(nu >= -atol) and abs(nu.sum() - 1.0) <= atol)


def _check_same_n(a, b):
    if a.n != b.n:
        raise ValueError(f"qubit count mismatch: {a.n} vs {b.n}")


def model_fidelity(model: PauliLindbladModel, p: PauliString | str) -> float:
    """``exp(-2 * sum of rates whose generator anticommutes with p)``."""
    p = as_pauli(p)
    if p.n != model.n:
        raise ValueError(f"Pauli {p} does not act on {model.n} qubits")
    s = sum(rate for g, rate in model.terms if symplectic_product(p, g))
    return math.exp(-2.0 * s)


def model_fidelities(model: PauliLindbladModel, paulis: Sequence[PauliString]) -> np.ndarray:
    if not model.terms:
        return np.ones(len(paulis))
    m = anticommutation_matrix(list(paulis), model.generators)
    return np.exp(-2.0 * (m @ model.rates))


def channel_from_model(model: PauliLindbladModel) -> PauliStochastishChannel:
    n = model.n
    if not model.terms:
        return PauliStochastishChannel.identity(n)
    m = anticommutation_matrix(pauli_codes(n), model.generators)
    vals = np.exp(-2.0 * (m @ model.rates))
    vals[0] = 1.0
    return PauliStochastishChannel(n, PauliVector(n, vals))


def gamma(model: PauliLindbladModel) -> float:
    """Sampling overhead ``exp(2 sum rates)``; bounds the diamond norm of the inverse channel."""
    return math.exp(2.0 * float(np.sum(model.rates)))


def compose(a: PauliStochastishChannel, b: PauliStochastishChannel) -> PauliStochastishChannel:
    _check_same_n(a, b)
    return PauliStochastishChannel(a.n, PauliVector(a.n, a.values * b.values))


def invert(a: PauliStochastishChannel) -> PauliStochastishChannel:
    if np.any(a.values == 0.0):
        raise ZeroDivisionError("channel has a zero Pauli fidelity and is not invertible")
    return PauliStochastishChannel(a.n, PauliVector(a.n, 1.0 / a.values))


def ratio(meas, model) -> PauliStochastishChannel:
    """Fidelity ratio channel ``r_k = meas_k / model_k``.

    Arguments may be channels or PauliVectors.
    """
    mv = meas.fidelities if isinstance(meas, PauliStochastishChannel) else meas
    dv = model.fidelities if isinstance(model, PauliStochastishChannel) else model
    _check_same_n(mv, dv)
    if np.any(dv.values == 0.0):
        raise ZeroDivisionError("model fidelity is zero")
    vals = mv.values / dv.values
    vals[0] = 1.0
    return PauliStochastishChannel(mv.n, PauliVector(mv.n, vals))


def mitigated_map(actual: PauliLindbladModel | PauliStochastishChannel,
                  model: PauliLindbladModel | PauliStochastishChannel) -> PauliStochastishChannel:
    """``V = E Ehat^{-1}`` for an actual error and the model used to cancel it."""
    e = channel_from_model(actual) if isinstance(actual, PauliLindbladModel) else actual
    m = channel_from_model(model) if isinstance(model, PauliLindbladModel) else model
    return compose(e, invert(m))


def diamond_norm_exact(v: PauliStochastishChannel) -> float:
    """``sum_m |nu_m|``, exact for maps with diagonal Pauli transfer matrix."""
    return float(np.sum(np.abs(v.coefficients())))


def diamond_distance_identity_exact(v: PauliStochastishChannel) -> float:
    """``|1 - nu_0| + sum_{m >= 1} |nu_m|``, the diamond distance of ``v`` to the identity."""
    nu = v.coefficients()
    return float(abs(1.0 - nu[0]) + np.sum(np.abs(nu[1:])))


def twirled_amplitude_damping(t1s: Sequence[float], t: float,
                              layer_id: str = "t1") -> PauliLindbladModel:
    """Pauli-twirled amplitude damping on each qubit for an evolution time ``t``.

    Qubit ``q`` receives X and Y generators with rate ``t / (4 T1_q)``, giving
    ``f_Z = exp(-t/T1)`` and ``f_X = f_Y = exp(-t/(2 T1))``.  Infinite T1 adds no terms.
    """
    if not t > 0:
        raise ValueError(f"evolution time must be positive, got {t}")
    n = len(t1s)
    terms = []
    for q, t1 in enumerate(t1s):
        if not t1 > 0:
            raise ValueError(f"T1 must be positive, got {t1} for qubit {q}")
        if math.isinf(t1):
            continue
        rate = t / (4.0 * t1)
        terms.append((PauliString.single(n, q, "X"), rate))
        terms.append((PauliString.single(n, q, "Y"), rate))
    return PauliLindbladModel(n, tuple(terms), layer_id)
