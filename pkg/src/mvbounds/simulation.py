"""Exact density-matrix simulation of layered circuits with Pauli Stochastish channels.

A layer is an "easy" layer of single-qubit unitaries, a "hard" layer (disjoint CNOT pairs
or an explicit unitary) and optionally the channel attached to it.  By default the channel
acts between the easy and the hard layer; ``channel_after_hard`` moves it after the hard
layer.  Channels are applied elementwise on the Pauli coefficients of the state.

Simulations are batched: easy gates and hard unitaries may carry a leading batch axis so
that many random circuits sharing the same channels evolve together.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .channels import PauliStochastishChannel, compose, invert
from .pauli import (
    PauliString,
    as_pauli,
    density_to_pauli_array,
    pauli_array_to_density,
)

MAX_SIM_QUBITS = 10


@dataclass
class Layer:
    easy: np.ndarray | None = None
    hard: Sequence[tuple[int, int]] | np.ndarray | None = None
    channel: PauliStochastishChannel | None = None


@dataclass
class LayeredCircuit:
    n: int
    layers: list[Layer] = field(default_factory=list)
    channel_after_hard: bool = False

    def __post_init__(self):
        if not 1 <= self.n <= MAX_SIM_QUBITS:
            raise ValueError(f"exact simulation supports 1..{MAX_SIM_QUBITS} qubits, got {self.n}")
        for k, layer in enumerate(self.layers):
            if layer.easy is not None:
                easy = np.asarray(layer.easy)
                if easy.shape[-3:] != (self.n, 2, 2):
                    raise ValueError(f"layer {k}: easy gates must have shape (..., {self.n}, 2, 2)")
            hard = layer.hard
            if hard is not None and not isinstance(hard, np.ndarray):
                used = set()
                for c, t in hard:
                    if not (0 <= c < self.n and 0 <= t < self.n) or c == t:
                        raise ValueError(f"layer {k}: invalid CNOT ({c}, {t})")
                    if c in used or t in used:
                        raise ValueError(f"layer {k}: CNOT pairs overlap")
                    used.update((c, t))
            if layer.channel is not None and layer.channel.n != self.n:
                raise ValueError(f"layer {k}: channel acts on {layer.channel.n} qubits")

    def with_channels(self, channels: Sequence[PauliStochastishChannel | None]) -> "LayeredCircuit":
        if len(channels) != len(self.layers):
            raise ValueError("one channel per layer is required")
        layers = [Layer(l.easy, l.hard, ch) for l, ch in zip(self.layers, channels)]
        return LayeredCircuit(self.n, layers, self.channel_after_hard)

    def ideal(self) -> "LayeredCircuit":
        return self.with_channels([None] * len(self.layers))


def initial_state(n: int, spec="zero") -> np.ndarray:
    """Density matrix from ``"zero"``, a computational basis bitstring, a state vector or a matrix."""
    d = 2**n
    if isinstance(spec, str):
        bits = "0" * n if spec == "zero" else spec
        if len(bits) != n or set(bits) - {"0", "1"}:
            raise ValueError(f"invalid initial state {spec!r}")
        rho = np.zeros((d, d), dtype=complex)
        i = int(bits, 2)
        rho[i, i] = 1.0
        return rho
    arr = np.asarray(spec, dtype=complex)
    if arr.shape == (d,):
        norm = np.linalg.norm(arr)
        if not np.isclose(norm, 1.0):
            raise ValueError("state vector must be normalized")
        return np.outer(arr, arr.conj())
    if arr.shape == (d, d):
        if not np.allclose(arr, arr.conj().T) or not np.isclose(np.trace(arr).real, 1.0):
            raise ValueError("density matrix must be Hermitian with unit trace")
        return arr
    raise ValueError(f"initial state has shape {arr.shape}, expected ({d},) or ({d}, {d})")


def _kron_batch(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    da, db = a.shape[-1], b.shape[-1]
    out = a[..., :, None, :, None] * b[..., None, :, None, :]
    return out.reshape(out.shape[:-4] + (da * db, da * db))


def _easy_unitary(easy: np.ndarray) -> np.ndarray:
    u = easy[..., 0, :, :]
    for q in range(1, easy.shape[-3]):
        u = _kron_batch(u, easy[..., q, :, :])
    return u


def cnot_permutation(n: int, pairs: Sequence[tuple[int, int]]) -> np.ndarray:
    """Basis permutation of a layer of disjoint CNOTs (an involution); qubit 0 is the top bit."""
    idx = np.arange(2**n)
    out = idx.copy()
    for c, t in pairs:
        cbit = (idx >> (n - 1 - c)) & 1
        out = out ^ (cbit << (n - 1 - t))
    return out


def _conj(rho: np.ndarray, u: np.ndarray) -> np.ndarray:
    return u @ rho @ np.conj(np.swapaxes(u, -1, -2))


def _apply_channel(rho: np.ndarray, channel: PauliStochastishChannel, n: int) -> np.ndarray:
    c = density_to_pauli_array(rho) * channel.values
    return pauli_array_to_density(c, n)


def evolve(circuit: LayeredCircuit, rho0="zero") -> np.ndarray:
    """Final density matrix (batched when gates carry a batch axis)."""
    n = circuit.n
    rho = initial_state(n, rho0) if not isinstance(rho0, np.ndarray) or rho0.ndim < 3 else rho0
    for layer in circuit.layers:
        if layer.easy is not None:
            rho = _conj(rho, _easy_unitary(np.asarray(layer.easy, dtype=complex)))
        if layer.channel is not None and not circuit.channel_after_hard:
            rho = _apply_channel(rho, layer.channel, n)
        hard = layer.hard
        if hard is not None:
            if isinstance(hard, np.ndarray):
                rho = _conj(rho, hard)
            elif len(hard):
                perm = cnot_permutation(n, hard)
                rho = rho[..., perm, :][..., :, perm]
        if layer.channel is not None and circuit.channel_after_hard:
            rho = _apply_channel(rho, layer.channel, n)
    return rho


def final_pauli_expectations(circuit: LayeredCircuit, rho0="zero") -> np.ndarray:
    """``Tr[P rho_out]`` for every Pauli ``P`` (last axis, dense index order)."""
    return density_to_pauli_array(evolve(circuit, rho0))


def exact_expectation(circuit: LayeredCircuit, rho0, observable: PauliString | str):
    """``Tr[C(rho0) O]`` for a Pauli observable; an array if the circuit is batched."""
    o = as_pauli(observable)
    if o.n != circuit.n:
        raise ValueError("observable acts on the wrong number of qubits")
    out = final_pauli_expectations(circuit, rho0)[..., o.index]
    return float(out) if np.ndim(out) == 0 else out


def mitigated_maps(actual: Sequence[PauliStochastishChannel],
                   model: Sequence[PauliStochastishChannel]) -> list[PauliStochastishChannel]:
    if len(actual) != len(model):
        raise ValueError("actual and model channel lists differ in length")
    return [compose(e, invert(m)) for e, m in zip(actual, model)]


def mitigated_delta(circuit: LayeredCircuit, actual: Sequence[PauliStochastishChannel],
                    model: Sequence[PauliStochastishChannel], rho0, observable: PauliString | str):
    """Systematic error ``|ideal - mitigated|`` of infinite-sample PEC.

    The mitigated circuit carries ``V_k = E_k Ehat_k^{-1}`` at hard layer ``k``.
    """
    maps = mitigated_maps(actual, model)
    ideal = exact_expectation(circuit.ideal(), rho0, observable)
    mitigated = exact_expectation(circuit.with_channels(maps), rho0, observable)
    return np.abs(np.asarray(ideal) - np.asarray(mitigated)) if np.ndim(ideal) else abs(ideal - mitigated)


def haar_su2(rng: np.random.Generator, shape: tuple[int, ...] = ()) -> np.ndarray:
    """Haar-random SU(2) matrices from normalized Gaussian quaternions; shape ``shape + (2, 2)``."""
    q = rng.normal(size=shape + (4,))
    q /= np.linalg.norm(q, axis=-1, keepdims=True)
    a = q[..., 0] + 1j * q[..., 1]
    b = q[..., 2] + 1j * q[..., 3]
    u = np.empty(shape + (2, 2), dtype=complex)
    u[..., 0, 0] = a
    u[..., 0, 1] = -np.conj(b)
    u[..., 1, 0] = b
    u[..., 1, 1] = np.conj(a)
    return u


# -- Clifford perturbation counterexample -----------------------------------------------------

def pauli_rotation(p: PauliString | str, theta) -> np.ndarray:
    """``exp(-i theta P / 2)``; ``theta`` may be an array, giving a batch of unitaries."""
    pm = as_pauli(p).to_matrix()
    theta = np.asarray(theta, dtype=float)
    eye = np.eye(pm.shape[0])
    c = np.cos(theta / 2)[..., None, None]
    s = np.sin(theta / 2)[..., None, None]
    return c * eye - 1j * s * pm


def cpt_hessian(depth: int, r_o: float, r_po: float, tr_rho_o: float = 1.0) -> np.ndarray:
    """Closed-form Hessian at the Clifford point of the signed error of the rotation circuit.

    Entry ``(m, a)`` is ``-(1 - r_po**|m-a| * r_o**(depth - |m-a|)) * Tr[rho O]``.
    """
    if depth < 1:
        raise ValueError("depth must be at least 1")
    if r_o <= 0 or r_po <= 0:
        raise ValueError("fidelity ratios must be positive")
    k = np.abs(np.subtract.outer(np.arange(depth), np.arange(depth)))
    return -(1.0 - np.power(r_po, k) * np.power(r_o, depth - k)) * tr_rho_o


def counterexample_circuit(thetas, r_o: float = 0.9, r_po: float = 1.0,
                           rotation: str = "X", observable: str = "Z") -> LayeredCircuit:
    """Single-qubit ``prod_k U(P, theta_k) V``: the map ``V`` then the rotation at every layer.

    ``V`` has ratio ``r_o`` on the observable and ``r_po`` on the other two Paulis (the two
    that anticommute with the rotation axis or the observable share the value here).
    ``thetas`` has shape ``(depth,)`` or ``(batch, depth)``.
    """
    thetas = np.asarray(thetas, dtype=float)
    depth = thetas.shape[-1]
    o = as_pauli(observable)
    vals = np.full(4, float(r_po))
    vals[0] = 1.0
    vals[o.index] = r_o
    v = PauliStochastishChannel.from_array(vals)
    layers = [Layer(hard=pauli_rotation(rotation, thetas[..., k]), channel=v) for k in range(depth)]
    return LayeredCircuit(1, layers)


def signed_delta(thetas, r_o: float = 0.9, r_po: float = 1.0) -> np.ndarray:
    """``Tr[O (C(rho) - C_M(rho))]`` for O = Z, P = X, rho = |0><0|."""
    circ = counterexample_circuit(thetas, r_o, r_po)
    ideal = exact_expectation(circ.ideal(), "zero", "Z")
    mitigated = exact_expectation(circ, "zero", "Z")
    return np.asarray(ideal) - np.asarray(mitigated)


def cpt_subset_sum(thetas: Sequence[float], r_o: float, r_po: float,
                   tr_rho_o: float = 1.0, tr_rho_po: complex = 0.0) -> float:
    """Signed error by explicit enumeration of Clifford-perturbation terms.

    Sums over every set of layers at which the rotation acts non-trivially; between
    consecutive pairs of such layers the observable is carried as ``PO``.  Exponential in
    depth, intended as a cross-check for small circuits.
    """
    thetas = np.asarray(thetas, dtype=float)
    depth = len(thetas)
    s, c = np.sin(thetas), np.cos(thetas)
    total = 0.0 + 0.0j
    for k in range(depth + 1):
        trace = tr_rho_o if k % 2 == 0 else tr_rho_po
        if trace == 0:
            continue
        e_k = 0.0
        for subset in itertools.combinations(range(depth), k):
            chosen = set(subset)
            # layer m carries PO when an odd number of chosen layers lie at or after m
            n_po = sum(1 for m in range(depth) if sum(1 for j in subset if j >= m) % 2 == 1)
            weight = 1.0
            for m in range(depth):
                weight *= s[m] if m in chosen else c[m]
            e_k += (1.0 - r_po**n_po * r_o ** (depth - n_po)) * weight
        total += (1j) ** k * trace * e_k
    return float(total.real)


@dataclass
class HessianScanResult:
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray
    dtheta: np.ndarray
    # traces[j, i] = |signed error| at dtheta[i] along eigenvector j
    traces: np.ndarray
    worst_case_clifford: float

    @property
    def n_positive(self) -> int:
        return int(np.sum(self.eigenvalues > 0))

    def exceeds_clifford(self) -> np.ndarray:
        """Per eigenvector: does the scan rise above the worst-case Clifford value anywhere?"""
        return self.traces.max(axis=1) > self.worst_case_clifford


def cpt_counterexample_scan(depth: int = 25, r_o: float = 0.9, r_po: float = 1.0,
                            dtheta: Sequence[float] | None = None) -> HessianScanResult:
    """Scan the signed-error magnitude along every Hessian eigenvector from the Clifford point."""
    if dtheta is None:
        dtheta = np.linspace(-0.5, 0.5, 101)
    dtheta = np.asarray(dtheta, dtype=float)
    h = cpt_hessian(depth, r_o, r_po)
    evals, evecs = np.linalg.eigh(h)
    traces = np.empty((depth, len(dtheta)))
    for j in range(depth):
        thetas = dtheta[:, None] * evecs[:, j][None, :]
        traces[j] = np.abs(signed_delta(thetas, r_o, r_po))
    return HessianScanResult(evals, evecs, dtheta, traces, 1.0 - r_o**depth)


def finite_difference_hessian(fun, x0: np.ndarray, step: float = 1e-4) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    k = len(x0)
    eye = np.eye(k) * step
    pts = []
    for i in range(k):
        for j in range(k):
            pts += [x0 + eye[i] + eye[j], x0 + eye[i] - eye[j], x0 - eye[i] + eye[j], x0 - eye[i] - eye[j]]
    vals = np.asarray(fun(np.array(pts))).reshape(k, k, 4)
    return (vals[..., 0] - vals[..., 1] - vals[..., 2] + vals[..., 3]) / (4 * step * step)


def finite_difference_gradient(fun, x0: np.ndarray, step: float = 1e-5) -> np.ndarray:
    x0 = np.asarray(x0, dtype=float)
    eye = np.eye(len(x0)) * step
    vals = np.asarray(fun(np.concatenate([x0 + eye, x0 - eye])))
    k = len(x0)
    return (vals[:k] - vals[k:]) / (2 * step)
