"""Bit-level n-qubit Pauli operators and the transforms used by every channel computation.

Conventions
-----------
* Text labels are uppercase strings over ``IXYZ``; the leftmost character is qubit 0.
* Each qubit carries a two-bit code ``x + 2 z`` so that ``I=0, X=1, Z=2, Y=3``.
* The dense index of an n-qubit Pauli concatenates the per-qubit codes with qubit 0 as the
  most significant base-4 digit.  A length ``4**n`` vector reshaped to ``(4,) * n`` therefore
  has axis ``q`` equal to qubit ``q``, and every per-qubit transform is a 4x4 kernel applied
  along one axis.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

MAX_QUBITS = 12

_CODE_TO_CHAR = "IXZY"
_CHAR_TO_CODE = {c: i for i, c in enumerate(_CODE_TO_CHAR)}

# single-qubit Pauli matrices in code order I, X, Z, Y
PAULI_MATRICES = np.array(
    [
        [[1, 0], [0, 1]],
        [[0, 1], [1, 0]],
        [[1, 0], [0, -1]],
        [[0, -1j], [1j, 0]],
    ],
    dtype=complex,
)

# (-1)^<a,b> for single-qubit codes a, b
_COMMUTATION_KERNEL = np.array(
    [
        [1, 1, 1, 1],
        [1, 1, -1, -1],
        [1, -1, 1, -1],
        [1, -1, -1, 1],
    ],
    dtype=float,
)


def _check_n(n: int) -> None:
    if n < 0:
        raise ValueError(f"qubit count must be nonnegative, got {n}")
    if n > MAX_QUBITS:
        raise ValueError(f"dense Pauli vectors are limited to n <= {MAX_QUBITS}, got n={n}")


@dataclass(frozen=True)
class PauliString:
    """An n-qubit Pauli operator (without phase) in symplectic form.

    Qubit ``q`` carries X if ``x_bits[q]``, Z if ``z_bits[q]`` and Y if both.
    """

    n: int
    x_bits: tuple[int, ...]
    z_bits: tuple[int, ...]

    def __post_init__(self):
        if len(self.x_bits) != self.n or len(self.z_bits) != self.n:
            raise ValueError(
                f"bit vectors must have length n={self.n}, "
                f"got {len(self.x_bits)} and {len(self.z_bits)}"
            )
        object.__setattr__(self, "x_bits", tuple(int(b) & 1 for b in self.x_bits))
        object.__setattr__(self, "z_bits", tuple(int(b) & 1 for b in self.z_bits))

    @classmethod
    def from_label(cls, label: str) -> "PauliString":
        label = label.strip().upper()
        try:
            codes = [_CHAR_TO_CODE[c] for c in label]
        except KeyError as exc:
            raise ValueError(f"invalid Pauli label {label!r}") from exc
        return cls(len(codes), tuple(c & 1 for c in codes), tuple(c >> 1 for c in codes))

    @classmethod
    def identity(cls, n: int) -> "PauliString":
        return cls(n, (0,) * n, (0,) * n)

    @classmethod
    def from_index(cls, index: int, n: int) -> "PauliString":
        _check_n(n)
        if not 0 <= index < 4**n:
            raise ValueError(f"index {index} out of range for n={n}")
        codes = []
        for _ in range(n):
            codes.append(index & 3)
            index >>= 2
        codes.reverse()
        return cls(n, tuple(c & 1 for c in codes), tuple(c >> 1 for c in codes))

    @classmethod
    def single(cls, n: int, qubit: int, char: str) -> "PauliString":
        """Weight-one Pauli ``char`` on ``qubit`` of an n-qubit register."""
        label = ["I"] * n
        label[qubit] = char
        return cls.from_label("".join(label))

    @property
    def label(self) -> str:
        return "".join(_CODE_TO_CHAR[x + 2 * z] for x, z in zip(self.x_bits, self.z_bits))

    @property
    def codes(self) -> tuple[int, ...]:
        return tuple(x + 2 * z for x, z in zip(self.x_bits, self.z_bits))

    @property
    def index(self) -> int:
        idx = 0
        for c in self.codes:
            idx = 4 * idx + c
        return idx

    @property
    def weight(self) -> int:
        return sum(1 for x, z in zip(self.x_bits, self.z_bits) if x or z)

    @property
    def support(self) -> tuple[int, ...]:
        return tuple(q for q, (x, z) in enumerate(zip(self.x_bits, self.z_bits)) if x or z)

    def is_identity(self) -> bool:
        return not any(self.x_bits) and not any(self.z_bits)

    def to_matrix(self) -> np.ndarray:
        mat = np.ones((1, 1), dtype=complex)
        for c in self.codes:
            mat = np.kron(mat, PAULI_MATRICES[c])
        return mat

    def __str__(self) -> str:
        return self.label

    def __repr__(self) -> str:
        return f"PauliString({self.label!r})"


def as_pauli(p: PauliString | str) -> PauliString:
    return p if isinstance(p, PauliString) else PauliString.from_label(p)


def symplectic_product(p: PauliString | str, q: PauliString | str) -> int:
    """Return 0 if ``p`` and ``q`` commute and 1 if they anticommute."""
    p, q = as_pauli(p), as_pauli(q)
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")
    s = 0
    for xp, zp, xq, zq in zip(p.x_bits, p.z_bits, q.x_bits, q.z_bits):
        s ^= (xp & zq) ^ (zp & xq)
    return s


def multiply(p: PauliString | str, q: PauliString | str) -> tuple[PauliString, int]:
    """Product ``p @ q = i**k * r``; returns ``(r, k)`` with ``k`` in ``{0, 1, 2, 3}``."""
    p, q = as_pauli(p), as_pauli(q)
    if p.n != q.n:
        raise ValueError(f"qubit count mismatch: {p.n} vs {q.n}")
    # write each factor as i^{xz} X^x Z^z, then Z^z1 X^x2 = (-1)^{z1 x2} X^x2 Z^z1
    k = 0
    xs, zs = [], []
    for x1, z1, x2, z2 in zip(p.x_bits, p.z_bits, q.x_bits, q.z_bits):
        x3, z3 = x1 ^ x2, z1 ^ z2
        k += x1 * z1 + x2 * z2 + 2 * z1 * x2 - x3 * z3
        xs.append(x3)
        zs.append(z3)
    return PauliString(p.n, tuple(xs), tuple(zs)), k % 4


@lru_cache(maxsize=None)
def pauli_codes(n: int) -> np.ndarray:
    """Per-qubit codes of every n-qubit Pauli, shape ``(4**n, n)``, rows in dense-index order."""
    _check_n(n)
    idx = np.arange(4**n, dtype=np.int64)
    shifts = 2 * np.arange(n - 1, -1, -1, dtype=np.int64)
    codes = (idx[:, None] >> shifts[None, :]) & 3
    codes.setflags(write=False)
    return codes


def all_paulis(n: int) -> list[PauliString]:
    return [PauliString.from_index(i, n) for i in range(4**n)]


def anticommutation_matrix(
    paulis: Sequence[PauliString] | np.ndarray, generators: Sequence[PauliString]
) -> np.ndarray:
    """0/1 matrix ``M[a, j] = <paulis[a], generators[j]>``.

    ``paulis`` may be a list of PauliString or an integer array of per-qubit codes
    (as returned by :func:`pauli_codes`).
    """
    if isinstance(paulis, np.ndarray):
        codes = paulis
    else:
        codes = np.array([p.codes for p in paulis], dtype=np.int64).reshape(len(paulis), -1)
    if not generators:
        return np.zeros((codes.shape[0], 0), dtype=np.int8)
    gcodes = np.array([g.codes for g in generators], dtype=np.int64)
    if gcodes.shape[1] != codes.shape[1]:
        raise ValueError("qubit count mismatch between Paulis and generators")
    px, pz = codes & 1, codes >> 1
    gx, gz = gcodes & 1, gcodes >> 1
    s = (px @ gz.T + pz @ gx.T) & 1
    return s.astype(np.int8)


@dataclass(frozen=True)
class PauliVector:
    """Real vector indexed by the dense Pauli index (entry 0 is the identity)."""

    n: int
    values: np.ndarray

    def __post_init__(self):
        _check_n(self.n)
        vals = np.array(self.values, dtype=float)
        if vals.shape != (4**self.n,):
            raise ValueError(f"PauliVector for n={self.n} needs length {4**self.n}, got {vals.shape}")
        if not np.all(np.isfinite(vals)):
            raise ValueError("PauliVector entries must be finite")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    def __getitem__(self, p: PauliString | str | int) -> float:
        if isinstance(p, (int, np.integer)):
            return float(self.values[p])
        return float(self.values[as_pauli(p).index])

    def __len__(self) -> int:
        return len(self.values)


def _apply_kernel(tensor: np.ndarray, kernel: np.ndarray, first_axis: int = 0) -> np.ndarray:
    """Contract ``kernel[a, b]`` against every axis of ``tensor`` from ``first_axis`` on."""
    out = tensor
    for axis in range(first_axis, tensor.ndim):
        out = np.moveaxis(np.tensordot(kernel, out, axes=([1], [axis])), 0, axis)
    return out


def _vector_values(v) -> tuple[int, np.ndarray]:
    if isinstance(v, PauliVector):
        return v.n, v.values
    arr = np.asarray(v, dtype=float)
    n = int(round(np.log(arr.size) / np.log(4))) if arr.size > 1 else 0
    if 4**n != arr.size or arr.ndim != 1:
        raise ValueError(f"vector length {arr.size} is not a power of 4")
    _check_n(n)
    return n, arr


def wht_commutation(v, normalize: bool = False):
    """Commutation-character transform ``w_m = sum_k (-1)^<m,k> v_k``.

    Divided by ``4**n`` when ``normalize`` is set, which maps Pauli fidelities to the
    Pauli error coefficients of the channel.  Runs in ``O(4**n * n)`` through the
    per-qubit 4x4 kernel; accepts a PauliVector (returned as PauliVector) or an array.
    """
    n, vals = _vector_values(v)
    if n == 0:
        out = vals.copy()
    else:
        out = _apply_kernel(vals.reshape((4,) * n), _COMMUTATION_KERNEL).reshape(-1)
    if normalize:
        out = out / 4**n
    return PauliVector(n, out) if isinstance(v, PauliVector) else out


def wht_dense_matrix(n: int) -> np.ndarray:
    """The explicit ``4**n x 4**n`` character matrix; only for cross-checks on small n."""
    codes = pauli_codes(n)
    return 1.0 - 2.0 * anticommutation_matrix(codes, all_paulis(n)).astype(float)


# T[a, r, c] = P_a[c, r] so that sum_{rc} T[a, r, c] rho[r, c] = Tr[P_a rho]
_TRACE_KERNEL = np.transpose(PAULI_MATRICES, (0, 2, 1)).reshape(4, 4)
# S[(r, c), a] = P_a[r, c] / 2
_SYNTH_KERNEL = (PAULI_MATRICES.reshape(4, 4).T / 2.0)


def _num_qubits_from_dim(dim: int) -> int:
    n = dim.bit_length() - 1
    if dim < 1 or 2**n != dim:
        raise ValueError(f"matrix dimension {dim} is not a power of two")
    _check_n(n)
    return n


def density_to_pauli_array(rho: np.ndarray) -> np.ndarray:
    """Batched ``c_P = Tr[P rho]`` over the last two axes; returns shape ``(..., 4**n)``."""
    rho = np.asarray(rho)
    if rho.ndim < 2 or rho.shape[-1] != rho.shape[-2]:
        raise ValueError(f"expected square matrices, got shape {rho.shape}")
    n = _num_qubits_from_dim(rho.shape[-1])
    batch = rho.shape[:-2]
    if n == 0:
        return np.real(rho).reshape(batch + (1,))
    b = len(batch)
    # (..., r0..r_{n-1}, c0..c_{n-1}) -> (..., r0, c0, r1, c1, ...) -> one length-4 axis per qubit
    t = rho.reshape(batch + (2,) * (2 * n))
    order = list(range(b)) + [b + ax for q in range(n) for ax in (q, n + q)]
    t = np.transpose(t, order).reshape(batch + (4,) * n)
    coeffs = _apply_kernel(t.astype(complex), _TRACE_KERNEL, first_axis=b)
    return np.real(coeffs).reshape(batch + (4**n,))


def pauli_array_to_density(c: np.ndarray, n: int) -> np.ndarray:
    """Batched inverse of :func:`density_to_pauli_array` for coefficients of shape ``(..., 4**n)``."""
    c = np.asarray(c)
    batch = c.shape[:-1]
    if n == 0:
        return c.reshape(batch + (1, 1)).astype(complex)
    b = len(batch)
    t = _apply_kernel(c.reshape(batch + (4,) * n).astype(complex), _SYNTH_KERNEL, first_axis=b)
    t = t.reshape(batch + (2,) * (2 * n))
    # (..., r0, c0, r1, c1, ...) -> (..., r0..r_{n-1}, c0..c_{n-1})
    order = list(range(b)) + [b + 2 * q for q in range(n)] + [b + 2 * q + 1 for q in range(n)]
    return np.transpose(t, order).reshape(batch + (2**n, 2**n))


def density_to_pauli_coeffs(rho: np.ndarray) -> PauliVector:
    """Pauli coefficients ``c_P = Tr[P rho]`` of a Hermitian ``2**n x 2**n`` matrix."""
    rho = np.asarray(rho)
    if rho.ndim != 2:
        raise ValueError(f"expected a square matrix, got shape {rho.shape}")
    vals = density_to_pauli_array(rho)
    return PauliVector(_num_qubits_from_dim(rho.shape[0]), vals)


def pauli_coeffs_to_density(c) -> np.ndarray:
    """Inverse of :func:`density_to_pauli_coeffs`: ``rho = sum_P c_P P / 2**n``."""
    n, vals = _vector_values(c)
    return pauli_array_to_density(vals, n)


def paulis_from_labels(labels: Iterable[str]) -> list[PauliString]:
    return [PauliString.from_label(s) for s in labels]
