"""Upper bounds on the systematic error of model-based error mitigation.

Every PEC bound here has the layered form ``sum_j d_j * prod_{k<j} w_k``: a per-layer
distance of the mitigated map ``V_j = E_j Ehat_j^{-1}`` from the identity, weighted by the
diamond norms (or their upper bounds) of the maps applied before it.

Per-layer data are fidelity ratios ``r_k = f_meas / f_mod``.  Ratios that were not measured
are imputed as 1, i.e. no observed violation; all sums run over deviations ``r_k - 1`` so
that partial data on many qubits never needs a dense ``4**n`` vector.
"""
from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import numpy as np

from .channels import PauliLindbladModel, PauliStochastishChannel
from .pauli import PauliString, as_pauli


@dataclass(frozen=True)
class LayerRatioData:
    """Fidelity ratios of one mitigated layer and the overhead ``gamma`` of its model."""

    n: int
    measured_ratios: Mapping[PauliString, float]
    gamma: float = 1.0
    layer_id: str = "layer"

    def __post_init__(self):
        ratios = {}
        for p, r in self.measured_ratios.items():
            p = as_pauli(p)
            r = float(r)
            if p.n != self.n:
                raise ValueError(f"Pauli {p} does not act on {self.n} qubits")
            if not r > 0:
                raise ValueError(f"ratio for {p} must be positive, got {r}")
            if p.is_identity() and r != 1.0:
                raise ValueError("identity ratio must equal 1")
            ratios[p] = r
        object.__setattr__(self, "measured_ratios", ratios)
        if not self.gamma >= 1.0:
            raise ValueError(f"gamma must be >= 1, got {self.gamma}")

    @classmethod
    def from_channel(cls, v: PauliStochastishChannel, gamma: float = 1.0,
                     layer_id: str = "layer") -> "LayerRatioData":
        """Full ratio data from a mitigated map known on every Pauli."""
        ratios = {PauliString.from_index(i, v.n): float(r) for i, r in enumerate(v.values)}
        return cls(v.n, ratios, gamma, layer_id)

    @classmethod
    def from_fidelities(cls, f_meas: Mapping[PauliString, float], f_mod: Mapping[PauliString, float],
                        gamma: float = 1.0, layer_id: str = "layer") -> "LayerRatioData":
        ratios = {p: f_meas[p] / f_mod[p] for p in f_meas}
        n = next(iter(ratios)).n
        return cls(n, ratios, gamma, layer_id)

    @property
    def dimension(self) -> int:
        return 4**self.n

    def deviations(self) -> np.ndarray:
        """``r_k - 1`` for the measured non-identity ratios."""
        return np.array([r - 1.0 for p, r in self.measured_ratios.items() if not p.is_identity()])

    def nonidentity_ratios(self) -> list[float]:
        return [r for p, r in self.measured_ratios.items() if not p.is_identity()]

    @property
    def coverage(self) -> float:
        """Fraction of the ``4**n`` ratios that were measured (identity counts as known)."""
        k = sum(1 for p in self.measured_ratios if not p.is_identity())
        return (k + 1) / self.dimension


def nu0_estimate(layer: LayerRatioData) -> float:
    """Generalized process fidelity ``sum_k r_k / 4**n`` with unmeasured ratios set to 1."""
    if not layer.measured_ratios:
        raise ValueError("no ratios measured for this layer")
    d = layer.deviations()
    return 1.0 + float(np.sum(d)) / layer.dimension


def two_norm_term(deviations: Sequence[float] | np.ndarray, n: int) -> float:
    """``T = (N-1)/N * sqrt(sum_k r_k (r_k - sum_{m!=k} r_m / (N-1)))`` with ``N = 4**n``.

    Written through ``d_k = r_k - 1`` as ``sqrt(N-1)/N * sqrt(N sum d^2 - (sum d)^2)``;
    entries absent from ``deviations`` have ``d = 0``.  The radicand is clamped at zero.
    Also used with fidelity differences for the amplification bound.
    """
    d = np.asarray(deviations, dtype=float)
    big_n = 4.0**n
    s1 = float(np.sum(d))
    s2 = float(np.sum(d * d))
    radicand = max(big_n * s2 - s1 * s1, 0.0)
    return math.sqrt(big_n - 1.0) / big_n * math.sqrt(radicand)


def layer_distance_two_norm(layer: LayerRatioData) -> float:
    """Upper bound ``|1 - nu_0| + T`` on the diamond distance of one layer to the identity."""
    return abs(1.0 - nu0_estimate(layer)) + two_norm_term(layer.deviations(), layer.n)


def layer_distance_gamma(layer: LayerRatioData) -> float:
    nu0 = nu0_estimate(layer)
    return abs(1.0 - nu0) + layer.gamma - nu0


def _weighted_sum(distances: Sequence[float], weights: Sequence[float]) -> float:
    total, prefix = 0.0, 1.0
    for d, w in zip(distances, weights):
        total += d * prefix
        prefix *= w
    return total


def delta_gamma(layers: Sequence[LayerRatioData]) -> float:
    """Bound that replaces ``||V||`` by ``gamma`` both in the distance and in the weights."""
    return _weighted_sum([layer_distance_gamma(l) for l in layers], [l.gamma for l in layers])


def delta_two(layers: Sequence[LayerRatioData]) -> float:
    """Bound built on the two-norm estimate of each layer's distance to the identity."""
    return _weighted_sum([layer_distance_two_norm(l) for l in layers], [l.gamma for l in layers])


def delta_cptp(nu0s: Iterable[float]) -> float:
    """``2 * sum_j (1 - nu0_j)``, valid when every mitigated map is CPTP."""
    total = 0.0
    for nu0 in nu0s:
        if not 0.0 <= nu0 <= 1.0:
            raise ValueError(f"process fidelity must lie in [0, 1], got {nu0}")
        total += 1.0 - nu0
    return 2.0 * total


def worst_case_clifford(layers: Sequence[LayerRatioData]) -> float:
    """Largest deviation from 1 of the product of per-layer extreme ratios.

    Only measured non-identity ratios enter; this is a heuristic, not a bound.
    """
    hi, lo = 1.0, 1.0
    for layer in layers:
        rs = layer.nonidentity_ratios()
        if not rs:
            raise ValueError(f"layer {layer.layer_id!r} has no measured non-identity ratio")
        hi *= max(rs)
        lo *= min(rs)
    return max(abs(1.0 - hi), abs(1.0 - lo))


def tem_bound(layers: Sequence[LayerRatioData]) -> float:
    """Bound for tensor-network mitigation, with ``gamma`` of each layer's model as weight.

    The last layer is weighted by the models of layers ``1..l-1``; every earlier layer ``k``
    by layers ``1..k``.
    """
    if not layers:
        return 0.0
    d = [layer_distance_two_norm(l) for l in layers]
    g = [l.gamma for l in layers]
    total, prefix = 0.0, 1.0
    for k in range(len(layers) - 1):
        prefix *= g[k]
        total += d[k] * prefix
    return total + d[-1] * float(np.prod(g[:-1]))


# -- model comparison ------------------------------------------------------------------------

def _merged_rates(actual: PauliLindbladModel, mitigator: PauliLindbladModel):
    if actual.n != mitigator.n:
        raise ValueError(f"qubit count mismatch: {actual.n} vs {mitigator.n}")
    a, m = actual.rate_map(), mitigator.rate_map()
    keys = sorted(set(a) | set(m), key=lambda p: p.index)
    return [(a.get(p, 0.0), m.get(p, 0.0)) for p in keys]


def compare_layer(actual: PauliLindbladModel, mitigator: PauliLindbladModel) -> tuple[float, float]:
    """``(distance bound, norm)`` of one layer's mitigated map from single-term factors.

    Each generator contributes ``W_m`` with fidelity ratio ``x = exp(-2(rate - rate_hat))``
    on anticommuting Paulis, for which ``||I - W|| = |1 - x|`` and ``||W|| = max(x, 1)``.
    """
    dist, prefix = 0.0, 1.0
    for lam, lam_hat in _merged_rates(actual, mitigator):
        x = math.exp(-2.0 * (lam - lam_hat))
        dist += abs(1.0 - x) * prefix
        prefix *= 0.5 * (abs(1.0 + x) + abs(1.0 - x))
    return dist, prefix


def compare_models(actual: PauliLindbladModel | Sequence[PauliLindbladModel],
                   mitigator: PauliLindbladModel | Sequence[PauliLindbladModel],
                   n_layers: int | None = None) -> float:
    """Diamond-distance bound when ``mitigator`` is used to cancel ``actual``, layer by layer.

    Pass either per-layer sequences of equal length or single models repeated ``n_layers``
    times.
    """
    if isinstance(actual, PauliLindbladModel):
        actual = [actual] * (n_layers or 1)
    if isinstance(mitigator, PauliLindbladModel):
        mitigator = [mitigator] * (n_layers or len(actual))
    actual, mitigator = list(actual), list(mitigator)
    if len(actual) != len(mitigator):
        raise ValueError("actual and mitigator layer sequences differ in length")
    dists, norms = zip(*(compare_layer(a, m) for a, m in zip(actual, mitigator))) if actual else ((), ())
    return _weighted_sum(dists, norms)


# -- probabilistic error amplification --------------------------------------------------------

def pea_layer_distance(f_meas: np.ndarray, f_mod: np.ndarray, mu: float, n: int) -> float:
    delta = np.power(f_meas, mu) - np.power(f_mod, mu)
    return abs(float(np.sum(delta))) / 4.0**n + two_norm_term(delta, n)


def pea_bound(f_meas, f_mod, mus: Sequence[float], n_layers: int = 1):
    """Per-amplification bounds ``eta(mu)`` and the rank-one covariance ``eta eta^T``.

    ``f_meas`` and ``f_mod`` are full fidelity vectors (PauliVector, channel or array) of a
    layer repeated ``n_layers`` times, or equal-length lists of them, one per layer.
    """
    def values(v):
        if isinstance(v, PauliStochastishChannel):
            return v.values
        return np.asarray(getattr(v, "values", v), dtype=float)

    if isinstance(f_meas, (list, tuple)):
        meas = [values(v) for v in f_meas]
        mod = [values(v) for v in f_mod]
        if len(meas) != len(mod):
            raise ValueError("per-layer fidelity lists differ in length")
    else:
        meas = [values(f_meas)] * n_layers
        mod = [values(f_mod)] * n_layers
    etas = []
    for mu in mus:
        if mu < 0:
            raise ValueError(f"amplification factor must be nonnegative, got {mu}")
        total = 0.0
        for fm, fh in zip(meas, mod):
            n = int(round(math.log(fm.size, 4))) if fm.size > 1 else 0
            total += pea_layer_distance(fm, fh, mu, n)
        etas.append(total)
    eta = np.array(etas)
    return eta, np.outer(eta, eta)


def zne_linear_fit(mus: Sequence[float], values: Sequence[float], cov: np.ndarray | None = None,
                   stat_cov: np.ndarray | None = None):
    """Linear extrapolation to zero noise with a systematic-error covariance.

    With ``stat_cov`` the fit is generalized least squares on ``stat_cov + cov``; otherwise it
    is ordinary least squares with ``cov`` propagated into the parameter covariance (the
    rank-one model-violation covariance alone is singular).  Returns
    ``(intercept, slope, param_cov)``.
    """
    x = np.column_stack([np.ones(len(mus)), np.asarray(mus, dtype=float)])
    y = np.asarray(values, dtype=float)
    k = len(y)
    cov = np.zeros((k, k)) if cov is None else np.asarray(cov, dtype=float)
    if stat_cov is not None:
        winv = np.linalg.inv(np.asarray(stat_cov, dtype=float) + cov)
        pcov = np.linalg.inv(x.T @ winv @ x)
        beta = pcov @ x.T @ winv @ y
    else:
        a = np.linalg.pinv(x)
        beta = a @ y
        pcov = a @ cov @ a.T
    return float(beta[0]), float(beta[1]), pcov


# -- reporting --------------------------------------------------------------------------------

@dataclass
class BoundReport:
    n: int
    layers: list[dict] = field(default_factory=list)
    delta_gamma: float = 0.0
    delta_two: float = 0.0
    delta_min: float = 0.0
    worst_case_clifford: float = 0.0
    coverage: float = 1.0

    @property
    def depth(self) -> int:
        return len(self.layers)

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "depth": self.depth,
            "totals": {
                "delta_gamma": self.delta_gamma,
                "delta_two": self.delta_two,
                "delta_min": self.delta_min,
                "worst_case_clifford": self.worst_case_clifford,
            },
            "coverage": self.coverage,
            "layers": self.layers,
        }

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        cols = ["index", "layer_id", "nu0_estimate", "T_term", "gamma", "dd_gamma", "dd_2norm", "coverage"]
        w.writerow(cols)
        for i, row in enumerate(self.layers):
            w.writerow([i, row["layer_id"]] + [format(row[c], ".17g") for c in cols[2:]])
        return buf.getvalue()


def bound_report(layers: Sequence[LayerRatioData]) -> BoundReport:
    if not layers:
        raise ValueError("at least one layer is required")
    rows = []
    for l in layers:
        nu0 = nu0_estimate(l)
        t = two_norm_term(l.deviations(), l.n)
        rows.append({
            "layer_id": l.layer_id,
            "nu0_estimate": nu0,
            "T_term": t,
            "gamma": l.gamma,
            "dd_gamma": abs(1.0 - nu0) + l.gamma - nu0,
            "dd_2norm": abs(1.0 - nu0) + t,
            "coverage": l.coverage,
        })
    dg, d2 = delta_gamma(layers), delta_two(layers)
    return BoundReport(
        n=layers[0].n,
        layers=rows,
        delta_gamma=dg,
        delta_two=d2,
        delta_min=min(dg, d2),
        worst_case_clifford=worst_case_clifford(layers),
        coverage=float(np.mean([l.coverage for l in layers])),
    )
