"""Synthetic Pauli learning, decay fitting, degeneracy handling and sparse model fitting.

The fitting pipeline mirrors a Pauli-learning experiment: decay curves ``A f**d`` for each
measured Pauli are fit to extract fidelities, degenerate pairs are assigned the geometric
mean of the pair, and the generator rates of a sparse Pauli-Lindblad model are obtained by
non-negative least squares on ``-0.5 * log f = M @ rates``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np
from scipy.optimize import curve_fit

from .channels import PauliLindbladModel, PauliStochastishChannel, model_fidelities
from .nnls import NNLSResult, nnls
from .pauli import PauliString, anticommutation_matrix, as_pauli

DEFAULT_DEPTHS = (0, 2, 4, 16, 32, 64)


class FitError(RuntimeError):
    """A decay curve or model fit could not be carried out."""


@dataclass
class DecayCurve:
    """Twirled expectation values of one Pauli versus layer depth.

    ``counts`` holds the raw data when available: the number of +1 outcomes for every
    (depth, randomization) pair, each out of ``shots[depth]`` shots.
    """

    pauli: PauliString
    depths: np.ndarray
    expectations: np.ndarray
    shots: np.ndarray
    randomizations: np.ndarray
    counts: np.ndarray | None = None

    def __post_init__(self):
        self.pauli = as_pauli(self.pauli)
        self.depths = np.asarray(self.depths, dtype=int)
        self.expectations = np.asarray(self.expectations, dtype=float)
        k = len(self.depths)
        self.shots = np.broadcast_to(np.asarray(self.shots, dtype=int), (k,)).copy()
        self.randomizations = np.broadcast_to(np.asarray(self.randomizations, dtype=int), (k,)).copy()
        if self.expectations.shape != (k,):
            raise ValueError("one expectation value per depth is required")
        if np.any(self.depths < 0) or np.any(np.diff(self.depths) <= 0):
            raise ValueError("depths must be nonnegative and strictly increasing")
        if np.any(np.abs(self.expectations) > 1 + 1e-12):
            raise ValueError("expectation values must lie in [-1, 1]")
        if self.counts is not None:
            self.counts = np.asarray(self.counts, dtype=int)
            if self.counts.shape[0] != k:
                raise ValueError("counts need one row per depth")


@dataclass
class LearningRecord:
    """Measured Pauli fidelities of one layer and the generator set allowed in its model."""

    n: int
    layer_id: str
    fidelities: dict[PauliString, tuple[float, float]]
    degenerate_pairs: list[tuple[PauliString, PauliString]] = field(default_factory=list)
    generator_support: list[PauliString] = field(default_factory=list)
    curves: list[DecayCurve] | None = None

    def __post_init__(self):
        self.fidelities = {as_pauli(p): (float(f), float(s)) for p, (f, s) in self.fidelities.items()}
        self.degenerate_pairs = [(as_pauli(a), as_pauli(b)) for a, b in self.degenerate_pairs]
        self.generator_support = [as_pauli(p) for p in self.generator_support]
        for p in self.fidelities:
            if p.n != self.n:
                raise ValueError(f"Pauli {p} does not act on {self.n} qubits")
        for a, b in self.degenerate_pairs:
            if a not in self.fidelities or b not in self.fidelities:
                raise ValueError(f"degenerate pair ({a}, {b}) references an unmeasured Pauli")

    @property
    def paulis(self) -> list[PauliString]:
        return list(self.fidelities)

    def resolved_fidelities(self) -> dict[PauliString, float]:
        """Measured fidelities with every degenerate pair set to its geometric mean."""
        raw = {p: f for p, (f, _) in self.fidelities.items()}
        return resolve_degeneracy(raw, self.degenerate_pairs)

    def stderrs(self) -> dict[PauliString, float]:
        return {p: s for p, (_, s) in self.fidelities.items()}


@dataclass
class ModelFitResult:
    model: PauliLindbladModel
    rate_covariance: np.ndarray
    residuals: dict[PauliString, float]
    bootstrap_reps: int = 0
    nnls: NNLSResult | None = None

    def __post_init__(self):
        c = np.asarray(self.rate_covariance, dtype=float)
        k = len(self.model.terms)
        if c.shape != (k, k):
            raise ValueError(f"covariance must be {k}x{k}, got {c.shape}")
        self.rate_covariance = 0.5 * (c + c.T)


def line_edges(n: int) -> list[tuple[int, int]]:
    return [(q, q + 1) for q in range(n - 1)]


def pairwise_local_support(n: int, edges: Sequence[tuple[int, int]] | None = None) -> list[PauliString]:
    """All weight-one Paulis plus all weight-two Paulis on the coupled pairs, by dense index."""
    if edges is None:
        edges = line_edges(n)
    out = set()
    for q in range(n):
        for c in "XYZ":
            out.add(PauliString.single(n, q, c))
    for a, b in edges:
        if a == b or not (0 <= a < n and 0 <= b < n):
            raise ValueError(f"invalid edge ({a}, {b})")
        for ca in "XYZ":
            for cb in "XYZ":
                label = ["I"] * n
                label[a], label[b] = ca, cb
                out.add(PauliString.from_label("".join(label)))
    return sorted(out, key=lambda p: p.index)


def default_measured_paulis(n: int, edges: Sequence[tuple[int, int]] | None = None) -> list[PauliString]:
    """Measured set that makes the pairwise-local model identifiable."""
    return pairwise_local_support(n, edges)


def _seed_rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def synthesize_learning_data(
    truth: PauliStochastishChannel,
    paulis: Sequence[PauliString] | None = None,
    spam: float | Mapping[PauliString, float] = 1.0,
    depths: Sequence[int] = DEFAULT_DEPTHS,
    n_randomizations: int = 100,
    shots: int = 200,
    seed: int = 0,
    infinite_shots: bool = False,
) -> list[DecayCurve]:
    """Simulate the decay curves of a Pauli-learning experiment.

    Each randomization of depth ``d`` yields ``shots`` one-bit outcomes with mean
    ``spam_P * f_P**d``.  With ``infinite_shots`` the expectations are exact and no raw
    counts are produced.
    """
    if not truth.is_cptp(atol=1e-10):
        raise ValueError("the true channel must be CPTP to generate measurement data")
    if paulis is None:
        paulis = default_measured_paulis(truth.n)
    depths = np.asarray(depths, dtype=int)
    curves = []
    for p in map(as_pauli, paulis):
        a = spam.get(p, 1.0) if isinstance(spam, Mapping) else float(spam)
        if not 0.0 < a <= 1.0:
            raise ValueError(f"SPAM factor for {p} must lie in (0, 1], got {a}")
        mean = a * truth.fidelity(p) ** depths
        if infinite_shots:
            curves.append(DecayCurve(p, depths, mean, 0, 0))
            continue
        rng = _seed_rng(seed, p.index)
        p_plus = np.clip((1.0 + mean) / 2.0, 0.0, 1.0)
        counts = rng.binomial(shots, np.repeat(p_plus[:, None], n_randomizations, axis=1))
        expect = (2.0 * counts / shots - 1.0).mean(axis=1)
        curves.append(DecayCurve(p, depths, expect, shots, n_randomizations, counts))
    return curves


@dataclass(frozen=True)
class DecayFit:
    amplitude: float
    fidelity: float
    stderr: float
    ok: bool = True


def _exp_model(d, amp, f):
    return amp * np.power(f, d)


def fit_decay(curve: DecayCurve) -> DecayFit:
    """Fit ``A * f**d`` to a decay curve; ``A`` absorbs SPAM and ``f`` is clipped to (0, 1].

    Weighted by the binomial variance of each depth's mean when shot counts are known; the
    starting point comes from a log-linear fit over the positive points.
    """
    d = curve.depths.astype(float)
    y = curve.expectations
    pos = y > 0
    if np.count_nonzero(pos) < 2 or len(np.unique(d[pos])) < 2:
        return DecayFit(float("nan"), float("nan"), float("nan"), ok=False)
    slope, intercept = np.polyfit(d[pos], np.log(y[pos]), 1)
    p0 = (math.exp(intercept), math.exp(slope))

    total = curve.shots * curve.randomizations
    weighted = bool(np.all(total > 0))
    sigma = None
    if weighted:
        var = np.maximum(1.0 - y**2, 1.0 / total) / total
        sigma = np.sqrt(var)
    try:
        popt, pcov = curve_fit(
            _exp_model, d, y, p0=p0, sigma=sigma, absolute_sigma=weighted,
            xtol=1e-15, ftol=1e-15, gtol=1e-15, maxfev=10000,
        )
    except (RuntimeError, ValueError):
        popt, pcov = np.array(p0), np.full((2, 2), np.inf)
    amp, f = float(popt[0]), float(popt[1])
    if not f > 0:
        return DecayFit(amp, float("nan"), float("nan"), ok=False)
    err = float(np.sqrt(pcov[1, 1])) if np.isfinite(pcov[1, 1]) else 0.0
    return DecayFit(amp, min(f, 1.0), err)


def resolve_degeneracy(fidelities: Mapping[PauliString, float],
                       pairs: Sequence[tuple[PauliString, PauliString]]) -> dict[PauliString, float]:
    """Replace both members of each degenerate pair by the pair's geometric mean."""
    out = dict(fidelities)
    for a, b in pairs:
        fa, fb = fidelities[a], fidelities[b]
        if fa < 0 or fb < 0:
            raise ValueError(f"negative fidelity in degenerate pair ({a}, {b})")
        g = math.sqrt(fa * fb)
        out[a] = out[b] = g
    return out


def record_from_curves(curves: Sequence[DecayCurve], generator_support: Sequence[PauliString],
                       degenerate_pairs: Sequence[tuple[PauliString, PauliString]] = (),
                       layer_id: str = "layer", keep_curves: bool = True) -> LearningRecord:
    fids = {}
    for c in curves:
        fit = fit_decay(c)
        if not fit.ok:
            raise FitError(f"decay fit failed for {c.pauli}")
        fids[c.pauli] = (fit.fidelity, fit.stderr)
    n = curves[0].pauli.n
    return LearningRecord(n, layer_id, fids, list(degenerate_pairs), list(generator_support),
                          list(curves) if keep_curves else None)


def exact_learning_record(truth: PauliStochastishChannel, generator_support: Sequence[PauliString],
                          paulis: Sequence[PauliString] | None = None,
                          layer_id: str = "layer") -> LearningRecord:
    """Infinite-shot learning: measured fidelities equal the true ones, with zero error."""
    if paulis is None:
        paulis = default_measured_paulis(truth.n)
    fids = {p: (truth.fidelity(p), 0.0) for p in map(as_pauli, paulis)}
    return LearningRecord(truth.n, layer_id, fids, [], list(generator_support))


def design_matrix(paulis: Sequence[PauliString], support: Sequence[PauliString]) -> np.ndarray:
    return anticommutation_matrix(list(paulis), list(support)).astype(float)


def fit_model_nnls(record: LearningRecord, weighted: bool = False) -> ModelFitResult:
    """Fit generator rates on ``record.generator_support`` by NNLS in log-fidelity space.

    ``weighted`` scales each row by the inverse standard error of ``-0.5 log f``; every
    fidelity then needs a positive stderr.
    """
    if not record.generator_support:
        raise ValueError("generator_support is empty; nothing to fit")
    fids = record.resolved_fidelities()
    if not fids:
        raise ValueError("record has no measured fidelities")
    paulis = list(fids)
    f = np.array([fids[p] for p in paulis])
    if np.any(f <= 0):
        raise ValueError("all measured fidelities must be positive")
    a = design_matrix(paulis, record.generator_support)
    if np.linalg.matrix_rank(a) < a.shape[1]:
        raise FitError("design matrix is rank deficient; the generator support is not identifiable "
                       "from the measured Paulis")
    b = -0.5 * np.log(f)
    if weighted:
        err = np.array([record.fidelities[p][1] for p in paulis])
        if np.any(err <= 0):
            raise ValueError("weighted fit needs positive standard errors")
        w = 2.0 * f / err
        res = nnls(a * w[:, None], b * w)
    else:
        res = nnls(a, b)
    model = PauliLindbladModel(
        record.n, tuple(zip(record.generator_support, res.x.tolist())), record.layer_id
    )
    fmod = model_fidelities(model, paulis)
    residuals = {p: float(fm - fp) for p, fm, fp in zip(paulis, f, fmod)}
    k = len(model.terms)
    return ModelFitResult(model, np.zeros((k, k)), residuals, 0, res)


@dataclass
class BootstrapResult:
    fit: ModelFitResult
    fidelity_sigma: dict[PauliString, float]
    fidelity_samples: np.ndarray
    rate_samples: np.ndarray


def _resample_curve(curve: DecayCurve, rng: np.random.Generator) -> DecayCurve:
    counts = curve.counts
    n_rand = counts.shape[1]
    idx = rng.integers(0, n_rand, size=counts.shape)
    picked = np.take_along_axis(counts, idx, axis=1)
    shots = curve.shots[:, None]
    new = rng.binomial(shots, picked / shots)
    expect = (2.0 * new / shots - 1.0).mean(axis=1)
    return DecayCurve(curve.pauli, curve.depths, expect, curve.shots, curve.randomizations, new)


def _bootstrap_replica(curves, support, pairs, weighted, seed, rep):
    rng = _seed_rng(seed, 0x5EED, rep)
    boot = [_resample_curve(c, rng) for c in curves]
    record = record_from_curves(boot, support, pairs, keep_curves=False)
    fids = record.resolved_fidelities()
    fit = fit_model_nnls(record, weighted=weighted)
    return np.array([fids[c.pauli] for c in curves]), fit.model.rates


def bootstrap(curves: Sequence[DecayCurve], generator_support: Sequence[PauliString], n_reps: int,
              seed: int = 0, degenerate_pairs: Sequence[tuple[PauliString, PauliString]] = (),
              weighted: bool = False, layer_id: str = "layer", workers: int = 1) -> BootstrapResult:
    """Two-fold bootstrap of the whole learning pipeline.

    Each replica resamples the randomizations at every depth with replacement, redraws the
    shot counts of each chosen randomization from its binomial distribution, and refits
    decay curves and model.  Replica ``i`` draws from a stream seeded by ``(seed, i)``, so
    results do not depend on ``workers``.
    """
    if n_reps < 2:
        raise ValueError("bootstrap needs at least two replicas")
    if any(c.counts is None for c in curves):
        raise ValueError("raw counts are required for bootstrapping")
    support = list(generator_support)
    pairs = list(degenerate_pairs)
    args = [(curves, support, pairs, weighted, seed, rep) for rep in range(n_reps)]
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            out = list(pool.map(lambda a: _bootstrap_replica(*a), args))
    else:
        out = [_bootstrap_replica(*a) for a in args]
    fsamp = np.array([o[0] for o in out])
    rsamp = np.array([o[1] for o in out])
    mean_rates = rsamp.mean(axis=0)
    cov = np.atleast_2d(np.cov(rsamp, rowvar=False, ddof=1))
    if cov.shape != (len(support), len(support)):
        cov = cov.reshape(len(support), len(support))
    n = curves[0].pauli.n
    model = PauliLindbladModel(n, tuple(zip(support, mean_rates.tolist())), layer_id)
    record = record_from_curves(curves, support, pairs, layer_id, keep_curves=False)
    fids = record.resolved_fidelities()
    paulis = [c.pauli for c in curves]
    fmod = model_fidelities(model, paulis)
    residuals = {p: float(fids[p] - fm) for p, fm in zip(paulis, fmod)}
    sigma = {p: float(s) for p, s in zip(paulis, fsamp.std(axis=0, ddof=1))}
    fit = ModelFitResult(model, cov, residuals, n_reps)
    return BootstrapResult(fit, sigma, fsamp, rsamp)


def model_prediction_sigma(fits: ModelFitResult | Mapping[str, ModelFitResult],
                           layers: Sequence[str], paulis: Sequence[PauliString]) -> float:
    """Uncertainty of the model-predicted fidelity of a Clifford circuit.

    ``paulis[k]`` is the observable back-propagated to hard layer ``layers[k]``.  All rates
    whose generator anticommutes with that Pauli enter the circuit-level covariance; layers
    sharing a ``layer_id`` share their rate covariance in full, as repeated layers do.
    """
    if len(layers) != len(paulis):
        raise ValueError(f"{len(paulis)} Paulis given for {len(layers)} layers")
    if isinstance(fits, ModelFitResult):
        fits = {lid: fits for lid in set(layers)}
    entries = []
    log_f = 0.0
    for lid, p in zip(layers, paulis):
        fit = fits[lid]
        mask = anticommutation_matrix([as_pauli(p)], fit.model.generators)[0].astype(bool)
        log_f += -2.0 * float(np.sum(fit.model.rates[mask]))
        entries.extend((lid, j) for j in np.flatnonzero(mask))
    total = 0.0
    for la, ja in entries:
        for lb, jb in entries:
            if la == lb:
                total += fits[la].rate_covariance[ja, jb]
    return 2.0 * math.exp(log_f) * math.sqrt(max(total, 0.0))


def ratio_sigma(f_meas: float, sigma_meas: float, f_mod: float, sigma_mod: float) -> float:
    """Propagated standard deviation of ``f_meas / f_mod`` for uncorrelated inputs."""
    if f_meas <= 0 or f_mod <= 0:
        raise ValueError("fidelities must be positive")
    r = f_meas / f_mod
    return abs(r) * math.sqrt((sigma_meas / f_meas) ** 2 + (sigma_mod / f_mod) ** 2)
