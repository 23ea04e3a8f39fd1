"""Desk-scale simulation experiments: perturbed models, cross-talk, T1 drift, counterexample.

Every runner returns an :class:`ExperimentResult` holding one row per sampled systematic
error together with the bounds that apply to it, plus a summary with quartiles and maxima.
Random circuits are drawn from a generator seeded by ``(seed, stream, sample index)``, so
results do not depend on how samples are split across workers.

In simulation the mitigated maps are known exactly, so the bounds are evaluated with the
full set of ``4**n`` fidelity ratios.
"""
from __future__ import annotations

import csv
import dataclasses
import io
import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Sequence

import numpy as np

from .bounds import LayerRatioData, compare_models, delta_gamma, delta_two, worst_case_clifford
from .channels import (
    PauliLindbladModel,
    channel_from_model,
    gamma,
    mitigated_map,
    twirled_amplitude_damping,
)
from .learning import exact_learning_record, fit_model_nnls, line_edges, pairwise_local_support
from .pauli import PauliString
from .simulation import (
    Layer,
    LayeredCircuit,
    cpt_counterexample_scan,
    cpt_subset_sum,
    final_pauli_expectations,
    haar_su2,
    signed_delta,
)

KINDS = ("perturbation", "crosstalk", "t1_drift", "counterexample")

_DEFAULTS: dict[str, dict[str, Any]] = {
    "perturbation": {"n": 3, "depth": 20, "n_circuits": 100, "n_perturbations": 10,
                     "rate_range": [1e-5, 1e-4], "eps_range": [1e-6, 1e-5]},
    "crosstalk": {"n": 4, "depth": 4, "n_circuits": 1000, "rate_range": [1e-5, 1e-4],
                  "crosstalk_grid": [0.0, 1e-4, 1e-3, 1e-2], "zero_in_model": False},
    "t1_drift": {"n": 2, "depth": 100, "n_circuits": 1000, "t1": [200e-6, 150e-6],
                 "gate_time": 100e-9,
                 "drift_grid": [-0.1, -0.05, -0.02, -0.01, 0.0, 0.01, 0.02, 0.05, 0.1]},
    "counterexample": {"n": 1, "depth": 25, "r_o": 0.9, "r_po": 1.0,
                       "dtheta": {"start": -0.5, "stop": 0.5, "num": 101}},
}

# random streams, so that e.g. circuits and rates never share a generator
_STREAM_RATES, _STREAM_EPS, _STREAM_CIRCUITS = 1, 2, 3


class ConfigError(ValueError):
    pass


@dataclass
class ExperimentConfig:
    """Parameters of one experiment; unset fields take the per-kind defaults."""

    kind: str
    seed: int
    n: int | None = None
    depth: int | None = None
    n_circuits: int | None = None
    n_perturbations: int | None = None
    rate_range: list[float] | None = None
    eps_range: list[float] | None = None
    crosstalk_grid: list[float] | None = None
    zero_in_model: bool | None = None
    t1: list[float] | None = None
    gate_time: float | None = None
    drift_grid: list[float] | None = None
    r_o: float | None = None
    r_po: float | None = None
    dtheta: dict | list[float] | None = None
    workers: int = 1

    def __post_init__(self):
        self.kind = self.kind.replace("-", "_")
        if self.kind not in KINDS:
            raise ConfigError(f"unknown experiment kind {self.kind!r}; expected one of {KINDS}")
        if self.seed is None or isinstance(self.seed, bool) or not isinstance(self.seed, (int, np.integer)):
            raise ConfigError("seed is mandatory and must be an integer")
        for key, value in _DEFAULTS[self.kind].items():
            if getattr(self, key) is None:
                setattr(self, key, value)
        self._validate()

    def _validate(self):
        if self.n is None or self.n < 1:
            raise ConfigError("n must be a positive integer")
        if self.depth is None or self.depth < 1:
            raise ConfigError("depth must be a positive integer")
        if self.workers < 1:
            raise ConfigError("workers must be at least 1")
        if self.kind != "counterexample" and (self.n_circuits is None or self.n_circuits < 1):
            raise ConfigError("n_circuits must be a positive integer")
        for name in ("rate_range", "eps_range"):
            rng = getattr(self, name)
            if rng is not None and (len(rng) != 2 or not 0 <= rng[0] <= rng[1]):
                raise ConfigError(f"{name} must be [low, high] with 0 <= low <= high")
        for name in ("crosstalk_grid", "drift_grid"):
            grid = getattr(self, name)
            if grid is not None and len(grid) == 0:
                raise ConfigError(f"{name} must be nonempty")
        if self.kind == "perturbation" and self.n_perturbations < 1:
            raise ConfigError("n_perturbations must be positive")
        if self.kind == "crosstalk":
            if self.n < 4:
                raise ConfigError("the cross-talk experiment needs n >= 4")
            if any(x < 0 for x in self.crosstalk_grid):
                raise ConfigError("cross-talk rates must be nonnegative")
        if self.kind == "t1_drift":
            if len(self.t1) != self.n:
                raise ConfigError(f"t1 must list one value per qubit ({self.n})")
            if any(not t > 0 for t in self.t1) or not self.gate_time > 0:
                raise ConfigError("T1 values and gate_time must be positive")
            if any(c <= -1 for c in self.drift_grid):
                raise ConfigError("relative drift of 1/T1 must exceed -1")
        if self.kind == "counterexample":
            if self.n != 1:
                raise ConfigError("the counterexample is a single-qubit construction")
            if not (self.r_o > 0 and self.r_po > 0):
                raise ConfigError("r_o and r_po must be positive")
            if len(self.dtheta_grid()) == 0:
                raise ConfigError("dtheta grid must be nonempty")

    def dtheta_grid(self) -> np.ndarray:
        d = self.dtheta
        if isinstance(d, dict):
            return np.linspace(float(d["start"]), float(d["stop"]), int(d["num"]))
        return np.asarray(d, dtype=float)

    @classmethod
    def from_dict(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(f"unknown config keys: {unknown}")
        if "kind" not in data or "seed" not in data:
            raise ConfigError("config requires 'kind' and 'seed'")
        return cls(**data)

    def to_dict(self) -> dict:
        # workers never change results, so they are not part of the recorded config
        out = dataclasses.asdict(self)
        return {k: v for k, v in out.items() if v is not None and k != "workers"}


@dataclass
class ExperimentResult:
    kind: str
    config: dict
    columns: list[str]
    rows: list[list] = field(default_factory=list)
    summary: dict = field(default_factory=dict)

    def column(self, name: str) -> np.ndarray:
        i = self.columns.index(name)
        return np.array([r[i] for r in self.rows], dtype=float)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(self.columns)
        for row in self.rows:
            w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
        return buf.getvalue()

    def summary_json(self) -> str:
        return json.dumps({"kind": self.kind, "config": self.config, "summary": self.summary},
                          indent=2, sort_keys=True) + "\n"


def _rng(seed: int, *keys: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([int(seed), *map(int, keys)]))


def distribution_summary(values: Sequence[float]) -> dict:
    """Quartiles and maximum of a sample (sorted first, so the result is order independent)."""
    v = np.sort(np.asarray(values, dtype=float))
    if v.size == 0:
        return {"count": 0}
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    return {"count": int(v.size), "min": float(v[0]), "q1": float(q1), "median": float(med),
            "q3": float(q3), "max": float(v[-1])}


def _chunks(n_items: int, workers: int) -> list[range]:
    size = max(1, math.ceil(n_items / workers))
    return [range(s, min(s + size, n_items)) for s in range(0, n_items, size)]


def _map_chunks(fun, n_items: int, workers: int) -> np.ndarray:
    """Apply ``fun(range) -> array`` on contiguous chunks and concatenate in order."""
    chunks = _chunks(n_items, workers)
    if workers == 1 or len(chunks) == 1:
        parts = [fun(c) for c in chunks]
    else:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(fun, chunks))
    return np.concatenate(parts, axis=0)


def _random_easy_gates(seed: int, samples: range, n_layers: int, n: int) -> np.ndarray:
    """Haar gates of shape ``(len(samples), n_layers, n, 2, 2)``, one generator per sample."""
    return np.stack([haar_su2(_rng(seed, _STREAM_CIRCUITS, s), (n_layers, n)) for s in samples])


def _random_observables(seed: int, samples: range, n: int) -> np.ndarray:
    return np.array([_rng(seed, _STREAM_CIRCUITS, s, 1).integers(1, 4**n) for s in samples])


def _brickwork(n: int, block: Sequence[Sequence[tuple[int, int]]], depth: int):
    """Hard-layer pattern of ``depth`` repetitions of ``block``."""
    return [list(pairs) for _ in range(depth) for pairs in block]


def _simulate_batch(n: int, hard: list, channels: list, easy: np.ndarray) -> np.ndarray:
    """All final Pauli expectations of a batch of circuits, shape ``(batch, 4**n)``."""
    layers = [Layer(easy[:, k], hard[k], channels[k]) for k in range(len(hard))]
    return final_pauli_expectations(LayeredCircuit(n, layers))


def _even_odd_pairs(n: int):
    edges = line_edges(n)
    return [e for e in edges if e[0] % 2 == 0], [e for e in edges if e[0] % 2 == 1]


def _random_model(n: int, support: list[PauliString], lo: float, hi: float,
                  rng: np.random.Generator, layer_id: str) -> PauliLindbladModel:
    rates = rng.uniform(lo, hi, size=len(support))
    return PauliLindbladModel(n, tuple(zip(support, rates.tolist())), layer_id)


def _ratio_layers(maps, models) -> list[LayerRatioData]:
    return [LayerRatioData.from_channel(v, gamma(m), m.layer_id) for v, m in zip(maps, models)]


def run_perturbation_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Mitigate fixed models with randomly perturbed copies of themselves.

    Each block is ``easy, V_0, even CNOTs, easy, V_1, odd CNOTs`` on a line; ``depth`` counts
    blocks.  The model rates of both layers are drawn once; every perturbation adds an
    independent ``eps`` to each rate of the actual channels.
    """
    n, depth = cfg.n, cfg.depth
    support = pairwise_local_support(n)
    rng = _rng(cfg.seed, _STREAM_RATES)
    models = [_random_model(n, support, *cfg.rate_range, rng, lid) for lid in ("even", "odd")]
    even, odd = _even_odd_pairs(n)
    hard = _brickwork(n, [even, odd], depth)
    n_layers = len(hard)
    samples = cfg.n_circuits
    easy = _map_chunks(lambda c: _random_easy_gates(cfg.seed, c, n_layers, n), samples, cfg.workers)
    obs = _random_observables(cfg.seed, range(samples), n)
    ideal = _map_chunks(lambda c: _simulate_batch(n, hard, [None] * n_layers, easy[c.start:c.stop]),
                        samples, cfg.workers)[np.arange(samples), obs]

    columns = ["point", "sample", "observable", "delta_o", "delta_gamma", "delta_two",
               "worst_case_clifford"]
    rows, points = [], []
    for k in range(cfg.n_perturbations):
        erng = _rng(cfg.seed, _STREAM_EPS, k)
        actual = [m.with_rates(m.rates + erng.uniform(*cfg.eps_range, size=len(support))) for m in models]
        maps = [mitigated_map(a, m) for a, m in zip(actual, models)]
        layer_maps = maps * depth
        layer_models = models * depth
        bounds = _ratio_layers(layer_maps, layer_models)
        dg, d2, wc = delta_gamma(bounds), delta_two(bounds), worst_case_clifford(bounds)
        mitigated = _map_chunks(
            lambda c: _simulate_batch(n, hard, layer_maps, easy[c.start:c.stop]), samples, cfg.workers
        )[np.arange(samples), obs]
        delta = np.abs(ideal - mitigated)
        for s in range(samples):
            rows.append([k, s, PauliString.from_index(int(obs[s]), n).label, float(delta[s]), dg, d2, wc])
        points.append({
            "point": k,
            "eps_even": (actual[0].rates - models[0].rates).tolist(),
            "eps_odd": (actual[1].rates - models[1].rates).tolist(),
            "delta_gamma": dg, "delta_two": d2, "worst_case_clifford": wc,
            "delta_o": distribution_summary(delta),
            "fraction_below_min_bound": float(np.mean(delta <= min(dg, d2) + 1e-9)),
            "fraction_below_worst_case_clifford": float(np.mean(delta <= wc + 1e-9)),
        })
    summary = {
        "model_rates": {m.layer_id: m.to_dict() for m in models},
        "points": points,
        "all_below_min_bound": all(p["fraction_below_min_bound"] == 1.0 for p in points),
        "fraction_below_worst_case_clifford": float(np.mean([r[3] <= r[6] + 1e-9 for r in rows])),
    }
    return ExperimentResult("perturbation", cfg.to_dict(), columns, rows, summary)


def learn_pairwise_local_model(actual: PauliLindbladModel, layer_id: str = "layer") -> PauliLindbladModel:
    """Infinite-shot learning of a pairwise-local line model from the actual channel."""
    support = pairwise_local_support(actual.n)
    record = exact_learning_record(channel_from_model(actual), support, layer_id=layer_id)
    return fit_model_nnls(record).model


def crosstalk_generator(n: int) -> PauliString:
    label = ["I"] * n
    label[0] = label[-1] = "Z"
    return PauliString.from_label("".join(label))


def run_crosstalk_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Long-range ``Z...Z`` cross-talk on top of a pairwise-local channel, learnt and mitigated.

    The block is ``easy, V, even CNOTs``; ``depth`` counts blocks.  The in-model rates are
    drawn once and reused at every grid point (or zeroed with ``zero_in_model``).
    """
    n, depth = cfg.n, cfg.depth
    support = pairwise_local_support(n)
    if cfg.zero_in_model:
        base_rates = np.zeros(len(support))
    else:
        base_rates = _rng(cfg.seed, _STREAM_RATES).uniform(*cfg.rate_range, size=len(support))
    xt = crosstalk_generator(n)
    even, _ = _even_odd_pairs(n)
    hard = _brickwork(n, [even], depth)
    samples = cfg.n_circuits
    easy = _map_chunks(lambda c: _random_easy_gates(cfg.seed, c, depth, n), samples, cfg.workers)
    obs = _random_observables(cfg.seed, range(samples), n)
    ideal = _map_chunks(lambda c: _simulate_batch(n, hard, [None] * depth, easy[c.start:c.stop]),
                        samples, cfg.workers)[np.arange(samples), obs]

    columns = ["point", "sample", "observable", "delta_o", "delta_gamma", "delta_two",
               "worst_case_clifford"]
    rows, points = [], []
    for k, lam in enumerate(cfg.crosstalk_grid):
        terms = [(p, float(r)) for p, r in zip(support, base_rates) if r > 0]
        if lam > 0:
            terms.append((xt, float(lam)))
        actual = PauliLindbladModel(n, tuple(terms), "crosstalk")
        learnt = learn_pairwise_local_model(actual, "crosstalk")
        v = mitigated_map(actual, learnt)
        bounds = _ratio_layers([v] * depth, [learnt] * depth)
        dg, d2, wc = delta_gamma(bounds), delta_two(bounds), worst_case_clifford(bounds)
        mitigated = _map_chunks(
            lambda c: _simulate_batch(n, hard, [v] * depth, easy[c.start:c.stop]), samples, cfg.workers
        )[np.arange(samples), obs]
        delta = np.abs(ideal - mitigated)
        for s in range(samples):
            rows.append([k, s, PauliString.from_index(int(obs[s]), n).label, float(delta[s]), dg, d2, wc])
        rates = learnt.rate_map()
        points.append({
            "point": k,
            "lambda_crosstalk": float(lam),
            "learnt_model": learnt.to_dict(),
            "learnt_end_rates": [rates.get(PauliString.single(n, 0, "Z"), 0.0),
                                 rates.get(PauliString.single(n, n - 1, "Z"), 0.0)],
            "gamma": gamma(learnt),
            "delta_gamma": dg, "delta_two": d2, "worst_case_clifford": wc,
            "closed_form": math.expm1(4 * depth * lam),
            "delta_o": distribution_summary(delta),
            "fraction_below_min_bound": float(np.mean(delta <= min(dg, d2) + 1e-9)),
        })
    summary = {"crosstalk_generator": xt.label, "points": points}
    return ExperimentResult("crosstalk", cfg.to_dict(), columns, rows, summary)


def t1_models(t1s: Sequence[float], gate_time: float, drift: float):
    """``(actual, learnt)`` twirled amplitude-damping models; ``1/T1`` changes by ``drift``."""
    learnt = twirled_amplitude_damping(t1s, gate_time, "t1")
    actual = twirled_amplitude_damping([t / (1.0 + drift) for t in t1s], gate_time, "t1")
    return actual, learnt


def run_t1_drift_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    """Mitigate a drifted amplitude-damping channel with the model of the nominal T1 values.

    Layer: ``easy, V, CNOT(q, q+1) for even q``; every circuit is measured on all non-identity
    Paulis.
    """
    n, depth = cfg.n, cfg.depth
    even, _ = _even_odd_pairs(n)
    hard = _brickwork(n, [even], depth)
    samples = cfg.n_circuits
    easy = _map_chunks(lambda c: _random_easy_gates(cfg.seed, c, depth, n), samples, cfg.workers)
    ideal = _map_chunks(lambda c: _simulate_batch(n, hard, [None] * depth, easy[c.start:c.stop]),
                        samples, cfg.workers)

    columns = ["point", "sample", "observable", "delta_o", "delta_gamma", "delta_two",
               "worst_case_clifford", "delta_c"]
    zz = PauliString.from_label("Z" * n)
    rows, points = [], []
    for k, drift in enumerate(cfg.drift_grid):
        actual, learnt = t1_models(cfg.t1, cfg.gate_time, float(drift))
        v = mitigated_map(actual, learnt)
        bounds = _ratio_layers([v] * depth, [learnt] * depth)
        dg, d2, wc = delta_gamma(bounds), delta_two(bounds), worst_case_clifford(bounds)
        dc = compare_models(actual, learnt, depth)
        mitigated = _map_chunks(
            lambda c: _simulate_batch(n, hard, [v] * depth, easy[c.start:c.stop]), samples, cfg.workers
        )
        delta = np.abs(ideal - mitigated)[:, 1:]
        for s in range(samples):
            for j in range(delta.shape[1]):
                rows.append([k, s, PauliString.from_index(j + 1, n).label, float(delta[s, j]),
                             dg, d2, wc, dc])
        points.append({
            "point": k,
            "relative_drift": float(drift),
            "delta_c": dc, "worst_case_clifford": wc, "delta_gamma": dg, "delta_two": d2,
            "zz_closed_form": v.fidelity(zz) ** depth - 1.0,
            "worst_case_equals_delta_c": bool(abs(wc - dc) <= 1e-9 * max(1.0, abs(dc))),
            "delta_o": distribution_summary(delta.ravel()),
            "all_below_delta_c": bool(np.all(delta <= dc + 1e-9)),
        })
    decrease = [p for p in points if p["relative_drift"] < 0]
    summary = {
        "points": points,
        "all_decrease_worst_case_equals_delta_c": all(p["worst_case_equals_delta_c"] for p in decrease),
        "all_below_delta_c": all(p["all_below_delta_c"] for p in points),
    }
    return ExperimentResult("t1_drift", cfg.to_dict(), columns, rows, summary)


def run_counterexample(cfg: ExperimentConfig) -> ExperimentResult:
    """Scan the signed error along every Hessian eigenvector of the rotation circuit."""
    grid = cfg.dtheta_grid()
    scan = cpt_counterexample_scan(cfg.depth, cfg.r_o, cfg.r_po, grid)
    columns = ["eigen_index", "eigenvalue", "dtheta", "delta_o", "worst_case_clifford"]
    rows = []
    for j, ev in enumerate(scan.eigenvalues):
        for x, d in zip(scan.dtheta, scan.traces[j]):
            rows.append([j, float(ev), float(x), float(d), scan.worst_case_clifford])
    i0 = int(np.argmin(np.abs(grid)))
    summary = {
        "eigenvalues": scan.eigenvalues.tolist(),
        "n_positive_eigenvalues": scan.n_positive,
        "worst_case_clifford": scan.worst_case_clifford,
        "max_delta_o_per_eigenvector": scan.traces.max(axis=1).tolist(),
        "exceeds_worst_case_clifford": scan.exceeds_clifford().tolist(),
        "delta_o_at_smallest_dtheta": float(scan.traces[0, i0]),
    }
    if cfg.depth <= 12:
        # brute-force Clifford perturbation sum along the top eigenvector
        top = scan.eigenvectors[:, -1]
        pts = grid[:: max(1, len(grid) // 10)]
        exact = signed_delta(pts[:, None] * top[None, :], cfg.r_o, cfg.r_po)
        oracle = np.array([cpt_subset_sum(x * top, cfg.r_o, cfg.r_po) for x in pts])
        summary["subset_sum_max_abs_diff"] = float(np.max(np.abs(exact - oracle)))
    return ExperimentResult("counterexample", cfg.to_dict(), columns, rows, summary)


RUNNERS = {
    "perturbation": run_perturbation_experiment,
    "crosstalk": run_crosstalk_experiment,
    "t1_drift": run_t1_drift_experiment,
    "counterexample": run_counterexample,
}


def run_experiment(cfg: ExperimentConfig) -> ExperimentResult:
    return RUNNERS[cfg.kind](cfg)
