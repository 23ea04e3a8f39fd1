"""Command-line front end.

Every command reads JSON inputs, writes its outputs to ``--out-dir`` and records a
``run_manifest.json`` holding the command, resolved options, seed, tool version, input
digests and output names.  Outputs carry no timestamps, so reruns with the same inputs and
options are byte-identical.

Exit codes: 0 success, 2 validation error, 3 numerical failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import math
import os
import sys
from pathlib import Path

import numpy as np

from . import __version__
from .bounds import (
    LayerRatioData,
    bound_report,
    compare_layer,
    compare_models,
    delta_two,
    pea_bound,
    tem_bound,
    zne_linear_fit,
)
from .channels import channel_from_model, gamma, model_fidelities
from .experiments import ConfigError, ExperimentConfig, run_experiment
from .io import (
    ValidationError,
    dumps,
    load_models,
    load_records,
    model_to_json,
    read_json,
    sha256_file,
)
from .learning import (
    FitError,
    LearningRecord,
    ModelFitResult,
    bootstrap,
    fit_model_nnls,
    model_prediction_sigma,
    ratio_sigma,
    record_from_curves,
)

EXIT_OK, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3


class _Run:
    """Collects outputs and input digests of one invocation and writes the manifest."""

    def __init__(self, args: argparse.Namespace, config: dict):
        self.args = args
        self.out_dir = Path(args.out_dir)
        self.config = config
        self.inputs: list[dict] = []
        self.outputs: list[str] = []

    def add_input(self, path):
        try:
            digest = sha256_file(path)
        except OSError as exc:
            raise ValidationError(str(path), [("", f"cannot read file: {exc.strerror}")]) from None
        self.inputs.append({"path": str(path), "sha256": digest})

    def write(self, name: str, text: str):
        self.out_dir.mkdir(parents=True, exist_ok=True)
        with open(self.out_dir / name, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        self.outputs.append(name)

    def finish(self):
        manifest = {
            "command": self.args.command,
            "config": self.config,
            "seed": self.args.seed,
            "tool_version": __version__,
            "inputs": self.inputs,
            "outputs": sorted(self.outputs),
        }
        self.write("run_manifest.json", dumps(manifest))


def _csv(header: list[str], rows) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(header)
    for row in rows:
        w.writerow([format(v, ".17g") if isinstance(v, float) else v for v in row])
    return buf.getvalue()


def _float_list(text: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ValidationError("<arguments>", [("", f"expected comma-separated numbers, got {text!r}")]) from None


def parse_layers(spec: str | None) -> list[int] | None:
    """``"L"`` (a single depth), ``"a..b"`` (every depth from a to b) or ``"a,b,c"``."""
    if spec is None:
        return None
    try:
        if ".." in spec:
            lo, hi = (int(x) for x in spec.split(".."))
            depths = list(range(lo, hi + 1))
        else:
            depths = [int(x) for x in spec.split(",")]
    except ValueError:
        raise ValidationError("<arguments>", [("", f"invalid --layers spec {spec!r}")]) from None
    if not depths or min(depths) < 1:
        raise ValidationError("<arguments>", [("", f"--layers must name depths >= 1, got {spec!r}")])
    return depths


def _with_fidelities(record: LearningRecord) -> LearningRecord:
    """Fill in fidelities from the decay curves when a record only has raw data."""
    if record.fidelities:
        return record
    return record_from_curves(record.curves, record.generator_support, record.degenerate_pairs,
                              record.layer_id)


def _match_layers(records, models, source: str):
    """Pair every record with the model of the same layer id."""
    by_id = {m.layer_id: (m, cov) for m, cov in models}
    if len(by_id) != len(models):
        raise ValidationError(source, [("", "duplicate layer_id among models")])
    pairs = []
    for r in records:
        if r.layer_id not in by_id:
            raise ValidationError(source, [("", f"no model for layer {r.layer_id!r}")])
        m, cov = by_id[r.layer_id]
        if m.n != r.n:
            raise ValidationError(source, [("", f"layer {r.layer_id!r}: record has n={r.n}, model n={m.n}")])
        pairs.append((r, m, cov))
    return pairs


def _layer_analysis(record: LearningRecord, model, cov):
    """Ratio data of one layer plus a per-Pauli table with degeneracy and over-1-sigma tags."""
    fids = record.resolved_fidelities()
    paulis = list(fids)
    fmod = model_fidelities(model, paulis)
    if np.any(fmod <= 0) or any(f <= 0 for f in fids.values()):
        raise ZeroDivisionError(f"layer {record.layer_id!r}: nonpositive fidelity")
    partner = {}
    for a, b in record.degenerate_pairs:
        partner[a], partner[b] = b, a
    fit = ModelFitResult(model, cov, {}) if cov is not None else None
    stderr = record.stderrs()
    have_sigma = fit is not None or any(s > 0 for s in stderr.values())
    rows, ratios = [], {}
    for p, fm in zip(paulis, fmod):
        r = fids[p] / fm
        ratios[p] = r
        sig_mod = model_prediction_sigma(fit, [record.layer_id], [p]) if fit is not None else 0.0
        sig = ratio_sigma(fids[p], stderr.get(p, 0.0), float(fm), sig_mod) if have_sigma else None
        rows.append({
            "pauli": p.label,
            "f_meas": fids[p],
            "f_mod": float(fm),
            "ratio": r,
            "ratio_sigma": sig,
            "over_1sigma": None if sig is None else bool(abs(1.0 - r) > sig),
            "degenerate_with": partner[p].label if p in partner else None,
        })
    layer = LayerRatioData(record.n, ratios, gamma(model), record.layer_id)
    return layer, rows


def _load_layers(args, run: _Run):
    run.add_input(args.record)
    run.add_input(args.model)
    records = [_with_fidelities(r) for r in load_records(args.record)]
    models = load_models(args.model)
    return _match_layers(records, models, str(args.model))


def cmd_fit(args, run: _Run) -> None:
    run.add_input(args.record)
    records = load_records(args.record)
    models, reports = [], []
    for i, raw in enumerate(records):
        record = _with_fidelities(raw)
        fit = fit_model_nnls(record, weighted=args.weighted)
        cov = None
        report = {
            "layer_id": record.layer_id,
            "residuals": {p.label: r for p, r in fit.residuals.items()},
            "max_abs_residual": max((abs(r) for r in fit.residuals.values()), default=0.0),
            "nnls_iterations": fit.nnls.iterations,
            "bootstrap_reps": 0,
        }
        if args.bootstrap:
            if not raw.curves or any(c.counts is None for c in raw.curves):
                raise ValidationError(str(args.record), [("", "--bootstrap needs curves with raw counts")])
            boot = bootstrap(raw.curves, record.generator_support, args.bootstrap, seed=args.seed + i,
                             degenerate_pairs=record.degenerate_pairs, weighted=args.weighted,
                             layer_id=record.layer_id, workers=args.workers)
            cov = boot.fit.rate_covariance
            report["bootstrap_reps"] = args.bootstrap
            report["fidelity_sigma"] = {p.label: s for p, s in boot.fidelity_sigma.items()}
        models.append(model_to_json(fit.model, cov))
        reports.append(report)
    model_doc = models[0] if len(models) == 1 else {"layers": models}
    run.write("model.json", dumps(model_doc))
    if args.format == "csv":
        rows = [(r["layer_id"], p, v) for r in reports for p, v in r["residuals"].items()]
        run.write("fit_report.csv", _csv(["layer_id", "pauli", "residual"], rows))
    else:
        run.write("fit_report.json", dumps({"layers": reports}))


def cmd_bounds(args, run: _Run) -> None:
    pairs = _load_layers(args, run)
    block, tables = [], []
    for record, model, cov in pairs:
        layer, rows = _layer_analysis(record, model, cov)
        block.append(layer)
        tables.append({"layer_id": record.layer_id, "fidelities": rows})
    depths = parse_layers(args.layers) or [1]
    scaling = []
    for d in depths:
        rep = bound_report(block * d)
        scaling.append({"depth": d, **rep.to_dict()["totals"]})
    report = bound_report(block * max(depths))
    if args.format == "csv":
        run.write("bounds.csv", report.to_csv())
        rows = [(t["layer_id"], r["pauli"], r["f_meas"], r["f_mod"], r["ratio"],
                 "" if r["ratio_sigma"] is None else r["ratio_sigma"],
                 "" if r["over_1sigma"] is None else int(r["over_1sigma"]), r["degenerate_with"] or "")
                for t in tables for r in t["fidelities"]]
        run.write("fidelities.csv", _csv(["layer_id", "pauli", "f_meas", "f_mod", "ratio", "ratio_sigma",
                                          "over_1sigma", "degenerate_with"], rows))
        if len(depths) > 1:
            keys = ["delta_gamma", "delta_two", "delta_min", "worst_case_clifford"]
            run.write("depth_scaling.csv", _csv(["depth"] + keys, [[s["depth"]] + [s[k] for k in keys]
                                                                   for s in scaling]))
    else:
        run.write("bounds.json", dumps({"report": report.to_dict(), "fidelities": tables,
                                        "depth_scaling": scaling}))


def cmd_compare(args, run: _Run) -> None:
    run.add_input(args.actual)
    run.add_input(args.mitigator)
    actual = [m for m, _ in load_models(args.actual)]
    mitigator = [m for m, _ in load_models(args.mitigator)]
    if len(actual) != len(mitigator):
        raise ValidationError(str(args.mitigator), [("", "actual and mitigator have different layer counts")])
    for a, m in zip(actual, mitigator):
        if a.n != m.n:
            raise ValidationError(str(args.mitigator), [("", f"qubit count mismatch: {a.n} vs {m.n}")])
    reps = args.layers if args.layers is not None else 1
    if reps < 1:
        raise ValidationError("<arguments>", [("", "--layers must be >= 1")])
    actual, mitigator = actual * reps, mitigator * reps
    per_layer = [dict(zip(("distance", "norm"), compare_layer(a, m)), layer_id=a.layer_id)
                 for a, m in zip(actual, mitigator)]
    dc = compare_models(actual, mitigator)
    if args.format == "csv":
        run.write("compare.csv", _csv(["index", "layer_id", "distance", "norm"],
                                      [[i, r["layer_id"], r["distance"], r["norm"]] for i, r in enumerate(per_layer)])
                  + f"# delta_c={format(dc, '.17g')}\n")
    else:
        run.write("compare.json", dumps({"delta_c": dc, "depth": len(actual), "layers": per_layer}))


def _full_fidelities(record: LearningRecord, model):
    """Model fidelities on every Pauli, with measured values substituted where available."""
    f_mod = channel_from_model(model).values.copy()
    f_meas = f_mod.copy()
    for p, f in record.resolved_fidelities().items():
        f_meas[p.index] = f
    return f_meas, f_mod


def cmd_pea_bound(args, run: _Run) -> None:
    pairs = _load_layers(args, run)
    mus = _float_list(args.mus)
    reps = args.layers or 1
    meas, mod = [], []
    for record, model, _ in pairs:
        fm, fh = _full_fidelities(record, model)
        meas.append(fm)
        mod.append(fh)
    eta, cov = pea_bound(meas * reps, mod * reps, mus)
    out = {"mus": mus, "eta": eta.tolist(), "covariance": cov.tolist(), "depth": len(meas) * reps}
    if args.expectations is not None:
        values = _float_list(args.expectations)
        if len(values) != len(mus):
            raise ValidationError("<arguments>", [("", "--expectations needs one value per mu")])
        intercept, slope, pcov = zne_linear_fit(mus, values, cov)
        out["extrapolation"] = {"intercept": intercept, "slope": slope, "param_cov": pcov.tolist(),
                                "intercept_sigma": math.sqrt(max(pcov[0, 0], 0.0))}
    if args.format == "csv":
        run.write("pea_bound.csv", _csv(["mu", "eta"], zip(mus, eta.tolist())))
    else:
        run.write("pea_bound.json", dumps(out))


def cmd_tem_bound(args, run: _Run) -> None:
    pairs = _load_layers(args, run)
    block = [_layer_analysis(r, m, c)[0] for r, m, c in pairs]
    layers = block * (args.layers or 1)
    out = {"tem_bound": tem_bound(layers), "delta_two": delta_two(layers), "depth": len(layers)}
    if args.format == "csv":
        run.write("tem_bound.csv", _csv(["depth", "tem_bound", "delta_two"],
                                        [[out["depth"], out["tem_bound"], out["delta_two"]]]))
    else:
        run.write("tem_bound.json", dumps(out))


def cmd_simulate(args, run: _Run) -> None:
    data = {}
    if args.config:
        run.add_input(args.config)
        data = read_json(args.config)
        if not isinstance(data, dict):
            raise ValidationError(str(args.config), [("", "config must be a JSON object")])
    kind = args.kind.replace("-", "_")
    if data.setdefault("kind", kind).replace("-", "_") != kind:
        raise ValidationError(str(args.config), [("/kind", f"config is for {data['kind']!r}, not {kind!r}")])
    for key in ("n", "depth", "n_circuits"):
        if getattr(args, key) is not None:
            data[key] = getattr(args, key)
    if args.seed is not None:
        data["seed"] = args.seed
    data["workers"] = args.workers
    try:
        cfg = ExperimentConfig.from_dict(data)
    except (ConfigError, TypeError) as exc:
        raise ValidationError(str(args.config or "<arguments>"), [("", str(exc))]) from None
    run.config["experiment"] = cfg.to_dict()
    result = run_experiment(cfg)
    run.write(f"{kind}.csv", result.to_csv())
    run.write(f"{kind}_summary.json", result.summary_json())


def _report_point(doc: dict, source: str, axis: str) -> tuple[float, dict]:
    rep = doc.get("report", doc)
    key = "n" if axis == "width" else "depth"
    if not isinstance(rep, dict) or key not in rep or "totals" not in rep:
        raise ValidationError(source, [("/report", f"expected a bound report with '{key}' and 'totals'")])
    return float(rep[key]), rep["totals"]


def cmd_extrapolate(args, run: _Run) -> None:
    xs, totals = [], []
    for path in args.reports:
        run.add_input(path)
        x, t = _report_point(read_json(path), str(path), args.axis)
        xs.append(x)
        totals.append(t)
    if len(xs) < 2 or len(set(xs)) < 2:
        raise ValidationError("<arguments>", [("", f"need reports at >= 2 distinct {args.axis} values")])
    predict = _float_list(args.predict) if args.predict else []
    keys = sorted(set.intersection(*(set(t) for t in totals)))
    x = np.array(xs)
    design = np.column_stack([np.ones_like(x), x])
    fits = {}
    for k in keys:
        y = np.array([float(t[k]) for t in totals])
        (a, b), *_ = np.linalg.lstsq(design, y, rcond=None)
        fits[k] = {"intercept": float(a), "slope": float(b),
                   "predictions": [{"x": p, "value": float(a + b * p)} for p in predict]}
    if args.format == "csv":
        rows = [[k, f["intercept"], f["slope"]] + [pr["value"] for pr in f["predictions"]] for k, f in fits.items()]
        run.write("extrapolate.csv", _csv(["quantity", "intercept", "slope"] + [f"at_{format(p, 'g')}" for p in predict],
                                          rows))
    else:
        run.write("extrapolate.json", dumps({"axis": args.axis, "points": xs, "fits": fits}))


def _add_common(parser: argparse.ArgumentParser, suppress: bool) -> None:
    # subcommands repeat the global flags; their defaults are suppressed so that a flag given
    # before the subcommand is not overwritten
    def d(value):
        return argparse.SUPPRESS if suppress else value

    parser.add_argument("--seed", type=int, default=d(None), help="random seed (mandatory for simulate)")
    parser.add_argument("--workers", type=int, default=d(os.cpu_count() or 1),
                        help="worker threads; results do not depend on it")
    parser.add_argument("--out-dir", default=d("."), help="directory for outputs and run_manifest.json")
    parser.add_argument("--format", choices=("json", "csv"), default=d("json"))


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    _add_common(common, suppress=True)

    parser = argparse.ArgumentParser(prog="mvbounds",
                                     description="Model-violation bounds for model-based error mitigation.")
    _add_common(parser, suppress=False)
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", parents=[common], help="fit a sparse Pauli-Lindblad model to a learning record")
    p.add_argument("record")
    p.add_argument("--weighted", action="store_true", help="weight rows by fidelity standard errors")
    p.add_argument("--bootstrap", type=int, default=0, metavar="N",
                   help="bootstrap replicas for the rate covariance (needs raw counts)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("bounds", parents=[common], help="systematic-error bounds from measured ratios")
    p.add_argument("record")
    p.add_argument("model")
    p.add_argument("--layers", help="repetitions of the layer block: L, a..b or a,b,c (depth scaling)")
    p.set_defaults(func=cmd_bounds)

    p = sub.add_parser("compare", parents=[common], help="bound for mitigating one model with another")
    p.add_argument("actual")
    p.add_argument("mitigator")
    p.add_argument("--layers", type=int, default=None, help="repetitions of the layer block")
    p.set_defaults(func=cmd_compare)

    p = sub.add_parser("pea-bound", parents=[common], help="error-amplification bounds")
    p.add_argument("record")
    p.add_argument("model")
    p.add_argument("--mus", default="1,1.5,2", help="comma-separated amplification factors")
    p.add_argument("--layers", type=int, default=None)
    p.add_argument("--expectations", default=None,
                   help="amplified expectation values, one per mu, for a linear extrapolation")
    p.set_defaults(func=cmd_pea_bound)

    p = sub.add_parser("tem-bound", parents=[common], help="tensor-network mitigation bound")
    p.add_argument("record")
    p.add_argument("model")
    p.add_argument("--layers", type=int, default=None)
    p.set_defaults(func=cmd_tem_bound)

    p = sub.add_parser("simulate", parents=[common], help="run a simulation experiment")
    p.add_argument("kind", choices=("perturbation", "crosstalk", "t1-drift", "counterexample"))
    p.add_argument("--config", default=None, help="experiment config JSON")
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--depth", type=int, default=None)
    p.add_argument("--n-circuits", type=int, default=None)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("extrapolate", parents=[common], help="linear fit of bounds versus depth or width")
    p.add_argument("reports", nargs="+")
    p.add_argument("--axis", choices=("depth", "width"), required=True)
    p.add_argument("--predict", default=None, help="comma-separated sizes to predict")
    p.set_defaults(func=cmd_extrapolate)
    return parser


_NON_CONFIG = {"func", "command", "seed", "workers", "out_dir", "format"}


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    if args.workers < 1:
        parser.error("--workers must be >= 1")
    config = {k: v for k, v in sorted(vars(args).items()) if k not in _NON_CONFIG}
    config["format"] = args.format
    run = _Run(args, config)
    if args.seed is None and args.command == "fit":
        args.seed = 0
    try:
        args.func(args, run)
    except ValidationError as exc:
        print(f"validation error:\n{exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (FitError, ZeroDivisionError, np.linalg.LinAlgError, FloatingPointError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except ValueError as exc:
        print(f"validation error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    run.finish()
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
