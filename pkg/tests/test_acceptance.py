"""Acceptance suite: one test per criterion, each printing a single PASS/FAIL line."""
import json
import math
import time

import numpy as np
import pytest

from mvbounds.bounds import (
    LayerRatioData,
    delta_two,
    layer_distance_two_norm,
    pea_bound,
    tem_bound,
)
from mvbounds.channels import (
    PauliLindbladModel,
    PauliStochastishChannel,
    channel_from_model,
    diamond_distance_identity_exact,
    gamma,
    model_fidelities,
)
from mvbounds.cli import main
from mvbounds.experiments import ExperimentConfig, run_experiment
from mvbounds.io import model_to_json, record_to_json
from mvbounds.learning import (
    ModelFitResult,
    bootstrap,
    exact_learning_record,
    fit_model_nnls,
    model_prediction_sigma,
    pairwise_local_support,
    ratio_sigma,
    record_from_curves,
    synthesize_learning_data,
)
from mvbounds.pauli import all_paulis, wht_commutation
from mvbounds.simulation import cpt_counterexample_scan, cpt_hessian, cpt_subset_sum, signed_delta


@pytest.fixture
def report(capsys):
    def emit(k, ok, detail, elapsed, limit):
        ok = ok and elapsed < limit
        with capsys.disabled():
            print(f"\nACCEPTANCE {k}: {'PASS' if ok else 'FAIL'} {detail} ({elapsed:.2f} s, limit {limit:g} s)")
        assert ok, detail
    return emit


def _character_matrix(n):
    # dense (-1)^{<p, q>} from explicit matrix commutation
    ps = [p.to_matrix() for p in all_paulis(n)]
    return np.array([[1.0 if np.allclose(a @ b, b @ a) else -1.0 for b in ps] for a in ps])


def test_1_depolarizing_exactness(report):
    t = time.perf_counter()
    rng = np.random.default_rng(1)
    worst = 0.0
    for _ in range(200):
        n, r = int(rng.integers(1, 4)), float(rng.uniform(0, 2))
        exact = diamond_distance_identity_exact(PauliStochastishChannel.depolarizing(n, r))
        worst = max(worst, abs(exact - 2 * (4**n - 1) / 4**n * abs(1 - r)))
    report(1, worst <= 1e-12, f"max abs error {worst:.2e} over 200 channels", time.perf_counter() - t, 1)


def test_2_transform(report):
    t = time.perf_counter()
    rng = np.random.default_rng(2)
    dense = {n: _character_matrix(n) for n in (1, 2, 3)}
    err = 0.0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        v = rng.normal(size=4**n)
        err = max(err, float(np.max(np.abs(wht_commutation(v) - dense[n] @ v))))
    inv = 0.0
    for n in range(1, 7):
        v = rng.normal(size=4**n)
        back = wht_commutation(wht_commutation(v), normalize=True)
        inv = max(inv, float(np.max(np.abs(back - v)) / np.max(np.abs(v))))
    report(2, err <= 1e-12 and inv <= 1e-10, f"dense error {err:.2e}, involution error {inv:.2e}",
           time.perf_counter() - t, 5)


def test_3_bound_dominance(report):
    t = time.perf_counter()
    below, below_wc, total = 0, 0, 0
    for n in (2, 3, 4):
        res = run_experiment(ExperimentConfig("perturbation", seed=n, n=n, depth=20, n_circuits=100,
                                              n_perturbations=10))
        d = res.column("delta_o")
        bound = np.minimum(res.column("delta_gamma"), res.column("delta_two"))
        below += int(np.sum(d <= bound + 1e-9))
        below_wc += int(np.sum(d <= res.column("worst_case_clifford") + 1e-9))
        total += d.size
    ok = below == total and below_wc >= 0.99 * total
    report(3, ok, f"{below}/{total} below min(delta_gamma, delta_2); {below_wc / total:.2%} below worst-case Clifford",
           time.perf_counter() - t, 600)


def test_4_crosstalk_closed_form(report):
    t = time.perf_counter()
    grid, depth = [1e-4, 1e-3, 1e-2], 4
    res = run_experiment(ExperimentConfig("crosstalk", seed=0, n=4, depth=depth, n_circuits=100,
                                          crosstalk_grid=grid, zero_in_model=True))
    rate_err = rel_g = rel_wc = 0.0
    for p in res.summary["points"]:
        lam = p["lambda_crosstalk"]
        rates = {t["pauli"]: t["rate"] for t in p["learnt_model"]["terms"]}
        rate_err = max(rate_err, abs(rates["ZIII"] - lam), abs(rates["IIIZ"] - lam))
        cf = math.expm1(4 * depth * lam)
        rel_g = max(rel_g, abs(p["delta_gamma"] - cf) / cf)
        rel_wc = max(rel_wc, abs(p["worst_case_clifford"] - cf) / cf)
    ok = rate_err <= 1e-8 and rel_g <= 1e-9 and rel_wc <= 1e-9
    report(4, ok, f"rate error {rate_err:.1e}, delta_gamma rel {rel_g:.1e}, worst-case Clifford rel {rel_wc:.1e}",
           time.perf_counter() - t, 60)


def test_5_t1_saturation(report):
    t = time.perf_counter()
    res = run_experiment(ExperimentConfig("t1_drift", seed=5, n=2, depth=100, n_circuits=1000,
                                          drift_grid=[-0.1, -0.05, -0.02, -0.01]))
    rel_c = rel_wc = 0.0
    for p in res.summary["points"]:
        rel_c = max(rel_c, abs(p["delta_c"] - p["zz_closed_form"]) / abs(p["zz_closed_form"]))
        rel_wc = max(rel_wc, abs(p["worst_case_clifford"] - p["delta_c"]) / abs(p["delta_c"]))
    d, dc = res.column("delta_o"), res.column("delta_c")
    n_ok = int(np.sum(d <= dc + 1e-9))
    ok = rel_c <= 1e-9 and rel_wc <= 1e-9 and n_ok == d.size
    report(5, ok, f"delta_C rel {rel_c:.1e}, worst-case Clifford rel {rel_wc:.1e}, {n_ok}/{d.size} delta_o <= delta_C",
           time.perf_counter() - t, 300)


def test_6_counterexample(report):
    t = time.perf_counter()
    n_pos = int(np.sum(np.linalg.eigvalsh(cpt_hessian(25, 0.9, 1.0)) > 0))
    scan = cpt_counterexample_scan(25, 0.9, 1.0)
    target = 1 - 0.9**25
    at_zero = float(scan.traces[-1, np.argmin(np.abs(scan.dtheta))])
    top = scan.traces[np.argmax(scan.eigenvalues)].max()
    evecs = np.linalg.eigh(cpt_hessian(8, 0.9, 1.0))[1]
    pts = np.linspace(-0.5, 0.5, 11)
    diff = 0.0
    for j in range(8):
        for x in pts:
            th = x * evecs[:, j]
            diff = max(diff, abs(cpt_subset_sum(th, 0.9, 1.0) - float(signed_delta(th))))
    ok = n_pos == 1 and abs(at_zero - target) <= 1e-10 and top > target and diff <= 1e-9
    report(6, ok, f"{n_pos} positive eigenvalue(s); delta_o(0) = {at_zero:.12f}; max along top eigenvector "
                  f"{top:.6f} > {target:.6f}; l=8 subset-sum diff {diff:.1e}", time.perf_counter() - t, 60)


def test_7_fit_roundtrip(report):
    t = time.perf_counter()
    rng = np.random.default_rng(7)
    worst = 0.0
    for _ in range(50):
        n = int(rng.integers(1, 5))
        support = pairwise_local_support(n)
        k = int(rng.integers(1, len(support) + 1))
        chosen = [support[i] for i in sorted(rng.choice(len(support), size=k, replace=False))]
        truth = PauliLindbladModel(n, tuple((p, float(rng.uniform(1e-4, 5e-2))) for p in chosen))
        fit = fit_model_nnls(exact_learning_record(channel_from_model(truth), support))
        got = fit.model.rate_map()
        want = truth.rate_map()
        worst = max(worst, max(abs(got[p] - want.get(p, 0.0)) for p in support))
    report(7, worst <= 1e-8, f"max rate error {worst:.1e} over 50 models", time.perf_counter() - t, 60)


def test_8_statistical_pipeline(report):
    t = time.perf_counter()
    n = 3
    support = pairwise_local_support(n)
    paulis = all_paulis(n)[1:]
    fractions = []
    for seed in range(10):
        rates = np.random.default_rng(seed).uniform(1e-3, 1e-2, size=len(support))
        truth = PauliLindbladModel(n, tuple(zip(support, rates.tolist())), "l")
        curves = synthesize_learning_data(channel_from_model(truth), paulis, spam=0.98,
                                          depths=[0, 2, 4, 16, 32, 64], n_randomizations=100,
                                          shots=200, seed=seed)
        record = record_from_curves(curves, support, layer_id="l")
        fit = fit_model_nnls(record)
        boot = bootstrap(curves, support, 30, seed=seed, layer_id="l")
        with_cov = ModelFitResult(fit.model, boot.fit.rate_covariance, {})
        f_mod = model_fidelities(fit.model, paulis)
        flagged = 0
        for p, fm in zip(paulis, f_mod):
            f, se = record.fidelities[p]
            s = ratio_sigma(f, se, float(fm), model_prediction_sigma(with_cov, ["l"], [p]))
            flagged += abs(1 - f / fm) > s
        fractions.append(flagged / len(paulis))
    worst = max(fractions)
    report(8, worst <= 0.45, f"max fraction over 1 sigma {worst:.3f} (mean {np.mean(fractions):.3f}) over 10 seeds",
           time.perf_counter() - t, 300)


def test_9_pea_tem_sanity(report):
    t = time.perf_counter()
    rng = np.random.default_rng(9)
    nonzero = 0
    for _ in range(100):
        n = int(rng.integers(1, 4))
        ps = all_paulis(n)[1:]
        k = int(rng.integers(1, len(ps) + 1))
        model = PauliLindbladModel(n, tuple((ps[i], float(rng.uniform(1e-3, 5e-2)))
                                            for i in rng.choice(len(ps), size=k, replace=False)))
        f = channel_from_model(model).values
        depth = int(rng.integers(1, 6))
        eta, _ = pea_bound([f] * depth, [f] * depth, [0.0, 1.0, 1.5, 2.0, 3.0])
        layers = [LayerRatioData.from_channel(PauliStochastishChannel.from_array(f / f), gamma(model))] * depth
        nonzero += int(np.any(eta != 0.0)) + int(tem_bound(layers) != 0.0)
    dominated = 0
    for _ in range(20):
        vals = 1 + rng.uniform(-0.05, 0.05, size=16)
        vals[0] = 1
        g = float(rng.uniform(1.01, 1.3))
        depth = int(rng.integers(1, 6))
        layers = [LayerRatioData.from_channel(PauliStochastishChannel.from_array(vals), g)] * depth
        pec_sum = depth * layer_distance_two_norm(layers[0])
        dominated += tem_bound(layers) >= pec_sum - 1e-15 and tem_bound(layers) >= delta_two(layers) - 1e-15
    ok = nonzero == 0 and dominated == 20
    report(9, ok, f"{nonzero} nonzero results for matching models; tem >= PEC sum in {dominated}/20 fixtures",
           time.perf_counter() - t, 10)


def test_10_cli_reproducibility(report, tmp_path):
    t = time.perf_counter()
    support = pairwise_local_support(2)
    truth = PauliLindbladModel(2, tuple((p, 1e-3 * (i + 1)) for i, p in enumerate(support)), "l")
    rec = tmp_path / "record.json"
    rec.write_text(json.dumps(record_to_json(exact_learning_record(channel_from_model(truth), support,
                                                                   layer_id="l"))))
    mod = tmp_path / "model.json"
    mod.write_text(json.dumps(model_to_json(truth)))
    reps = []
    for d in (2, 4):
        p = tmp_path / f"rep{d}.json"
        p.write_text(json.dumps({"report": {"depth": d, "totals": {"delta_two": 0.01 * d}}}))
        reps.append(str(p))
    commands = {
        "fit": ["fit", str(rec)],
        "bounds": ["bounds", str(rec), str(mod), "--layers", "1..4"],
        "compare": ["compare", str(mod), str(mod), "--layers", "3"],
        "pea-bound": ["pea-bound", str(rec), str(mod), "--expectations", "0.9,0.86,0.8"],
        "tem-bound": ["tem-bound", str(rec), str(mod), "--layers", "2"],
        "simulate": ["--seed", "3", "simulate", "crosstalk", "--depth", "2", "--n-circuits", "8"],
        "extrapolate": ["extrapolate", *reps, "--axis", "depth", "--predict", "10"],
    }
    failures = []
    for name, args in commands.items():
        trees = []
        for run, workers in enumerate(("1", "4", "1")):
            out = tmp_path / f"{name}-{run}"
            code = main(["--workers", workers, "--out-dir", str(out), *args])
            trees.append((code, {p.name: p.read_bytes() for p in sorted(out.iterdir())}))
        if trees[0][0] != 0 or any(tr != trees[0] for tr in trees[1:]):
            failures.append(name)
    report(10, not failures, f"{len(commands) - len(failures)}/{len(commands)} commands byte-identical on rerun"
                             + (f"; failing: {failures}" if failures else ""), time.perf_counter() - t, 120)
