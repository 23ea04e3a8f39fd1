"""Learn a sparse noise model from synthetic decay curves and bound the mitigation error.

A two-layer story: the device noise contains a weak long-range term the model cannot
represent, so the learnt model is slightly wrong; the fidelity ratios expose this and the
bounds turn it into a guarantee on the mitigated expectation value.

Run:  python demos/learn_and_bound.py
"""
import numpy as np

from mvbounds.bounds import LayerRatioData, bound_report
from mvbounds.channels import PauliLindbladModel, channel_from_model, gamma, model_fidelities
from mvbounds.learning import (
    fit_model_nnls,
    pairwise_local_support,
    record_from_curves,
    synthesize_learning_data,
)
from mvbounds.pauli import PauliString, all_paulis

n = 3
support = pairwise_local_support(n)
rng = np.random.default_rng(0)

# device noise: pairwise-local rates plus a ZIZ term outside the model support
terms = [(p, float(r)) for p, r in zip(support, rng.uniform(1e-4, 5e-4, len(support)))]
terms.append((PauliString.from_label("ZIZ"), 5e-3))
truth = PauliLindbladModel(n, tuple(terms), "layer")

# measure every Pauli: with only as many fidelities as rates the fit would reproduce the
# data exactly and all ratios would be 1, hiding the violation
measured = all_paulis(n)[1:]
curves = synthesize_learning_data(channel_from_model(truth), measured, spam=0.97, seed=1)
record = record_from_curves(curves, support, layer_id="layer")
fit = fit_model_nnls(record)
print(f"fitted {len(fit.model.terms)} rates, gamma = {gamma(fit.model):.5f}")

f_mod = model_fidelities(fit.model, measured)
ratios = {p: record.fidelities[p][0] / fm for p, fm in zip(measured, f_mod)}
worst = max(ratios, key=lambda p: abs(1 - ratios[p]))
print(f"largest ratio deviation: {worst.label} r = {ratios[worst]:.5f}")

layer = LayerRatioData(n, ratios, gamma(fit.model), "layer")
for depth in (1, 10, 50):
    totals = bound_report([layer] * depth).to_dict()["totals"]
    print(f"depth {depth:3d}: " + ", ".join(f"{k} = {v:.4g}" for k, v in totals.items()))
