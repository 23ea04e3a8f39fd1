"""Check the bounds against exact simulation: cross-talk, T1 drift and the Clifford counterexample.

Run:  python demos/simulation_experiments.py
"""
from mvbounds.experiments import ExperimentConfig, run_experiment

res = run_experiment(ExperimentConfig("crosstalk", seed=0, depth=4, n_circuits=200,
                                      crosstalk_grid=[1e-4, 1e-3, 1e-2], zero_in_model=True))
print("cross-talk (Z...Z between the end qubits, absorbed into single-qubit rates):")
for p in res.summary["points"]:
    print(f"  lambda = {p['lambda_crosstalk']:.0e}: delta_gamma = {p['delta_gamma']:.4e}, "
          f"closed form = {p['closed_form']:.4e}, max delta_o = {p['delta_o']['max']:.4e}")

res = run_experiment(ExperimentConfig("t1_drift", seed=0, depth=100, n_circuits=200,
                                      drift_grid=[-0.1, 0.0, 0.1]))
print("T1 drift (relative change of 1/T1 after learning):")
for p in res.summary["points"]:
    print(f"  drift {p['relative_drift']:+.2f}: delta_C = {p['delta_c']:.4e}, "
          f"worst-case Clifford = {p['worst_case_clifford']:.4e}, max delta_o = {p['delta_o']['max']:.4e}")

res = run_experiment(ExperimentConfig("counterexample", seed=0))
s = res.summary
print("rotation circuit around a Clifford point (depth 25):")
print(f"  positive Hessian eigenvalues: {s['n_positive_eigenvalues']}")
print(f"  worst-case Clifford value {s['worst_case_clifford']:.6f}, "
      f"max along top eigenvector {s['max_delta_o_per_eigenvector'][-1]:.6f}")
