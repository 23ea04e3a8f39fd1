"""Active-set non-negative least squares (Lawson-Hanson)."""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np


@dataclass
class NNLSResult:
    x: np.ndarray
    residual_norm: float
    iterations: int
    # residual norm after every outer (active-set growth) iteration, starting at x = 0
    history: list[float] = field(default_factory=list)

    def gradient(self, a: np.ndarray, b: np.ndarray) -> np.ndarray:
        """Gradient of ``0.5 * ||a x - b||^2`` at the solution."""
        return a.T @ (a @ self.x - b)


def nnls(a: np.ndarray, b: np.ndarray, max_iter: int | None = None,
         tol: float | None = None) -> NNLSResult:
    """Solve ``min ||a x - b||_2`` subject to ``x >= 0``.

    Lawson & Hanson's active-set method: variables move from the active (clamped at zero)
    set to the passive set one at a time, by largest positive dual component; an inner loop
    backtracks along the segment to the unconstrained passive-set solution whenever that
    solution leaves the feasible region.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.ndim != 2 or b.ndim != 1 or a.shape[0] != b.shape[0]:
        raise ValueError(f"incompatible shapes {a.shape} and {b.shape}")
    m, n = a.shape
    if max_iter is None:
        max_iter = 3 * n + 10
    if tol is None:
        tol = 10 * np.finfo(float).eps * max(m, n) * max(1.0, np.linalg.norm(a, ord=1))

    x = np.zeros(n)
    passive = np.zeros(n, dtype=bool)
    history = [float(np.linalg.norm(b))]
    w = a.T @ (b - a @ x)
    it = 0
    while it < max_iter and not passive.all():
        w_active = np.where(passive, -np.inf, w)
        j = int(np.argmax(w_active))
        if w_active[j] <= tol:
            break
        passive[j] = True
        it += 1
        while True:
            s = np.zeros(n)
            idx = np.flatnonzero(passive)
            s[idx] = np.linalg.lstsq(a[:, idx], b, rcond=None)[0]
            if np.all(s[idx] > 0):
                x = s
                break
            neg = idx[s[idx] <= 0]
            steps = x[neg] / (x[neg] - s[neg])
            k = int(np.argmin(steps))
            x = x + steps[k] * (s - x)
            # the blocking variable lands exactly on the bound
            x[neg[k]] = 0.0
            drop = passive & (x <= tol)
            passive[drop] = False
            x[~passive] = 0.0
            if not passive.any():
                break
        w = a.T @ (b - a @ x)
        history.append(float(np.linalg.norm(a @ x - b)))
    return NNLSResult(x, float(np.linalg.norm(a @ x - b)), it, history)
