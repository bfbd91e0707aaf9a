"""Limited-memory quasi-Newton minimizer with backtracking line search."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LbfgsResult", "lbfgs"]


@dataclass
class LbfgsResult:
    x: np.ndarray
    fun: float
    grad_norm: float
    n_iters: int
    converged: bool
    message: str


def lbfgs(
    fun_grad,
    x0,
    grad_tol: float = 1e-8,
    max_iters: int = 1000,
    history: int = 10,
    c1: float = 1e-4,
    backtrack: float = 0.5,
    max_ls: int = 40,
) -> LbfgsResult:
    """Minimize fun_grad(x) -> (f, g) over a flat array x.

    Two-loop recursion with gamma-scaled initial Hessian and Armijo
    backtracking; accepted iterates are monotone in f.
    """
    x = np.asarray(x0, dtype=float).copy()
    f, g = fun_grad(x)
    if not np.isfinite(f):
        return LbfgsResult(x, f, np.inf, 0, False, "non-finite initial energy")
    s_hist, y_hist, rho_hist = [], [], []
    message = "max iterations reached"
    converged = False
    k = 0
    for k in range(1, max_iters + 1):
        gnorm = float(np.linalg.norm(g))
        if gnorm <= grad_tol:
            converged, message = True, "gradient tolerance reached"
            k -= 1
            break

        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, r in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = r * (s @ q)
            alphas.append(a)
            q -= a * y
        if y_hist:
            gamma = (s_hist[-1] @ y_hist[-1]) / (y_hist[-1] @ y_hist[-1])
            q *= max(gamma, 1e-12)
        for (s, y, r), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = r * (y @ q)
            q += (a - b) * s
        p = -q
        slope = float(g @ p)
        if slope >= 0:  # not a descent direction: reset
            p = -g
            slope = -gnorm**2
            s_hist, y_hist, rho_hist = [], [], []

        t = 1.0
        accepted = False
        for _ in range(max_ls):
            xn = x + t * p
            fn, gn = fun_grad(xn)
            if np.isfinite(fn) and fn <= f + c1 * t * slope:
                accepted = True
                break
            t *= backtrack
        if not accepted:
            message = "line search failed"
            break

        s = xn - x
        y = gn - g
        sy = float(s @ y)
        x, f, g = xn, fn, gn
        if sy > 1e-12 * float(np.linalg.norm(s)) * float(np.linalg.norm(y)):
            s_hist.append(s)
            y_hist.append(y)
            rho_hist.append(1.0 / sy)
            if len(s_hist) > history:
                s_hist.pop(0)
                y_hist.pop(0)
                rho_hist.pop(0)
    else:
        k = max_iters
    gnorm = float(np.linalg.norm(g))
    if gnorm <= grad_tol:
        converged, message = True, "gradient tolerance reached"
    return LbfgsResult(x, float(f), gnorm, k, converged, message)
