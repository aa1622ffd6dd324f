"""Limited-memory BFGS with a strong-Wolfe line search.

Follows Nocedal & Wright, Numerical Optimization (2nd ed.), Algorithms 3.5,
3.6 (bracketing + zoom) and 7.4 (two-loop recursion). A fixed
preconditioner may be supplied as the initial inverse Hessian.
"""

from __future__ import annotations

import logging
import math
from collections import deque
from dataclasses import dataclass, field

import numpy as np

logger = logging.getLogger(__name__)

MAX_NAN_RETRIES = 30


class LineSearchError(RuntimeError):
    pass


class NonFiniteError(RuntimeError):
    pass


@dataclass
class LBFGSResult:
    x: np.ndarray
    f: float
    g: np.ndarray
    iterations: int
    n_eval: int
    reason: str
    f_history: list = field(default_factory=list)
    gnorm_history: list = field(default_factory=list)

    @property
    def converged(self):
        return self.reason == "gtol"


def _cubic_min(a, fa, ga, b, fb, gb):
    d1 = ga + gb - 3 * (fa - fb) / (a - b)
    rad = d1 * d1 - ga * gb
    if rad < 0:
        return None
    d2 = math.copysign(math.sqrt(rad), b - a)
    denom = gb - ga + 2 * d2
    if denom == 0:
        return None
    return b - (b - a) * (gb + d2 - d1) / denom


def _interpolate(a, fa, ga, b, fb, gb):
    lo, hi = min(a, b), max(a, b)
    t = _cubic_min(a, fa, ga, b, fb, gb)
    margin = 0.1 * (hi - lo)
    if t is None or not np.isfinite(t) or t < lo + margin or t > hi - margin:
        t = 0.5 * (a + b)
    return t


def wolfe_line_search(phi, f0, g0, alpha0, c1=1e-4, c2=0.9, max_iter=40, alpha_max=1e10):
    """Find alpha meeting the strong Wolfe conditions.

    ``phi(alpha)`` returns (f, dphi, payload). Non-finite trial values shrink
    the step deterministically. Returns (alpha, f, payload, n_evals).
    """
    if g0 >= 0:
        raise LineSearchError("not a descent direction")
    a_prev, f_prev, g_prev = 0.0, f0, g0
    alpha = alpha0
    n = 0
    nan_retries = 0
    i = 0
    while i < max_iter:
        f_a, g_a, payload = phi(alpha)
        n += 1
        if not (np.isfinite(f_a) and np.isfinite(g_a)):
            nan_retries += 1
            if nan_retries > MAX_NAN_RETRIES:
                raise NonFiniteError("non-finite energy persisted after step shrinking")
            alpha = a_prev + 0.5 * (alpha - a_prev)
            continue
        if f_a > f0 + c1 * alpha * g0 or (i > 0 and f_a >= f_prev):
            return _zoom(phi, f0, g0, a_prev, f_prev, g_prev, alpha, f_a, g_a, c1, c2, n)
        if abs(g_a) <= -c2 * g0:
            return alpha, f_a, payload, n
        if g_a >= 0:
            return _zoom(phi, f0, g0, alpha, f_a, g_a, a_prev, f_prev, g_prev, c1, c2, n)
        a_prev, f_prev, g_prev = alpha, f_a, g_a
        alpha = min(2.0 * alpha, alpha_max)
        i += 1
    raise LineSearchError("bracketing phase exceeded its iteration budget")


def _zoom(phi, f0, g0, a_lo, f_lo, g_lo, a_hi, f_hi, g_hi, c1, c2, n, max_iter=40):
    nan_retries = 0
    for _ in range(max_iter):
        alpha = _interpolate(a_lo, f_lo, g_lo, a_hi, f_hi, g_hi)
        f_a, g_a, payload = phi(alpha)
        n += 1
        if not (np.isfinite(f_a) and np.isfinite(g_a)):
            nan_retries += 1
            if nan_retries > MAX_NAN_RETRIES:
                raise NonFiniteError("non-finite energy persisted in zoom")
            a_hi, f_hi, g_hi = alpha, np.inf, np.nan
            continue
        if f_a > f0 + c1 * alpha * g0 or f_a >= f_lo:
            a_hi, f_hi, g_hi = alpha, f_a, g_a
        else:
            if abs(g_a) <= -c2 * g0:
                return alpha, f_a, payload, n
            if g_a * (a_hi - a_lo) >= 0:
                a_hi, f_hi, g_hi = a_lo, f_lo, g_lo
            a_lo, f_lo, g_lo = alpha, f_a, g_a
        if abs(a_hi - a_lo) <= 1e-14 * max(1.0, abs(a_lo)):
            break
    if a_lo > 0 and f_lo < f0:
        # sufficient decrease holds at a_lo; accept it rather than stall
        f_a, g_a, payload = phi(a_lo)
        return a_lo, f_a, payload, n + 1
    raise LineSearchError("zoom failed to find an acceptable step")


def lbfgs(fun_and_grad, x0, gtol=1e-8, max_iter=1000, memory=20, c1=1e-4, c2=0.9,
          precond=None, callback=None):
    """Minimise with L-BFGS; stop when max|g| <= gtol.

    `precond` is the initial inverse Hessian: either a positive vector (a
    diagonal) or a callable applying a symmetric positive definite operator.
    It is rescaled each iteration by the usual gamma_k factor.
    """
    x = np.array(x0, dtype=float)
    f, g = fun_and_grad(x)
    n_eval = 1
    if not np.isfinite(f):
        raise NonFiniteError("non-finite energy at the initial point")
    if precond is None:
        apply_h0 = np.copy
    elif callable(precond):
        apply_h0 = precond
    else:
        diag = np.asarray(precond, dtype=float)
        apply_h0 = diag.__mul__
    s_hist, y_hist, rho_hist = deque(maxlen=memory), deque(maxlen=memory), deque(maxlen=memory)
    f_hist, g_hist = [f], [float(np.max(np.abs(g)))]
    reason = "max_iter"
    it = 0
    for it in range(1, max_iter + 1):
        if g_hist[-1] <= gtol:
            reason = "gtol"
            it -= 1
            break
        # two-loop recursion
        q = g.copy()
        alphas = []
        for s, y, rho in zip(reversed(s_hist), reversed(y_hist), reversed(rho_hist)):
            a = rho * (s @ q)
            alphas.append(a)
            q -= a * y
        if s_hist:
            s, y = s_hist[-1], y_hist[-1]
            scale = (s @ y) / (y @ apply_h0(y))
            d = scale * apply_h0(q)
        else:
            d = apply_h0(q)
            d *= 1e-3 / max(np.max(np.abs(d)), 1e-300)
        for (s, y, rho), a in zip(zip(s_hist, y_hist, rho_hist), reversed(alphas)):
            b = rho * (y @ d)
            d += (a - b) * s
        d = -d
        slope = g @ d
        if slope >= 0:
            s_hist.clear(), y_hist.clear(), rho_hist.clear()
            d = -apply_h0(g)
            d /= max(np.max(np.abs(d)), 1e-300)
            slope = g @ d

        def phi(alpha, d=d):
            fx, gx = fun_and_grad(x + alpha * d)
            return fx, gx @ d, gx

        try:
            alpha, f_new, g_new, n_ls = wolfe_line_search(phi, f, slope, 1.0, c1=c1, c2=c2)
        except LineSearchError as exc:
            if s_hist:
                # retry once along preconditioned steepest descent
                s_hist.clear(), y_hist.clear(), rho_hist.clear()
                logger.debug("line search failed (%s); restarting memory", exc)
                continue
            reason = "line_search_failed"
            break
        except NonFiniteError:
            reason = "nan"
            break
        n_eval += n_ls
        step = alpha * d
        x_new = x + step
        yv = g_new - g
        sy = step @ yv
        if sy > 1e-300:
            s_hist.append(step)
            y_hist.append(yv)
            rho_hist.append(1.0 / sy)
        x, f, g = x_new, f_new, g_new
        f_hist.append(f)
        g_hist.append(float(np.max(np.abs(g))))
        if callback is not None:
            callback(it, x, f, g)
    else:
        if g_hist[-1] <= gtol:
            reason = "gtol"
    return LBFGSResult(x, f, g, it, n_eval, reason, f_hist, g_hist)
