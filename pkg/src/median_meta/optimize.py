"""Batched box-constrained quasi-Newton minimization.

Many small, independent problems (one per group x start) are advanced in
lock step so that each objective call is a single vectorized evaluation.
Each problem runs a projected BFGS iteration:

* gradient by central finite differences, one-sided at the box faces;
* variables sitting on a face with the gradient pointing outward are held
  fixed and the step is a reduced quasi-Newton step on the rest;
* projected backtracking line search with an Armijo condition;
* stop when the objective reduction falls below ``ftol * max(|f|, |f_new|, 1)``
  (the L-BFGS-B ``factr`` rule), when the projected gradient vanishes, or
  when no decrease can be found.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# 1e7 times machine epsilon, the default reduction tolerance of R's optim.
FTOL = 1e7 * np.finfo(float).eps

STATUS_FTOL = 0
STATUS_PGTOL = 1
STATUS_LINESEARCH = 2
STATUS_MAXITER = 3
STATUS_NONFINITE = 4


@dataclass
class BatchResult:
    x: np.ndarray
    fun: np.ndarray
    status: np.ndarray
    nit: np.ndarray

    @property
    def converged(self) -> np.ndarray:
        return self.status <= STATUS_LINESEARCH


def _gradient(fun, x, f, lower, upper, idx, rel_step):
    n, d = x.shape
    h = rel_step * np.maximum(np.abs(x), 1.0)
    eye = np.eye(d)
    xp = (x[:, None, :] + h[:, :, None] * eye).reshape(-1, d)
    xm = (x[:, None, :] - h[:, :, None] * eye).reshape(-1, d)
    ok_p = (x + h <= upper)
    ok_m = (x - h >= lower)
    pts = np.concatenate([np.minimum(xp, np.repeat(upper, d, axis=0)),
                          np.maximum(xm, np.repeat(lower, d, axis=0))])
    vals = fun(pts, np.concatenate([np.repeat(idx, d), np.repeat(idx, d)]))
    fp = vals[: n * d].reshape(n, d)
    fm = vals[n * d:].reshape(n, d)
    ok_p &= np.isfinite(fp)
    ok_m &= np.isfinite(fm)
    fc = f[:, None]
    with np.errstate(invalid="ignore", over="ignore"):
        g = np.where(ok_p & ok_m, (fp - fm) / (2 * h),
                     np.where(ok_p, (fp - fc) / h,
                              np.where(ok_m, (fc - fm) / h, 0.0)))
    return np.where(np.isfinite(g), g, 0.0)


def minimize_box(fun, x0, lower, upper, *, ftol=FTOL, gtol=1e-10, max_iter=500,
                 rel_step=1e-6, max_backtracks=60):
    """Minimize a batch of box-constrained problems.

    Parameters
    ----------
    fun : callable
        ``fun(X, idx)`` returns the objective values for the points ``X``
        (shape ``(m, d)``), where row ``r`` belongs to problem ``idx[r]``.
        Non-finite values are treated as infeasible.
    x0, lower, upper : array_like, shape (B, d)
        Starting points and box bounds (starting points are clipped).

    Returns
    -------
    BatchResult
    """
    lower = np.atleast_2d(np.asarray(lower, dtype=float))
    upper = np.atleast_2d(np.asarray(upper, dtype=float))
    x = np.clip(np.atleast_2d(np.asarray(x0, dtype=float)), lower, upper)
    B, d = x.shape
    all_idx = np.arange(B)
    f = np.asarray(fun(x, all_idx), dtype=float)
    status = np.full(B, -1)
    nit = np.zeros(B, dtype=int)
    status[~np.isfinite(f)] = STATUS_NONFINITE

    g = np.zeros_like(x)
    H = np.tile(np.eye(d), (B, 1, 1))
    first = np.ones(B, dtype=bool)
    act = np.flatnonzero(status < 0)
    if act.size:
        g[act] = _gradient(fun, x[act], f[act], lower[act], upper[act], act, rel_step)
        gn = np.linalg.norm(g[act], axis=1)
        H[act] *= (1.0 / np.maximum(gn, 1e-300))[:, None, None]

    eye = np.eye(d)
    for it in range(max_iter):
        act = np.flatnonzero(status < 0)
        if act.size == 0:
            break
        xa, ga, lo, hi = x[act], g[act], lower[act], upper[act]
        span = np.maximum(hi - lo, 1e-300)
        at_lo = xa <= lo + 1e-12 * span
        at_hi = xa >= hi - 1e-12 * span
        fixed = (at_lo & (ga > 0)) | (at_hi & (ga < 0))
        pg = np.where(fixed, 0.0, ga)
        done = np.max(np.abs(pg), axis=1) <= gtol
        status[act[done]] = STATUS_PGTOL
        keep = ~done
        act, xa, ga, lo, hi, fixed, pg = (a[keep] for a in (act, xa, ga, lo, hi, fixed, pg))
        if act.size == 0:
            break

        # reduced quasi-Newton step: solve B_ff d_f = -g_f with B = H^-1
        Ha = H[act]
        with np.errstate(all="ignore"):
            Bm = np.linalg.inv(Ha)
        ff = ~fixed
        mask2 = ff[:, :, None] & ff[:, None, :]
        Bm = np.where(mask2, Bm, eye)
        bad = ~np.all(np.isfinite(Bm.reshape(len(act), -1)), axis=1)
        Bm[bad] = eye
        try:
            step = -np.linalg.solve(Bm, pg[:, :, None])[:, :, 0]
        except np.linalg.LinAlgError:
            step = -pg
        step = np.where(ff, step, 0.0)
        slope = np.sum(ga * step, axis=1)
        reset = ~(slope < 0) | ~np.all(np.isfinite(step), axis=1)
        if np.any(reset):
            scale = 1.0 / np.maximum(np.linalg.norm(pg[reset], axis=1), 1e-300)
            step[reset] = -pg[reset] * scale[:, None]
            H[act[reset]] = eye * scale[:, None, None]
            first[act[reset]] = True

        # projected backtracking
        alpha = np.ones(len(act))
        fa = f[act]
        new_x = xa.copy()
        new_f = fa.copy()
        pending = np.ones(len(act), dtype=bool)
        for _ in range(max_backtracks):
            pi = np.flatnonzero(pending)
            if pi.size == 0:
                break
            trial = np.clip(xa[pi] + alpha[pi, None] * step[pi], lo[pi], hi[pi])
            ft = np.asarray(fun(trial, act[pi]), dtype=float)
            dec = np.sum(ga[pi] * (trial - xa[pi]), axis=1)
            moved = np.any(trial != xa[pi], axis=1)
            ok = np.isfinite(ft) & (ft <= fa[pi] + 1e-4 * dec) & moved
            acc = pi[ok]
            new_x[acc] = trial[ok]
            new_f[acc] = ft[ok]
            pending[acc] = False
            stuck = pi[~ok & ~moved]
            pending[stuck] = False
            alpha[pi[~ok]] *= 0.5
        failed = np.all(new_x == xa, axis=1)
        status[act[failed]] = STATUS_LINESEARCH
        nit[act] += 1

        prog = ~failed
        act, xa, ga, fa = act[prog], xa[prog], ga[prog], fa[prog]
        xn, fn = new_x[prog], new_f[prog]
        x[act] = xn
        f[act] = fn
        small = (fa - fn) <= ftol * np.maximum(np.maximum(np.abs(fa), np.abs(fn)), 1.0)
        status[act[small]] = STATUS_FTOL
        cont = ~small
        act, xa, ga, xn = act[cont], xa[cont], ga[cont], xn[cont]
        if act.size == 0:
            continue
        gn = _gradient(fun, xn, f[act], lower[act], upper[act], act, rel_step)
        g[act] = gn
        s = xn - xa
        y = gn - ga
        sy = np.sum(s * y, axis=1)
        upd = sy > 1e-10 * np.linalg.norm(s, axis=1) * np.linalg.norm(y, axis=1)
        if np.any(upd):
            ai = act[upd]
            su, yu, syu = s[upd], y[upd], sy[upd]
            init = first[ai]
            if np.any(init):
                yy = np.sum(yu[init] ** 2, axis=1)
                H[ai[init]] = eye * (syu[init] / yy)[:, None, None]
                first[ai[init]] = False
            rho = 1.0 / syu
            V = eye - rho[:, None, None] * su[:, :, None] * yu[:, None, :]
            H[ai] = V @ H[ai] @ V.transpose(0, 2, 1) + rho[:, None, None] * su[:, :, None] * su[:, None, :]
    status[status < 0] = STATUS_MAXITER
    return BatchResult(x=x, fun=f, status=status, nit=nit)
