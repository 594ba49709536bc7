"""Compiled inner loops for the Feller (parasite) diffusion.

Full-truncation Euler-Maruyama: coefficients use max(x, 0); the raw state is
carried between steps.  Both kernels work on caller-supplied random arrays
and are resumable, so the caller refills randomness chunk by chunk from the
individual's own stream.
"""
import math

import numba

# status codes shared with the Python side
NEED_MORE = 0
DIED = 1
HORIZON = 2
OUT_OF_UNIFORMS = 3


@numba.njit(cache=True)
def _phi(d, tau):
    # (e^{d tau} - 1) / d, continuous at d = 0
    if d == 0.0:
        return tau
    return math.expm1(d * tau) / d


@numba.njit(cache=True)
def feller_life_chunk(x, t, horizon, h, e, dt, g, s2, alpha, beta, z, out_t, out_x):
    """Advance one individual until its hazard integral reaches ``e``.

    The division rate alpha*x+beta is frozen at the left end of each step,
    so the death time inside a step is exact for the discretised path.
    Returns ``(n_written, x, t, h, status)``.
    """
    n = 0
    for i in range(z.shape[0]):
        if horizon - t <= 1e-12:
            return n, x, horizon, h, HORIZON
        step = min(dt, horizon - t)
        xp = max(x, 0.0)
        rate = alpha * xp + beta
        xn = x + g * xp * step + math.sqrt(2.0 * s2 * xp * step) * z[i]
        if h + rate * step >= e:
            frac = (e - h) / rate
            xd = x + (xn - x) * (frac / step)
            out_t[n] = t + frac
            out_x[n] = max(xd, 0.0)
            return n + 1, xd, t + frac, e, DIED
        h += rate * step
        t += step
        x = xn
        out_t[n] = t
        out_x[n] = max(x, 0.0)
        n += 1
    if horizon - t <= 1e-12:
        return n, x, horizon, h, HORIZON
    return n, x, t, h, NEED_MORE


@numba.njit(cache=True)
def spine_rate(x, r, horizon, g, alpha, beta):
    lam = 1.0 + 1.0 / (1.0 + alpha * x * _phi(g - beta, horizon - r))
    return (alpha * x + beta) * lam


@numba.njit(cache=True)
def spine_drift(x, r, horizon, g, s2, alpha, beta):
    k = alpha * x * _phi(g - beta, horizon - r)
    return g * x + 2.0 * s2 * k / (1.0 + k)


@numba.njit(cache=True)
def spine_kernel_inverse(x, r, horizon, g, alpha, beta, u):
    # inverse CDF of the density proportional to 1 + kappa*y on [0, x]
    kappa = alpha * _phi(g - beta, horizon - r)
    c = u * (x + 0.5 * kappa * x * x)
    return 2.0 * c / (1.0 + math.sqrt(1.0 + 2.0 * kappa * c))


@numba.njit(cache=True)
def feller_spine_chunk(x, s, stop, horizon, e, dt, g, s2, alpha, beta, bound_factor,
                       biased, z, u, out_t, out_x, out_ev):
    """Advance a spine diffusion: biased if ``biased``, else a tagged line.

    Divisions come from thinning: proposals at the frozen-trait bound
    ``bound_factor * (alpha*x+beta)`` over each step, acceptance with the
    time-dependent biased rate.  A tagged line divides at the bound itself
    and keeps a uniform share of the load.  ``out_ev`` marks division
    points (1) and thinning-bound violations (-1).  Returns
    ``(n_written, x, s, e, iz, iu, status)``.  The path runs to ``stop``;
    ``horizon`` is the sampling time the bias refers to.
    """
    n = 0
    iz = 0
    iu = 0
    nz = z.shape[0]
    nu = u.shape[0]
    while stop - s > 1e-12:
        if iz >= nz or nu - iu < 64:
            return n, x, s, e, iz, iu, NEED_MORE
        step = min(dt, stop - s)
        xp = max(x, 0.0)
        if biased:
            drift = spine_drift(xp, s, horizon, g, s2, alpha, beta)
        else:
            drift = g * xp
        xn = x + drift * step + math.sqrt(2.0 * s2 * xp * step) * z[iz]
        iz += 1
        bound = bound_factor * (alpha * xp + beta)
        r = s
        jumped = False
        while True:
            room = bound * (s + step - r)
            if e > room:
                e -= room
                break
            r = r + e / bound
            if iu + 3 > nu:
                return n, x, s, e, iz, iu, OUT_OF_UNIFORMS
            e = -math.log1p(-u[iu])
            iu += 1
            if biased:
                rate = spine_rate(xp, r, horizon, g, alpha, beta)
            else:
                # tagged line: rate bound_factor * B, so every proposal is kept
                rate = bound
            if rate > bound * (1.0 + 1e-12):
                out_ev[n] = -1
                out_t[n] = r
                out_x[n] = xp
                return n + 1, x, s, e, iz, iu, OUT_OF_UNIFORMS
            accept = u[iu] * bound <= rate
            iu += 1
            if accept:
                xpre = x + (xn - x) * ((r - s) / step)
                ypre = max(xpre, 0.0)
                out_t[n] = r
                out_x[n] = ypre
                out_ev[n] = 0
                n += 1
                if biased:
                    ypost = spine_kernel_inverse(ypre, r, horizon, g, alpha, beta, u[iu])
                else:
                    ypost = u[iu] * ypre
                iu += 1
                out_t[n] = r
                out_x[n] = ypost
                out_ev[n] = 1
                n += 1
                x = ypost
                s = r
                jumped = True
                break
        if not jumped:
            s += step
            x = xn
            out_t[n] = s
            out_x[n] = max(x, 0.0)
            out_ev[n] = 0
            n += 1
    return n, x, stop, e, iz, iu, HORIZON


@numba.njit(cache=True)
def feller_free_chunk(x, t, t_end, dt, g, s2, z, out_t, out_x):
    """Plain Euler path of the unbiased motion, no divisions."""
    n = 0
    for i in range(z.shape[0]):
        if t_end - t <= 1e-12:
            return n, x, t_end, HORIZON
        step = min(dt, t_end - t)
        xp = max(x, 0.0)
        x = x + g * xp * step + math.sqrt(2.0 * s2 * xp * step) * z[i]
        t += step
        out_t[n] = t
        out_x[n] = max(x, 0.0)
        n += 1
    if t_end - t <= 1e-12:
        return n, x, t_end, HORIZON
    return n, x, t, NEED_MORE

