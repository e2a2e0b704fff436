"""Double-well potentials, their convex/concave split and Moreau-Yosida envelopes.

Every function is vectorized: scalars in, scalars out; arrays in, arrays out.
"""
import logging
from typing import Tuple, Union

import numpy as np
from scipy.special import xlogy

from membrane.core.exceptions import NumericException, ValidationException
from membrane.domain.potential import (
    LogExtendedPotential,
    MoreauYosidaPotential,
    PolynomialPotential,
)

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]

RESOLVENT_TOL = 1e-12
RESOLVENT_MAX_ITER = 200


def _out(x: np.ndarray, like) -> ArrayLike:
    return float(x) if np.ndim(like) == 0 else x


# -- logarithmic convex part ----------------------------------------------------

def log_convex(theta: float, s: ArrayLike) -> np.ndarray:
    """(theta/2)((1+s)ln(1+s) + (1-s)ln(1-s)) on [-1, 1], with 0 ln 0 = 0."""
    s = np.asarray(s, dtype=float)
    return 0.5 * theta * (xlogy(1.0 + s, 1.0 + s) + xlogy(1.0 - s, 1.0 - s))


def log_convex_prime(theta: float, s: ArrayLike) -> np.ndarray:
    return theta * np.arctanh(np.asarray(s, dtype=float))


def log_convex_second(theta: float, s: ArrayLike) -> np.ndarray:
    s = np.asarray(s, dtype=float)
    return theta / (1.0 - s * s)


def _taylor_seams(spec: LogExtendedPotential):
    """Value, slope and curvature of the log convex part at s = +-(1 - delta)."""
    seam = 1.0 - spec.delta
    points = np.array([-seam, seam])
    return (
        seam,
        log_convex(spec.theta, points),
        log_convex_prime(spec.theta, points),
        log_convex_second(spec.theta, points),
    )


def _log_extended_convex(spec: LogExtendedPotential, s: np.ndarray):
    seam, values, slopes, curvatures = _taylor_seams(spec)
    inner = np.clip(s, -seam, seam)
    w1 = log_convex(spec.theta, inner)
    dw1 = log_convex_prime(spec.theta, inner)
    d2w1 = log_convex_second(spec.theta, inner)

    for side, mask in ((0, s <= -seam), (1, s >= seam)):
        if not np.any(mask):
            continue
        anchor = -seam if side == 0 else seam
        ds = s[mask] - anchor
        w1[mask] = values[side] + ds * slopes[side] + 0.5 * ds * ds * curvatures[side]
        dw1[mask] = slopes[side] + ds * curvatures[side]
        d2w1[mask] = curvatures[side]
    return w1, dw1, d2w1


def _log_concave(spec: LogExtendedPotential, s: np.ndarray):
    w2 = -0.5 * spec.theta_c * s * s - spec.mu0 * s
    dw2 = -spec.theta_c * s - spec.mu0
    return w2, dw2


# -- Moreau-Yosida --------------------------------------------------------------

def resolvent(base: LogExtendedPotential, lam: float, r: ArrayLike) -> ArrayLike:
    """Solve s + lam * W1'(s) = r for s in (-1, 1), W1 the logarithmic convex part.

    Safeguarded Newton: a bracketing interval is kept and bisection replaces
    any Newton step that leaves it.
    """
    if lam <= 0:
        raise ValidationException(f"Moreau-Yosida parameter must be positive, got {lam}")
    r_arr = np.atleast_1d(np.asarray(r, dtype=float))
    if not np.all(np.isfinite(r_arr)):
        raise ValidationException("resolvent needs finite arguments")
    k = lam * base.theta

    s = np.tanh(r_arr / (1.0 + k))
    lo = np.full_like(s, -1.0)
    hi = np.full_like(s, 1.0)
    active = np.ones(s.shape, dtype=bool)
    tol = RESOLVENT_TOL * np.maximum(1.0, np.abs(r_arr))

    for _ in range(RESOLVENT_MAX_ITER):
        sa = s[active]
        f = sa + k * np.arctanh(sa) - r_arr[active]
        done = np.abs(f) <= tol[active]
        lo_a = np.where(f < 0, sa, lo[active])
        hi_a = np.where(f > 0, sa, hi[active])
        # bracket collapsed to machine resolution
        done |= (hi_a - lo_a) <= 4.0 * np.finfo(float).eps * np.maximum(np.abs(sa), 1e-300)

        step = sa - f / (1.0 + k / ((1.0 - sa) * (1.0 + sa)))
        outside = ~((step > lo_a) & (step < hi_a)) | ~np.isfinite(step)
        step = np.where(outside, 0.5 * (lo_a + hi_a), step)
        s_new = np.where(done, sa, step)

        idx = np.flatnonzero(active)
        s[idx] = s_new
        lo[idx] = lo_a
        hi[idx] = hi_a
        active[idx[done]] = False
        if not active.any():
            return _out(s if np.ndim(r) else s[0], r)

    raise NumericException(
        f"resolvent did not converge in {RESOLVENT_MAX_ITER} iterations for {int(active.sum())} points"
    )


def moreau_yosida_eval(base: LogExtendedPotential, lam: float, r: ArrayLike) -> Tuple[ArrayLike, ArrayLike]:
    """Envelope W_{1,lam}(r) and its derivative w_{1,lam}(r) = (r - s*)/lam."""
    s_star = np.asarray(resolvent(base, lam, r), dtype=float)
    r_arr = np.asarray(r, dtype=float)
    gap = r_arr - s_star
    value = gap * gap / (2.0 * lam) + log_convex(base.theta, s_star)
    slope = gap / lam
    return _out(value, r), _out(slope, r)


def _moreau_yosida_convex(spec: MoreauYosidaPotential, s: np.ndarray):
    s_star = np.asarray(resolvent(spec.base, spec.lam, s), dtype=float)
    gap = s - s_star
    w1 = gap * gap / (2.0 * spec.lam) + log_convex(spec.base.theta, s_star)
    dw1 = gap / spec.lam
    # W1'' / (1 + lam W1''), finite when s* rounds to +-1
    d2w1 = 1.0 / (spec.lam + (1.0 - s_star * s_star) / spec.base.theta)
    return w1, dw1, d2w1


# -- public split ---------------------------------------------------------------

def _split_arrays(spec, s: np.ndarray):
    """(W1, W2, W1', W2', W1'') as arrays."""
    if isinstance(spec, PolynomialPotential):
        s2 = s * s
        w1 = spec.a4 * s2 * s2
        dw1 = 4.0 * spec.a4 * s2 * s
        d2w1 = 12.0 * spec.a4 * s2
        w2 = -spec.a2 * s2 - spec.mu0 * s + spec.a0
        dw2 = -2.0 * spec.a2 * s - spec.mu0
        return w1, w2, dw1, dw2, d2w1
    if isinstance(spec, LogExtendedPotential):
        w1, dw1, d2w1 = _log_extended_convex(spec, s)
        w2, dw2 = _log_concave(spec, s)
        return w1, w2, dw1, dw2, d2w1
    if isinstance(spec, MoreauYosidaPotential):
        w1, dw1, d2w1 = _moreau_yosida_convex(spec, s)
        w2, dw2 = _log_concave(spec.base, s)
        return w1, w2, dw1, dw2, d2w1
    raise ValidationException(f"unknown potential spec {type(spec).__name__}")


def eval_split(spec, s: ArrayLike) -> Tuple[ArrayLike, ArrayLike, ArrayLike, ArrayLike]:
    """Values and slopes of the convex part W1 and concave part W2."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    w1, w2, dw1, dw2, _ = _split_arrays(spec, s_arr)
    if np.ndim(s) == 0:
        return float(w1[0]), float(w2[0]), float(dw1[0]), float(dw2[0])
    return w1, w2, dw1, dw2


def potential(spec, s: ArrayLike) -> ArrayLike:
    """Full double-well W = W1 + W2."""
    w1, w2, _, _ = eval_split(spec, s)
    return w1 + w2


def potential_prime(spec, s: ArrayLike) -> ArrayLike:
    _, _, dw1, dw2 = eval_split(spec, s)
    return dw1 + dw2


def convex_part(spec, s: ArrayLike) -> ArrayLike:
    w1, _, _, _ = eval_split(spec, s)
    return w1


def convex_slope(spec, s: ArrayLike) -> ArrayLike:
    _, _, dw1, _ = eval_split(spec, s)
    return dw1


def concave_slope(spec, s: ArrayLike) -> ArrayLike:
    _, _, _, dw2 = eval_split(spec, s)
    return dw2


def convex_curvature(spec, s: ArrayLike) -> ArrayLike:
    """W1'', the diagonal of the Newton Hessian contributed by the potential."""
    s_arr = np.atleast_1d(np.asarray(s, dtype=float))
    d2w1 = _split_arrays(spec, s_arr)[4]
    return float(d2w1[0]) if np.ndim(s) == 0 else d2w1
