"""Scalar M-estimation core: bounded-influence location and dispersion estimates.

The location estimate soft-truncates outliers through a bounded, increasing
influence function psi = rho'; the dispersion estimate is the root of a
centered chi statistic.  Both are computed by damped fixed-point iteration
with a bisection fallback (the root equations are monotone, so the fallback
always succeeds).
"""

from dataclasses import dataclass

import numpy as np
from scipy import special

# Catalan's constant, used by the closed form of the Gudermannian antiderivative.
_CATALAN = 0.915965594177219015

# Centering constant for the Geman-type chi: E[x^2/(1+x^2)] under a standard
# normal, fixed once by numerical integration (see tests for the re-derivation).
# With this value, unit-variance Gaussian data has dispersion estimate ~= 1.
GEMAN_C = 0.3443204575812013

RHO_KINDS = ("gudermannian", "log_cosh", "pseudo_huber", "quadratic_test_only")
CHI_KINDS = ("geman_quadratic",)


class RhoFunction:
    """Even loss rho with odd, increasing influence psi = rho'.

    All kinds are normalized so rho(u) ~ u^2/2 near zero.  The three robust
    kinds have bounded psi; ``quadratic_test_only`` has psi(u) = u and exists
    solely to realize the sample-mean reduction in tests and diagnostics.
    """

    def __init__(self, kind="gudermannian"):
        if kind not in RHO_KINDS:
            raise ValueError(f"unknown rho kind: {kind!r}; expected one of {RHO_KINDS}")
        self.kind = kind

    @property
    def bounded(self):
        return self.kind != "quadratic_test_only"

    def rho(self, u):
        u = np.asarray(u, dtype=float)
        a = np.abs(u)
        if self.kind == "gudermannian":
            return _gudermannian_rho(a)
        if self.kind == "log_cosh":
            # log cosh(u) = |u| - log 2 + log1p(exp(-2|u|)), overflow-safe
            return a - np.log(2.0) + np.log1p(np.exp(-2.0 * a))
        if self.kind == "pseudo_huber":
            return 2.0 * (np.sqrt(1.0 + 0.5 * u * u) - 1.0)
        return 0.5 * u * u

    def psi(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "gudermannian":
            # odd reflection of pi/2 - 2*atan(exp(-|u|)) avoids exp overflow
            return np.sign(u) * (0.5 * np.pi - 2.0 * np.arctan(np.exp(-np.abs(u))))
        if self.kind == "log_cosh":
            return np.tanh(u)
        if self.kind == "pseudo_huber":
            return u / np.sqrt(1.0 + 0.5 * u * u)
        return u

    def dpsi(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "gudermannian":
            e = np.exp(-np.abs(u))  # sech(u), overflow-safe
            return 2.0 * e / (1.0 + e * e)
        if self.kind == "log_cosh":
            e = np.exp(-np.abs(u))
            s = 2.0 * e / (1.0 + e * e)
            return s * s
        if self.kind == "pseudo_huber":
            return (1.0 + 0.5 * u * u) ** -1.5
        return np.ones_like(u)

    def __repr__(self):
        return f"RhoFunction({self.kind!r})"


def _gudermannian_rho(a):
    """Antiderivative of 2*atan(exp(u)) - pi/2 at |u| = a >= 0.

    For moderate a this is 2*Im(Li2(i e^a)) - 2G - (pi/2) a with G Catalan's
    constant; for large a the dilogarithm's tail is below double precision and
    the linear asymptote (pi/2) a - 2G + 2 e^-a is exact to machine accuracy.
    """
    scalar = np.ndim(a) == 0
    a = np.atleast_1d(np.asarray(a, dtype=float))
    out = np.empty_like(a)
    small = a <= 30.0
    if np.any(small):
        li2 = special.spence(1.0 - 1j * np.exp(a[small]))
        out[small] = 2.0 * li2.imag - 2.0 * _CATALAN - 0.5 * np.pi * a[small]
    if np.any(~small):
        big = a[~small]
        out[~small] = 0.5 * np.pi * big - 2.0 * _CATALAN + 2.0 * np.exp(-big)
    return float(out[0]) if scalar else out


class ChiFunction:
    """Even dispersion criterion: negative at 0, positive in the tails.

    The root of sum(chi((x_i - pivot)/sigma)) = 0 in sigma is a robust spread
    measure; the centering constant makes it match the standard deviation on
    Gaussian data.
    """

    def __init__(self, kind="geman_quadratic", c=GEMAN_C):
        if kind not in CHI_KINDS:
            raise ValueError(f"unknown chi kind: {kind!r}; expected one of {CHI_KINDS}")
        if not c > 0:
            raise ValueError("centering constant c must be positive")
        self.kind = kind
        self.c = c

    def chi(self, u):
        u = np.asarray(u, dtype=float)
        with np.errstate(over="ignore"):
            t = u * u
            return 1.0 - 1.0 / (1.0 + t) - self.c

    def __call__(self, u):
        return self.chi(u)

    def __repr__(self):
        return f"ChiFunction({self.kind!r}, c={self.c})"


@dataclass
class FixedPointSettings:
    """Stopping controls for the location and dispersion iterations.

    ``rel_tolerance`` bounds the mean residual (the root equation divided by
    n).  ``sigma_floor`` is scaled by (1 + |pivot|) inside the dispersion
    solver so degenerate zero-spread columns return a harmless positive value.
    """

    max_iters: int = 50
    rel_tolerance: float = 1e-8
    sigma_floor: float = 1e-12

    def __post_init__(self):
        if self.max_iters < 1:
            raise ValueError("max_iters must be >= 1")
        if not self.rel_tolerance > 0:
            raise ValueError("rel_tolerance must be positive")
        if not self.sigma_floor > 0:
            raise ValueError("sigma_floor must be positive")


DEFAULT_FP = FixedPointSettings()

# consecutive non-improving residuals before the iteration is declared
# oscillating and handed to bisection
_STALL_LIMIT = 5


def _check_columns(x, name="data"):
    x = np.asarray(x, dtype=float)
    if x.size == 0:
        raise ValueError(f"{name} must contain at least one observation")
    if not np.all(np.isfinite(x)):
        raise ValueError(f"{name} contains non-finite entries")
    return x


def locate_columns(x, s, rho, fp=DEFAULT_FP):
    """Column-wise location M-estimates of an (n, k) sample matrix.

    Returns (theta, fell_back) where theta[j] solves
    sum_i psi((x[i,j] - theta)/s[j]) = 0 and fell_back[j] marks columns the
    fixed-point iteration handed to bisection.
    """
    x = _check_columns(x)
    if x.ndim != 2:
        raise ValueError("expected a 2-D (n, k) array")
    n, k = x.shape
    s = np.broadcast_to(np.asarray(s, dtype=float), (k,)).copy()
    if np.any(s <= 0) or not np.all(np.isfinite(s)):
        raise ValueError("scale s must be positive and finite")

    lo = x.min(axis=0)
    hi = x.max(axis=0)
    theta = np.median(x, axis=0)
    tol = fp.rel_tolerance

    stalled = np.zeros(k, dtype=int)
    best = np.full(k, np.inf)
    active = np.ones(k, dtype=bool)
    for _ in range(fp.max_iters):
        resid = rho.psi((x - theta) / s).mean(axis=0)
        a = np.abs(resid)
        done = a <= tol
        stalled = np.where(a >= best, stalled + 1, 0)
        best = np.minimum(best, a)
        active &= ~done & (stalled < _STALL_LIMIT)
        if not active.any():
            break
        theta[active] = theta[active] + s[active] * resid[active]
        # the update cannot leave the data range while psi' <= 1, but guard
        # against rounding at the edges
        np.clip(theta, lo, hi, out=theta)

    resid = rho.psi((x - theta) / s).mean(axis=0)
    fell_back = np.abs(resid) > tol
    if fell_back.any():
        idx = np.flatnonzero(fell_back)
        theta[idx] = _bisect_locate(x[:, idx], s[idx], rho, lo[idx], hi[idx])
    return theta, fell_back


def _bisect_locate(x, s, rho, lo, hi):
    """Bisection on the monotone root equation; psi increasing makes the
    mean-psi residual strictly decreasing in theta."""
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        r = rho.psi((x - mid) / s).mean(axis=0)
        pos = r > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-15 * np.maximum(1.0, np.abs(lo))):
            break
    return 0.5 * (lo + hi)


def locate(data, s, rho, fp=DEFAULT_FP):
    """Location M-estimate of a 1-D sample at truncation scale s > 0.

    Solves sum_i psi((x_i - theta)/s) = 0 for the even loss ``rho``; the
    result always lies in [min(data), max(data)].  With the quadratic test
    kind this is exactly the sample mean.
    """
    data = _check_columns(data)
    if data.ndim != 1:
        raise ValueError("expected a 1-D sample")
    theta, _ = locate_columns(data[:, None], np.asarray([s], dtype=float), rho, fp)
    return float(theta[0])


def rescale_columns(x, pivots, chi, fp=DEFAULT_FP, sigma0=None):
    """Column-wise dispersion estimates about per-column pivots.

    Returns (sigma, fell_back).  sigma[j] >= floor_j solves
    sum_i chi((x[i,j] - pivot_j)/sigma) = 0 when such a root exists; columns
    whose spread sits below the floor (including exactly constant columns,
    where the chi sum is negative for every sigma) return the floor.
    ``sigma0`` overrides the default starting point (the residual standard
    deviation); the root is a global attractor, so any positive start
    converges to the same value.
    """
    x = _check_columns(x)
    if x.ndim != 2:
        raise ValueError("expected a 2-D (n, k) array")
    n, k = x.shape
    pivots = np.broadcast_to(np.asarray(pivots, dtype=float), (k,))
    if not np.all(np.isfinite(pivots)):
        raise ValueError("pivot must be finite")
    r = x - pivots
    floor = fp.sigma_floor * (1.0 + np.abs(pivots))
    tol = fp.rel_tolerance
    c = chi.c

    if sigma0 is None:
        sigma = np.maximum(r.std(axis=0), floor)
    else:
        sigma = np.maximum(np.broadcast_to(
            np.asarray(sigma0, dtype=float), (k,)).copy(), floor)
        if np.any(sigma <= 0):
            raise ValueError("sigma0 must be positive")
    degenerate = np.all(r == 0.0, axis=0)
    sigma[degenerate] = floor[degenerate]

    active = ~degenerate
    floored = degenerate.copy()
    for _ in range(fp.max_iters):
        h = chi.chi(r / sigma).mean(axis=0)
        done = np.abs(h) <= tol
        # a column pinned at its floor that still wants to shrink has no root
        at_floor = (sigma <= floor) & (h < 0)
        floored |= at_floor
        active &= ~done & ~at_floor
        if not active.any():
            break
        upd = np.sqrt(np.maximum(1.0 + h[active] / c, 0.0))
        sigma[active] = np.maximum(sigma[active] * upd, floor[active])

    h = chi.chi(r / sigma).mean(axis=0)
    unresolved = (np.abs(h) > tol) & ~floored
    if unresolved.any():
        idx = np.flatnonzero(unresolved)
        sigma[idx], still_floored = _bisect_rescale(r[:, idx], chi, floor[idx], tol)
        floored[idx] |= still_floored
    fell_back = unresolved
    return sigma, fell_back


def _bisect_rescale(r, chi, floor, tol):
    """Bracketing bisection for the dispersion root; the mean-chi statistic is
    non-increasing in sigma."""
    k = r.shape[1]
    lo = floor.copy()
    hi = np.maximum(np.abs(r).max(axis=0), floor) * 4.0
    # expand until the statistic is negative at hi (it tends to -c < 0)
    for _ in range(200):
        h_hi = chi.chi(r / hi).mean(axis=0)
        if np.all(h_hi <= 0):
            break
        hi = np.where(h_hi > 0, hi * 4.0, hi)
    h_lo = chi.chi(r / lo).mean(axis=0)
    no_root = h_lo < 0  # negative even at the floor: spread below floor
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        h = chi.chi(r / mid).mean(axis=0)
        pos = h > 0
        lo = np.where(pos, mid, lo)
        hi = np.where(pos, hi, mid)
        if np.all(hi - lo <= 1e-15 * hi):
            break
    sigma = np.where(no_root, floor, 0.5 * (lo + hi))
    return sigma, no_root


def rescale(data, pivot, chi, fp=DEFAULT_FP, sigma0=None):
    """Dispersion M-estimate of a 1-D sample about ``pivot``.

    The estimate is scale-equivariant (rescale(c*x, c*pivot) = c*rescale(x,
    pivot)) and equals the floor when the residuals carry no spread.
    """
    data = _check_columns(data)
    if data.ndim != 1:
        raise ValueError("expected a 1-D sample")
    sigma, _ = rescale_columns(data[:, None], np.asarray([pivot], dtype=float),
                               chi, fp, sigma0=sigma0)
    return float(sigma[0])


def confidence_scale(sigma_hat, n, delta):
    """Truncation scale from dispersion, sample size and confidence demand.

    Returns sigma_hat * sqrt(n / log(2/delta)): more data widens the scale
    (behaving more like the mean), stricter confidence (smaller delta)
    tightens it.
    """
    n = int(n)
    if n < 1:
        raise ValueError("n must be >= 1")
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    sigma_hat = np.asarray(sigma_hat, dtype=float)
    if np.any(sigma_hat <= 0):
        raise ValueError("sigma_hat must be positive")
    out = sigma_hat * np.sqrt(n / np.log(2.0 / delta))
    return float(out) if out.shape == () else out


def psi_eval(u, rho):
    """Influence function psi = rho' at u."""
    if not np.all(np.isfinite(np.asarray(u, dtype=float))):
        raise ValueError("u must be finite")
    out = rho.psi(u)
    return float(out) if np.ndim(u) == 0 else out


def chi_eval(u, chi):
    """Dispersion criterion chi at u."""
    if not np.all(np.isfinite(np.asarray(u, dtype=float))):
        raise ValueError("u must be finite")
    out = chi.chi(u)
    return float(out) if np.ndim(u) == 0 else out
