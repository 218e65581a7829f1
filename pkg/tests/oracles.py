"""Independent verification oracles shared by the test suite.

Everything here avoids the library's solvers on purpose: brute-force
minimization, quadrature, finite differences and closed forms are the
reference implementations the fast paths are checked against.
"""

import numpy as np
from scipy import optimize, special

LD = np.longdouble
_PI_2 = LD("1.5707963267948966192313216916398")
_CATALAN2 = LD("1.8319311883544380301092070298648")  # 2 * Catalan


def golden_section_minimize(f, a, b, tol=1e-12):
    """Golden-section search for the minimizer of a unimodal f on [a, b]."""
    if a == b:
        return a
    gr = (np.sqrt(5.0) - 1.0) / 2.0
    c, d = b - gr * (b - a), a + gr * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - gr * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + gr * (b - a)
            fd = f(d)
    return 0.5 * (a + b)


def _euler_series_coeffs(terms=34):
    # rho(u) = sum_k E_{2k} u^{2k+2} / ((2k+2) (2k+1)!) for |u| < pi/2,
    # with E_{2k} the Euler numbers
    eul = special.euler(2 * terms)
    coeffs = []
    fact = LD(1)  # (2k+1)!
    for k in range(terms):
        if k > 0:
            fact = fact * LD(2 * k) * LD(2 * k + 1)
        coeffs.append(LD(eul[2 * k]) / (LD(2 * k + 2) * fact))
    return coeffs


_RHO_COEFFS = _euler_series_coeffs()


def gudermannian_psi_ld(u):
    """2 atan(e^u) - pi/2 in extended precision, overflow-safe."""
    u = np.asarray(u, dtype=LD)
    return np.sign(u) * (_PI_2 - 2 * np.arctan(np.exp(-np.abs(u))))


def gudermannian_rho_ld(u):
    """Extended-precision antiderivative of the bounded influence function,
    built from series completely unlike the library's closed form: a Taylor
    series in Euler numbers near zero, and the exponential tail series
    rho(u) = (pi/2)|u| - 2G + 2 sum_m (-1)^m e^{-(2m+1)|u|} / (2m+1)^2
    elsewhere."""
    a = np.abs(np.asarray(u, dtype=LD))
    out = np.empty_like(a)
    small = a <= LD("0.75")
    if np.any(small):
        z = a[small] * a[small]
        acc = np.zeros_like(z)
        for c in reversed(_RHO_COEFFS):
            acc = acc * z + c
        out[small] = acc * z
    if np.any(~small):
        b = a[~small]
        q = np.exp(-b)
        q2 = q * q
        acc = np.zeros_like(b)
        power = q.copy()
        for m in range(48):
            term = power / LD((2 * m + 1) ** 2)
            acc = acc + (term if m % 2 == 0 else -term)
            power = power * q2
        out[~small] = _PI_2 * b - _CATALAN2 + 2 * acc
    return out


_GL_NODES, _GL_WEIGHTS = np.polynomial.legendre.leggauss(8)
_GL_NODES = _GL_NODES.astype(LD)
_GL_WEIGHTS = _GL_WEIGHTS.astype(LD)


def _anchored_objective(x_ld, s_ld, anchor):
    """theta -> sum_i [rho((x_i-theta)/s) - rho((x_i-anchor)/s)] via
    per-term Gauss-Legendre integration of psi over the tiny intervals; the
    shift keeps rounding noise far below the objective's curvature.

    The (identical) interval length is computed once from anchor - theta
    directly: deriving it from the per-point integration limits would cancel
    catastrophically for points far from the pivot.
    """
    a_nodes = (x_ld - anchor) / s_ld

    def g(theta):
        delta = (anchor - LD(theta)) / s_ld  # signed interval length
        half = 0.5 * delta
        mid = a_nodes + half
        t = mid[:, None] + half * _GL_NODES[None, :]
        vals = (gudermannian_psi_ld(t) * _GL_WEIGHTS[None, :]).sum(axis=1)
        return float(half * vals.sum())

    return g


def locate_oracle(x, s, rho, tol=1e-12):
    """Brute-force location estimate: golden-section minimization of
    sum(rho((x - t)/s)) over the data range.

    For the bounded influence kind the objective is evaluated in extended
    precision (series formulas above) and the search is refined once around
    the first-stage minimizer with an anchored difference objective;
    otherwise the double-precision objective noise (~ spread * sqrt(eps))
    would drown tolerances near 1e-8.
    """
    x = np.asarray(x, dtype=float)
    lo, hi = float(x.min()), float(x.max())
    if lo == hi:
        return lo
    if rho.kind != "gudermannian":
        return golden_section_minimize(
            lambda t: float(rho.rho((x - t) / s).sum()), lo, hi, tol=tol)
    x_ld = x.astype(LD)
    s_ld = LD(s)

    def f(theta):
        return float(gudermannian_rho_ld((x_ld - LD(theta)) / s_ld).sum())

    stage1 = golden_section_minimize(f, lo, hi, tol=max(tol, 1e-10))
    pad = 1e-5 * (1.0 + abs(stage1))
    g = _anchored_objective(x_ld, s_ld, LD(stage1))
    return golden_section_minimize(g, max(lo, stage1 - pad),
                                   min(hi, stage1 + pad), tol=min(tol, 1e-12))


def finite_difference_gradient(f, w, h=1e-6):
    """Central-difference gradient of a scalar function at w."""
    w = np.asarray(w, dtype=float)
    g = np.zeros_like(w)
    for j in range(w.size):
        e = np.zeros_like(w)
        e[j] = h
        g[j] = (f(w + e) - f(w - e)) / (2.0 * h)
    return g


def quadratic_descent_iterates(sigma, w_star, w0, alpha, T):
    """Closed-form gradient-descent trajectory on the quadratic with
    curvature ``sigma`` (None = identity): w_t - w* = (I - alpha sigma)^t
    (w0 - w*)."""
    d = len(w0)
    A = np.eye(d) if sigma is None else np.asarray(sigma, dtype=float)
    M = np.eye(d) - alpha * A
    out = [np.asarray(w0, dtype=float).copy()]
    v = np.asarray(w0, dtype=float) - w_star
    for _ in range(T):
        v = M @ v
        out.append(w_star + v)
    return np.asarray(out)


def geometric_median_objective(m, points):
    return float(np.linalg.norm(np.asarray(points, dtype=float) - m, axis=1).sum())


def geometric_median_oracle(points, restarts=6, seed=0):
    """Nelder-Mead-based reference for the geometric median, restarted from
    the centroid, the coordinate-wise median and every data point."""
    P = np.asarray(points, dtype=float)
    starts = [P.mean(axis=0), np.median(P, axis=0)] + [p for p in P]
    rng = np.random.default_rng(seed)
    for _ in range(restarts):
        starts.append(P.mean(axis=0) + rng.normal(scale=0.3, size=P.shape[1]))
    best = None
    best_val = np.inf
    for s in starts:
        res = optimize.minimize(lambda m: geometric_median_objective(m, P), s,
                                method="Nelder-Mead",
                                options={"xatol": 1e-10, "fatol": 1e-12,
                                         "maxiter": 20000, "maxfev": 20000})
        if res.fun < best_val:
            best_val = res.fun
            best = res.x
    return best, best_val
