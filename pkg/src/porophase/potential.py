"""Porous-media energy landscape: double-well potential, reactions, equilibria.

The total potential energy density is

    Psi(eps, m) = (alpha/12) m^2 (3 m^2 - 8 b eps m + 6 b^2 eps^2) + Psi_B(eps, m)
    Psi_B(eps, m) = p eps + eps^2/2 + (a/2)(m - b eps)^2

and the reaction terms are its negative gradient,

    f1 = -dPsi/deps = (2/3) b alpha m^3 - alpha b^2 m^2 eps - p - eps + a b m - a b^2 eps
    f2 = -dPsi/dm   = -alpha m^3 + 2 alpha b eps m^2 - alpha b^2 eps^2 m - a m + a b eps.

For alpha large enough and pressures inside the bistability window the
landscape has two minima (fluid-poor and fluid-rich phases) separated by
a saddle; the coexistence pressure makes the two minima equally deep.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass

import numpy as np


class ParameterError(ValueError):
    pass


class BracketError(ValueError):
    """The pressure bracket does not admit the requested bisection."""


@dataclass(frozen=True)
class ModelParams:
    a: float               # fluid/solid rigidity ratio
    b: float               # solid-fluid coupling
    p: float               # external pressure
    alpha: float           # double-well strength (0 = pure quadratic Biot)
    k1: float = 1e-3       # gradient-energy coefficients, squared lengths
    k2: float = 1e-3
    k3: float = 1e-3
    M_eps: float = 1.0     # truncation bound on |eps|
    M_m: float = 1.0       # truncation bound on |m|

    def __post_init__(self):
        if not self.a > 0:
            raise ParameterError(f"a must be positive, got {self.a}")
        if not self.b > 0:
            raise ParameterError(f"b must be positive, got {self.b}")
        if not self.p >= 0:
            raise ParameterError(f"p must be nonnegative, got {self.p}")
        if not self.alpha >= 0:
            raise ParameterError(f"alpha must be nonnegative, got {self.alpha}")
        if not (self.k1 > 0 and self.k3 > 0):
            raise ParameterError(f"k1, k3 must be positive, got {self.k1}, {self.k3}")
        if not self.k2 >= 0:
            raise ParameterError(f"k2 must be nonnegative, got {self.k2}")
        if self.k1 * self.k3 - self.k2 ** 2 < 0:
            raise ParameterError(
                f"need k1*k3 - k2^2 >= 0, got {self.k1 * self.k3 - self.k2 ** 2}")
        if not (self.M_eps > 0 and self.M_m > 0):
            raise ParameterError("truncation bounds M_eps, M_m must be positive")

    @property
    def uniqueness_regime(self) -> bool:
        """k2 < min(k1, k3): the regime where the evolution is unique."""
        return self.k2 < min(self.k1, self.k3)

    def replace(self, **kw) -> "ModelParams":
        return dataclasses.replace(self, **kw)


@dataclass(frozen=True)
class PolynomialReaction:
    """Bivariate polynomial sum_{k1,k2} A[(k1,k2)] eps^k1 m^k2."""

    coeffs: dict

    def __post_init__(self):
        for (i, j), c in self.coeffs.items():
            if i < 0 or j < 0:
                raise ParameterError(f"negative exponent in reaction table: ({i},{j})")
            if not np.isfinite(c):
                raise ParameterError(f"non-finite coefficient at ({i},{j})")

    @property
    def degrees(self) -> tuple:
        if not self.coeffs:
            return (0, 0)
        return (max(i for i, _ in self.coeffs), max(j for _, j in self.coeffs))

    def __call__(self, eps, m):
        out = np.zeros(np.broadcast(np.asarray(eps), np.asarray(m)).shape)
        for (i, j), c in self.coeffs.items():
            out = out + c * np.asarray(eps) ** i * np.asarray(m) ** j
        if out.shape == ():
            return float(out)
        return out

    def coeff_matrix(self) -> np.ndarray:
        """Dense (d_eps+1, d_m+1) coefficient array for the compiled kernel."""
        d1, d2 = self.degrees
        C = np.zeros((d1 + 1, d2 + 1))
        for (i, j), c in self.coeffs.items():
            C[i, j] = c
        return C


def eval_polynomial_reaction(poly: PolynomialReaction, eps, m):
    return poly(eps, m)


def f1_table(params: ModelParams) -> PolynomialReaction:
    """Coefficient table reproducing reaction_f1 exactly."""
    a, b, p, al = params.a, params.b, params.p, params.alpha
    return PolynomialReaction({
        (0, 3): 2.0 / 3.0 * b * al,
        (1, 2): -al * b ** 2,
        (0, 0): -p,
        (1, 0): -(1.0 + a * b ** 2),
        (0, 1): a * b,
    })


def f2_table(params: ModelParams) -> PolynomialReaction:
    """Coefficient table reproducing reaction_f2 exactly."""
    a, b, al = params.a, params.b, params.alpha
    return PolynomialReaction({
        (0, 3): -al,
        (1, 2): 2.0 * al * b,
        (2, 1): -al * b ** 2,
        (0, 1): -a,
        (1, 0): a * b,
    })


def psi_biot(eps, m, params: ModelParams):
    """Biot potential energy density p*eps + eps^2/2 + (a/2)(m - b eps)^2."""
    return params.p * eps + 0.5 * eps ** 2 + 0.5 * params.a * (m - params.b * eps) ** 2


def psi_total(eps, m, params: ModelParams):
    """Double-well energy density: quartic term plus the Biot part."""
    al, b = params.alpha, params.b
    quartic = al / 12.0 * m ** 2 * (3.0 * m ** 2 - 8.0 * b * eps * m + 6.0 * b ** 2 * eps ** 2)
    return quartic + psi_biot(eps, m, params)


def reaction_f1(eps, m, params: ModelParams):
    """-dPsi/deps."""
    a, b, p, al = params.a, params.b, params.p, params.alpha
    return (2.0 / 3.0) * b * al * m ** 3 - al * b ** 2 * m ** 2 * eps \
        - p - eps + a * b * m - a * b ** 2 * eps


def reaction_f2(eps, m, params: ModelParams):
    """-dPsi/dm."""
    a, b, al = params.a, params.b, params.alpha
    return -al * m ** 3 + 2.0 * al * b * eps * m ** 2 - al * b ** 2 * eps ** 2 * m \
        - a * m + a * b * eps


def truncate_reaction(f, eps, m, M_eps: float, M_m: float):
    """f(eps, m) inside the closed box |eps| <= M_eps, |m| <= M_m, else 0."""
    if not (M_eps > 0 and M_m > 0):
        raise ParameterError("truncation bounds must be positive")
    eps_a, m_a = np.asarray(eps, dtype=float), np.asarray(m, dtype=float)
    inside = (np.abs(eps_a) <= M_eps) & (np.abs(m_a) <= M_m)
    out = np.where(inside, f(eps, m), 0.0)
    if out.shape == ():
        return float(out)
    return out


def truncated(f, M_eps: float, M_m: float):
    """Wrap f as the truncated reaction f_hat."""
    return lambda eps, m: truncate_reaction(f, eps, m, M_eps, M_m)


def grad_psi(eps, m, params: ModelParams):
    """(dPsi/deps, dPsi/dm) = (-f1, -f2)."""
    return (-reaction_f1(eps, m, params), -reaction_f2(eps, m, params))


def hessian_psi(eps, m, params: ModelParams) -> np.ndarray:
    """Analytic 2x2 Hessian of psi_total, symmetric by construction."""
    a, b, al = params.a, params.b, params.alpha
    h_ee = al * b ** 2 * m ** 2 + 1.0 + a * b ** 2
    h_em = -2.0 * al * b * m ** 2 + 2.0 * al * b ** 2 * m * eps - a * b
    h_mm = 3.0 * al * m ** 2 - 4.0 * al * b * eps * m + al * b ** 2 * eps ** 2 + a
    return np.array([[h_ee, h_em], [h_em, h_mm]])


@dataclass(frozen=True)
class EquilibriumPoint:
    eps: float
    m: float
    psi: float
    kind: str   # 'minimum' | 'saddle' | 'maximum' | 'degenerate'


_GRAD_TOL = 1e-12
_DEDUP_TOL = 1e-6
_DEGENERATE_TOL = 1e-10


def _classify(eps: float, m: float, params: ModelParams) -> str:
    H = hessian_psi(eps, m, params)
    det = H[0, 0] * H[1, 1] - H[0, 1] ** 2
    scale = max(1.0, H[0, 0] ** 2 + H[1, 1] ** 2)
    if abs(det) < _DEGENERATE_TOL * scale:
        return "degenerate"
    if det < 0:
        return "saddle"
    return "minimum" if np.trace(H) > 0 else "maximum"


def find_equilibria(params: ModelParams, search_box=((-0.3, 0.1), (-0.3, 0.1)),
                    seeds_per_axis: int = 16) -> list:
    """Damped Newton on grad Psi = 0 from a uniform seed lattice.

    Converged roots are deduplicated and classified by the Hessian;
    the returned list is sorted by energy. Empty if no seed converges.
    """
    (e_lo, e_hi), (m_lo, m_hi) = search_box
    if not (e_hi > e_lo and m_hi > m_lo):
        raise ParameterError("search box is degenerate")
    if seeds_per_axis < 2:
        raise ParameterError("need at least 2 seeds per axis")

    es, ms = np.meshgrid(np.linspace(e_lo, e_hi, seeds_per_axis),
                         np.linspace(m_lo, m_hi, seeds_per_axis))
    e = es.ravel().copy()
    m = ms.ravel().copy()
    span = max(e_hi - e_lo, m_hi - m_lo)

    a, b, al = params.a, params.b, params.alpha
    for _ in range(50):
        g1 = -reaction_f1(e, m, params)
        g2 = -reaction_f2(e, m, params)
        gn = np.hypot(g1, g2)
        active = gn > _GRAD_TOL
        if not active.any():
            break
        h11 = al * b ** 2 * m ** 2 + 1.0 + a * b ** 2
        h12 = -2.0 * al * b * m ** 2 + 2.0 * al * b ** 2 * m * e - a * b
        h22 = 3.0 * al * m ** 2 - 4.0 * al * b * e * m + al * b ** 2 * e ** 2 + a
        det = h11 * h22 - h12 ** 2
        det = np.where(np.abs(det) < 1e-300, np.nan, det)
        de = (h22 * g1 - h12 * g2) / det
        dm = (h11 * g2 - h12 * g1) / det
        de = np.where(np.isfinite(de), de, 0.0)
        dm = np.where(np.isfinite(dm), dm, 0.0)
        # halve the step until the gradient norm decreases
        t = np.ones_like(e)
        for _ in range(25):
            e_t, m_t = e - t * de, m - t * dm
            gn_t = np.hypot(-reaction_f1(e_t, m_t, params), -reaction_f2(e_t, m_t, params))
            bad = active & (gn_t >= gn)
            if not bad.any():
                break
            t = np.where(bad, t / 2.0, t)
        e = np.where(active, e - t * de, e)
        m = np.where(active, m - t * dm, m)

    g1 = -reaction_f1(e, m, params)
    g2 = -reaction_f2(e, m, params)
    ok = (np.hypot(g1, g2) < _GRAD_TOL) & (np.abs(e) < 10 * span + 10) & (np.abs(m) < 10 * span + 10)

    roots = []
    for ei, mi in sorted(zip(e[ok], m[ok])):
        if any((ei - r[0]) ** 2 + (mi - r[1]) ** 2 < _DEDUP_TOL ** 2 for r in roots):
            continue
        roots.append((ei, mi))

    points = [EquilibriumPoint(float(ei), float(mi),
                               float(psi_total(ei, mi, params)),
                               _classify(ei, mi, params))
              for ei, mi in roots]
    points.sort(key=lambda q: q.psi)
    return points


def two_minima(params: ModelParams, search_box=((-0.3, 0.1), (-0.3, 0.1)),
               seeds_per_axis: int = 16):
    """(fluid_poor, fluid_rich) minima ordered by m, or None if not bistable."""
    minima = [q for q in find_equilibria(params, search_box, seeds_per_axis)
              if q.kind == "minimum"]
    if len(minima) != 2:
        return None
    minima.sort(key=lambda q: q.m)
    return minima[0], minima[1]


def _refine_minimum(eps: float, m: float, params: ModelParams):
    """Polish a single minimum with a few full Newton steps."""
    z = np.array([eps, m])
    for _ in range(60):
        g = np.array(grad_psi(z[0], z[1], params))
        if np.hypot(*g) < _GRAD_TOL:
            break
        z = z - np.linalg.solve(hessian_psi(z[0], z[1], params), g)
    return float(z[0]), float(z[1])


def find_coexistence_pressure(params: ModelParams, p_bracket, tol: float = 1e-10,
                              scan_points: int = 41) -> float:
    """Pressure at which the two minima of Psi are equally deep.

    The bracket is first scanned for the bistable subinterval (both
    minima present); the equal-depth bisection then runs inside it.
    Raises BracketError if no scan point is bistable or if the energy
    difference does not change sign across the bistable subinterval.
    """
    p_lo, p_hi = p_bracket
    if not p_hi > p_lo:
        raise BracketError(f"empty pressure bracket ({p_lo}, {p_hi})")

    def depth_gap(p):
        pair = two_minima(params.replace(p=p))
        if pair is None:
            return None
        poor, rich = pair
        return poor.psi - rich.psi

    ps = np.linspace(p_lo, p_hi, scan_points)
    gaps = [depth_gap(p) for p in ps]
    bistable = [i for i, g in enumerate(gaps) if g is not None]
    if not bistable:
        raise BracketError(
            f"no pressure in [{p_lo}, {p_hi}] yields two minima (bracket invalid)")
    lo_i, hi_i = bistable[0], bistable[-1]
    sign_changes = [i for i in range(lo_i, hi_i)
                    if gaps[i] is not None and gaps[i + 1] is not None
                    and gaps[i] * gaps[i + 1] <= 0]
    if not sign_changes:
        raise BracketError(
            "energy difference between the minima does not change sign across "
            f"the bistable part of [{p_lo}, {p_hi}]")
    i = sign_changes[0]
    lo, hi = ps[i], ps[i + 1]
    g_lo = gaps[i]
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        g_mid = depth_gap(mid)
        if g_mid is None:
            raise BracketError(f"lost a minimum at p={mid} during bisection")
        if abs(g_mid) < tol:
            return float(mid)
        if (g_mid < 0) == (g_lo < 0):
            lo, g_lo = mid, g_mid
        else:
            hi = mid
    return float(0.5 * (lo + hi))


def bistability_interval(params: ModelParams, p_bracket, scan_points: int = 81,
                         refine_tol: float = 1e-6):
    """(p_min, p_max) subrange of the bracket with two minima, or None."""
    p_lo, p_hi = p_bracket

    def is_bistable(p):
        return two_minima(params.replace(p=p)) is not None

    ps = np.linspace(p_lo, p_hi, scan_points)
    flags = [is_bistable(p) for p in ps]
    if not any(flags):
        return None
    first = flags.index(True)
    last = len(flags) - 1 - flags[::-1].index(True)

    def bisect_edge(p_out, p_in):
        for _ in range(100):
            if abs(p_in - p_out) < refine_tol:
                break
            mid = 0.5 * (p_out + p_in)
            if is_bistable(mid):
                p_in = mid
            else:
                p_out = mid
        return p_in

    lo = ps[first] if first == 0 else bisect_edge(ps[first - 1], ps[first])
    hi = ps[last] if last == len(ps) - 1 else bisect_edge(ps[last + 1], ps[last])
    return (float(lo), float(hi))
