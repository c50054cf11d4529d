"""Time stepping for the coupled strain/fluid-content system.

One step advances the state (eps^{n-1}, m^{n-1}) to level n:

  1. explicit update of the strain,
       eps_i^n = eps_i^{n-1} + tau [ k1 D2(eps)/h^2 + k2 X(m)/h^2 + f1_hat ],
     with Dirichlet eps_0 and the mirror ghost eps_{N+1} = eps_{N-1};
  2. b_i^n = (eps_i^n - eps_{i-1}^n)/h on indices 0..N+1;
  3. theta-weighted implicit solve for m from the flux divergence
       (m_i^n - m_i^{n-1})/tau = theta dF^n/h + (1-theta) dF^{n-1}/h + f2_hat,
       F_i = k3 (m_{i+1} - m_i)/h + k2 b_i,  F_N = 0.

At the Dirichlet end the production scheme couples the ghost cell
m_0 = m_D through the boundary flux F_0 = k3 (m_1 - m_0)/h + k2 b_0;
the conservative variant F_0 = 0 (which decouples m from its boundary
datum and makes the matrix row (-1, 1)) is kept as m_left_bc='no_flux'
for conservation tests.

The cross stencil X in the strain update defaults to the offset form
(m_{i-2} - 2 m_{i-1} + m_i); a node-centered variant is available.
"""

from __future__ import annotations

import dataclasses
import math
import os
from dataclasses import dataclass, field

import numpy as np
import scipy.linalg

from .grid import CellField, Grid1D, NodeField
from .linalg import BandedMatrix
from .mollifier import MollifierKernel, mollify_array, standard_mollifier
from .potential import ModelParams, PolynomialReaction, psi_total, truncated


class StabilityError(ValueError):
    def __init__(self, tau: float, tau_max: float):
        self.tau = tau
        self.tau_max = tau_max
        super().__init__(
            f"time step tau={tau} exceeds the admissible tau_max={tau_max}")


class NumericsError(RuntimeError):
    pass


@dataclass(frozen=True)
class StabilityReport:
    rho: float
    iota: float
    tau_max: float
    a1_ok: bool | None = None
    a2_ok: bool | None = None
    a3_ok: bool | None = None


def max_stable_tau(theta: float, h: float, k2: float, tau: float | None = None) -> StabilityReport:
    """rho = min{h^2/(2(1-theta)), h/(2 theta)}, iota = h^2/(2 k2);
    an inactive branch (theta = 0 or 1, or k2 = 0) counts as +inf."""
    if not 0.0 <= theta <= 1.0:
        raise ValueError(f"theta must lie in [0, 1], got {theta}")
    if h <= 0:
        raise ValueError(f"h must be positive, got {h}")
    if k2 < 0:
        raise ValueError(f"k2 must be nonnegative, got {k2}")
    expl = h * h / (2.0 * (1.0 - theta)) if theta < 1.0 else math.inf
    impl = h / (2.0 * theta) if theta > 0.0 else math.inf
    rho = min(expl, impl)
    iota = h * h / (2.0 * k2) if k2 > 0.0 else math.inf
    a1 = a2 = None
    if tau is not None:
        a1 = bool(2.0 * tau * theta <= h * (1.0 + 1e-14))
        a2 = bool(2.0 * tau * (1.0 - theta) <= h * h * (1.0 + 1e-14))
    return StabilityReport(rho, iota, min(rho, iota), a1, a2)


def check_A3(b0: np.ndarray, b1: np.ndarray):
    """b_i^0 - b_{i-1}^0 + b_i^1 - b_{i-1}^1 <= 0 over consecutive entries.

    Pass the non-ghost slice b[1:N+1]: the mirror ghosts b_0 = -b_1 and
    b_{N+1} = -b_N make the boundary differences positive for any
    non-constant profile, so only interior differences are admissible.
    Returns (ok, indices of violating differences)."""
    b0 = np.asarray(b0, dtype=float)
    b1 = np.asarray(b1, dtype=float)
    incr = (b0[1:] - b0[:-1]) + (b1[1:] - b1[:-1])
    bad = np.where(incr > 0)[0] + 1
    return bool(len(bad) == 0), bad


@dataclass
class ThetaSchemeConfig:
    theta: float
    tau: float                          # uniform step, or a per-step sequence
    T: float = 0.0                      # derived from the sequence if given
    cross_stencil: str = "paper"        # 'paper' | 'centered'
    enforce_stability: bool = True
    negativity_monitor: bool = True
    m_left_bc: str = "dirichlet"        # 'dirichlet' | 'no_flux' (test-only)
    steady_tol: float = 1e-8            # 0 disables early stopping
    monitor_stride: int = 0             # 0 = choose automatically
    snapshot_stride: int = 0            # 0 = initial and final only

    def __post_init__(self):
        if not 0.0 <= self.theta <= 1.0:
            raise ValueError(f"theta must lie in [0, 1], got {self.theta}")
        if np.ndim(self.tau) == 0:
            if not self.tau > 0:
                raise ValueError(f"tau must be positive, got {self.tau}")
            if not self.T > 0:
                raise ValueError(f"T must be positive, got {self.T}")
        else:
            seq = np.asarray(self.tau, dtype=float)
            if seq.ndim != 1 or len(seq) == 0 or not np.all(seq > 0):
                raise ValueError("a tau sequence must be 1D with positive entries")
            self.tau = seq
            self.T = float(seq.sum())
        if self.cross_stencil not in ("paper", "centered"):
            raise ValueError(f"unknown cross stencil {self.cross_stencil!r}")
        if self.m_left_bc not in ("dirichlet", "no_flux"):
            raise ValueError(f"unknown m boundary mode {self.m_left_bc!r}")

    @property
    def uniform_tau(self) -> bool:
        return np.ndim(self.tau) == 0

    @property
    def max_tau(self) -> float:
        return float(self.tau) if self.uniform_tau else float(np.max(self.tau))

    def tau_sequence(self) -> np.ndarray:
        if self.uniform_tau:
            return np.full(self.n_steps, float(self.tau))
        return np.asarray(self.tau, dtype=float)

    @property
    def n_steps(self) -> int:
        if self.uniform_tau:
            return max(1, int(round(self.T / self.tau)))
        return len(self.tau)


@dataclass
class EvolutionState:
    t: float
    eps: NodeField
    m: CellField
    b: np.ndarray      # indices 0..N+1
    F: np.ndarray      # indices 0..N, F[0] = F[N] = 0 stored
    h: float = 0.0
    step: int = 0

    def copy(self) -> "EvolutionState":
        return EvolutionState(self.t, self.eps.copy(), self.m.copy(),
                              self.b.copy(), self.F.copy(), self.h, self.step)


def update_b(eps: NodeField, h: float) -> np.ndarray:
    """b_i = (eps_i - eps_{i-1})/h on indices 0..N+1 using the mirror ghosts."""
    e = eps.with_ghosts()            # nodes -1..N+1
    return (e[1:] - e[:-1]) / h


def compute_flux(m: CellField, b: np.ndarray, h: float, k2: float, k3: float) -> np.ndarray:
    """F_i = k3 (m_{i+1} - m_i)/h + k2 b_i on 1..N-1; F_0 = F_N = 0."""
    mv = m.values
    N = m.N
    F = np.zeros(N + 1)
    F[1:N] = k3 * (mv[1:] - mv[:-1]) / h + k2 * b[1:N]
    return F


def _dirichlet_boundary_flux(m: CellField, b: np.ndarray, h: float,
                             k2: float, k3: float) -> float:
    """Flux across the Dirichlet end through the ghost cell m_0."""
    return k3 * (m.values[0] - m.ghost) / h + k2 * b[0]


def assemble_H(N: int, k3: float) -> BandedMatrix:
    """Tridiagonal flux-divergence matrix with rows (-1,1) / (1,-2,1) / (1,-1)."""
    if N < 3:
        raise ValueError(f"need N >= 3, got {N}")
    H = BandedMatrix.zeros(N, 1, 1)
    H.data[1, :] = -2.0 * k3
    H.data[1, 0] = -1.0 * k3
    H.data[1, -1] = -1.0 * k3
    H.data[0, 1:] = 1.0 * k3      # super-diagonal
    H.data[2, :-1] = 1.0 * k3     # sub-diagonal
    return H


def _cross_second_difference(m_with_ghost: np.ndarray, stencil: str) -> np.ndarray:
    """X_i for i = 1..N in the strain update (values already include m_0)."""
    mg = m_with_ghost                # indices 0..N
    N = len(mg) - 1
    X = np.empty(N)
    if stencil == "paper":
        X[0] = mg[1] - mg[0]                       # i=1 via m_{-1} := m_0
        X[1:] = mg[:N - 1] - 2.0 * mg[1:N] + mg[2:]
    else:
        ext = np.concatenate((mg, [mg[-1]]))       # m_{N+1} := m_N
        X[:] = ext[:N] - 2.0 * ext[1:N + 1] + ext[2:]
    return X


def step_strain(state: EvolutionState, config: ThetaSchemeConfig, params: ModelParams,
                f1_hat, eps_bc: float) -> NodeField:
    """Explicit strain update; eps_bc is the Dirichlet value at the new level."""
    if not config.uniform_tau:
        raise ValueError("single steps need a scalar-tau config")
    h = _infer_h(state)
    rep = max_stable_tau(config.theta, h, params.k2, config.tau)
    if config.enforce_stability and config.tau > rep.tau_max * (1 + 1e-12):
        raise StabilityError(config.tau, rep.tau_max)
    e = state.eps.with_ghosts()          # nodes -1..N+1
    lap = e[:-2] - 2.0 * e[1:-1] + e[2:]  # nodes 0..N
    X = _cross_second_difference(state.m.with_ghost(), config.cross_stencil)
    react = f1_hat(state.eps.values[1:], state.m.values)
    new = state.eps.values.copy()
    new[1:] += config.tau * (params.k1 * lap[1:] / h ** 2
                             + params.k2 * X / h ** 2 + react)
    new[0] = eps_bc
    return NodeField(new)


def _theta_system(N: int, lam_theta_k3: float, m_left_bc: str):
    """Band data of I - lambda*theta*H_mod (symmetric positive definite)."""
    diag = np.full(N, 1.0 + 2.0 * lam_theta_k3)
    if m_left_bc == "no_flux":
        diag[0] = 1.0 + lam_theta_k3
    diag[-1] = 1.0 + lam_theta_k3
    off = np.full(N - 1, -lam_theta_k3)
    return diag, off


def _density_rhs(state: EvolutionState, b_new: np.ndarray, m0_new: float,
                 config: ThetaSchemeConfig, params: ModelParams, f2_hat,
                 h: float) -> np.ndarray:
    theta, tau = config.theta, config.tau
    k2, k3 = params.k2, params.k3
    lam = tau / h ** 2
    mv = state.m.values
    N = state.m.N
    rhs = mv.copy()

    # explicit part (1-theta) * dF^{n-1}/h, with the mode's boundary flux
    F_old = state.F.copy()
    if config.m_left_bc == "dirichlet":
        F_old[0] = _dirichlet_boundary_flux(state.m, state.b, h, k2, k3)
    rhs += tau * (1.0 - theta) * (F_old[1:] - F_old[:-1]) / h

    # implicit-level cross terms theta * k2 * db^n / h (known once b^n is)
    g = np.empty(N)
    if config.m_left_bc == "dirichlet":
        g[0] = k2 * (b_new[1] - b_new[0]) / h
    else:
        g[0] = k2 * b_new[1] / h
    g[1:N - 1] = k2 * (b_new[2:N] - b_new[1:N - 1]) / h
    g[N - 1] = -k2 * b_new[N - 1] / h
    rhs += tau * theta * g

    # Dirichlet coupling of the implicit k3 part
    if config.m_left_bc == "dirichlet":
        rhs[0] += lam * theta * k3 * m0_new

    rhs += tau * f2_hat(state.eps.values[1:], mv)
    return rhs


def step_density(state: EvolutionState, b_new: np.ndarray, config: ThetaSchemeConfig,
                 params: ModelParams, f2_hat, m_bc_new: float) -> CellField:
    """Implicit theta-solve for m at the new level.

    `state` holds level n-1 (its eps is used for the explicit reaction);
    `b_new` must already be updated from the new strain."""
    if not config.uniform_tau:
        raise ValueError("single steps need a scalar-tau config")
    h = _infer_h(state)
    N = state.m.N
    lam = config.tau / h ** 2
    rhs = _density_rhs(state, b_new, m_bc_new, config, params, f2_hat, h)
    diag, off = _theta_system(N, lam * config.theta * params.k3, config.m_left_bc)
    if config.theta == 0.0:
        new = rhs
    else:
        ab = np.zeros((2, N))
        ab[0, 1:] = off
        ab[1, :] = diag
        cb = scipy.linalg.cholesky_banded(ab, lower=False)
        new = scipy.linalg.cho_solve_banded((cb, False), rhs)
    return CellField(new, ghost=m_bc_new)


def divided_difference_density(state: EvolutionState, new_m: CellField,
                               b_new: np.ndarray, config: ThetaSchemeConfig,
                               params: ModelParams, f2_hat, h: float) -> np.ndarray:
    """Direct evaluation of the flux-difference form at the solved level,
    m^{n-1} + tau [theta dF^n/h + (1-theta) dF^{n-1}/h + f2_hat]."""
    k2, k3 = params.k2, params.k3
    F_new = compute_flux(new_m, b_new, h, k2, k3)
    F_old = state.F.copy()
    if config.m_left_bc == "dirichlet":
        F_new[0] = _dirichlet_boundary_flux(new_m, b_new, h, k2, k3)
        F_old[0] = _dirichlet_boundary_flux(state.m, state.b, h, k2, k3)
    dF_new = (F_new[1:] - F_new[:-1]) / h
    dF_old = (F_old[1:] - F_old[:-1]) / h
    return state.m.values + config.tau * (
        config.theta * dF_new + (1.0 - config.theta) * dF_old
        + f2_hat(state.eps.values[1:], state.m.values))


def total_energy(state: EvolutionState, grid: Grid1D, params: ModelParams) -> float:
    """h * sum over cells of [gradient energy + Psi], one-sided differences
    at the boundary cells. Diagnostic only."""
    h = grid.h
    mv = state.m.values
    N = state.m.N
    b = state.b[1:N + 1]
    g = np.empty(N)
    g[1:-1] = (mv[2:] - mv[:-2]) / (2.0 * h)
    g[0] = (mv[1] - mv[0]) / h
    g[-1] = (mv[-1] - mv[-2]) / h
    e = state.eps.values
    e_bar = 0.5 * (e[:-1] + e[1:])
    dens = 0.5 * (params.k1 * b ** 2 + 2.0 * params.k2 * b * g + params.k3 * g ** 2) \
        + psi_total(e_bar, mv, params)
    return float(h * np.sum(dens))


@dataclass
class EvolutionResult:
    grid: Grid1D
    config: ThetaSchemeConfig
    params: ModelParams
    state: EvolutionState
    monitors: dict = field(repr=False)
    snapshots: list = field(repr=False)
    n_steps: int = 0
    stopped: str = "T"                 # 'T' | 'steady'
    pos_violations: tuple = (0, 0)     # entries > 0 in (eps, m) over the run
    zero_entries: tuple = (0, 0)       # entries == 0 in (eps, m) over the run
    a3_ok: bool | None = None
    backend: str = "python"

    def monitor_csv(self, path) -> None:
        cols = ["n", "t", "min_eps", "max_eps", "min_m", "max_m",
                "energy", "residual", "negativity_violations"]
        M = self.monitors
        with open(path, "w") as fh:
            fh.write(",".join(cols) + "\n")
            for r in range(len(M["n"])):
                fh.write(f"{int(M['n'][r])},{M['t'][r]:.17g},{M['min_eps'][r]:.17g},"
                         f"{M['max_eps'][r]:.17g},{M['min_m'][r]:.17g},{M['max_m'][r]:.17g},"
                         f"{M['energy'][r]:.17g},{M['residual'][r]:.17g},"
                         f"{int(M['violations'][r])}\n")

    def trajectory_csv(self, path) -> None:
        """Long format: n,t,x,eps,m,b,F with m/b/F blank off their support."""
        xs_nodes = self.grid.nodes()
        xs_cells = self.grid.cell_centers()
        with open(path, "w") as fh:
            fh.write("n,t,x,eps,m,b,F\n")
            for n, t, eps, m in self.snapshots:
                ef = NodeField(eps)
                mf = CellField(m, ghost=self.state.m.ghost)
                b = update_b(ef, self.grid.h)
                F = compute_flux(mf, b, self.grid.h, self.params.k2, self.params.k3)
                for i, x in enumerate(xs_nodes):
                    fh.write(f"{n},{t:.17g},{x:.17g},{eps[i]:.17g},,"
                             f"{b[i]:.17g},{F[i]:.17g}\n")
                for i, x in enumerate(xs_cells):
                    fh.write(f"{n},{t:.17g},{x:.17g},,{m[i]:.17g},,\n")


def _infer_h(state: EvolutionState) -> float:
    if not state.h > 0:
        raise ValueError("state carries no grid spacing; use make_state")
    return state.h


def make_state(grid: Grid1D, eps0, m0, eps_bc0: float | None = None,
               m_bc0: float | None = None, params: ModelParams | None = None,
               t: float = 0.0) -> EvolutionState:
    """Assemble a consistent state from initial fields or callables."""
    if callable(eps0):
        eps = NodeField(np.array([eps0(x) for x in grid.nodes()], dtype=float))
    elif isinstance(eps0, NodeField):
        eps = eps0.copy()
    else:
        eps = NodeField(np.array(eps0, dtype=float, copy=True))
    if callable(m0):
        m = CellField(np.array([m0(x) for x in grid.cell_centers()], dtype=float))
    elif isinstance(m0, CellField):
        m = m0.copy()
    else:
        m = CellField(np.array(m0, dtype=float, copy=True))
    if eps.N != grid.N or m.N != grid.N:
        raise ValueError("field sizes do not match the grid")
    if eps_bc0 is not None:
        eps.values[0] = eps_bc0
    if m_bc0 is not None:
        m.ghost = m_bc0
    b = update_b(eps, grid.h)
    k2 = params.k2 if params is not None else 0.0
    k3 = params.k3 if params is not None else 0.0
    F = compute_flux(m, b, grid.h, k2, k3)
    return EvolutionState(t, eps, m, b, F, h=grid.h)


def _as_callable(bc):
    if callable(bc):
        return bc
    return lambda t, v=float(bc): v


def _resolve_reactions(reactions, params: ModelParams):
    """Returns (f1_hat, f2_hat, poly_pair_or_None) with H3 truncation applied."""
    f1, f2 = reactions
    polys = None
    if isinstance(f1, PolynomialReaction) and isinstance(f2, PolynomialReaction):
        polys = (f1, f2)
    f1_hat = truncated(f1, params.M_eps, params.M_m)
    f2_hat = truncated(f2, params.M_eps, params.M_m)
    return f1_hat, f2_hat, polys


def _select_backend(polys) -> str:
    choice = os.environ.get("POROPHASE_BACKEND", "auto")
    if choice not in ("auto", "python", "compiled"):
        raise ValueError(f"POROPHASE_BACKEND must be auto|python|compiled, got {choice!r}")
    if choice == "python":
        return "python"
    try:
        from . import _kernels  # noqa: F401
        have = True
    except ImportError:
        have = False
    if choice == "compiled":
        if not have:
            raise ImportError("compiled kernels requested but porophase._kernels "
                              "is not built")
        if polys is None:
            raise ValueError("compiled backend needs PolynomialReaction reactions")
        return "compiled"
    return "compiled" if (have and polys is not None) else "python"


def run_evolution(grid: Grid1D, config: ThetaSchemeConfig, params: ModelParams,
                  reactions, initial, boundary) -> EvolutionResult:
    """Advance the theta scheme until T or until the per-tau increment norm
    drops below steady_tol.

    reactions: pair of PolynomialReaction (enables the compiled core) or
               plain callables f(eps, m); H3 truncation is applied here.
    initial:   (eps0, m0) fields, arrays, or callables of x.
    boundary:  (eps_D, m_D) constants or callables of t.
    """
    f1_hat, f2_hat, polys = _resolve_reactions(reactions, params)
    eps_D, m_D = (_as_callable(boundary[0]), _as_callable(boundary[1]))

    rep = max_stable_tau(config.theta, grid.h, params.k2, config.max_tau)
    if config.enforce_stability and config.max_tau > rep.tau_max * (1 + 1e-12):
        raise StabilityError(config.max_tau, rep.tau_max)

    state = make_state(grid, initial[0], initial[1],
                       eps_bc0=eps_D(0.0), m_bc0=m_D(0.0), params=params)

    ts = np.concatenate(([0.0], np.cumsum(config.tau_sequence())))
    eps_bc = np.array([eps_D(t) for t in ts])
    m_bc = np.array([m_D(t) for t in ts])

    backend = _select_backend(polys) if config.uniform_tau else "python"
    if backend == "compiled":
        from ._kernel_driver import run_compiled_loop
        return run_compiled_loop(grid, config, params, polys, state,
                                 eps_bc, m_bc)
    return _run_python_loop(grid, config, params, f1_hat, f2_hat, state,
                            eps_bc, m_bc)


def _monitor_stride(config: ThetaSchemeConfig, sigma: int) -> int:
    if config.monitor_stride > 0:
        return config.monitor_stride
    return max(1, sigma // 200_000)


def _record(monitors, state, grid, params, n, residual, viol):
    monitors["n"].append(n)
    monitors["t"].append(state.t)
    monitors["min_eps"].append(state.eps.values.min())
    monitors["max_eps"].append(state.eps.values.max())
    monitors["min_m"].append(state.m.values.min())
    monitors["max_m"].append(state.m.values.max())
    monitors["energy"].append(total_energy(state, grid, params))
    monitors["residual"].append(residual)
    monitors["violations"].append(viol)


def _factor_theta_system(N, lam_theta_k3, m_left_bc):
    diag, off = _theta_system(N, lam_theta_k3, m_left_bc)
    ab = np.zeros((2, N))
    ab[0, 1:] = off
    ab[1, :] = diag
    return scipy.linalg.cholesky_banded(ab, lower=False)


def _run_python_loop(grid, config, params, f1_hat, f2_hat, state,
                     eps_bc, m_bc) -> EvolutionResult:
    h = grid.h
    N = grid.N
    theta = config.theta
    k2, k3 = params.k2, params.k3
    taus = config.tau_sequence()
    times = np.concatenate(([0.0], np.cumsum(taus)))
    sigma = len(eps_bc) - 1
    stride = _monitor_stride(config, sigma)

    cb = None
    if theta > 0.0 and config.uniform_tau:
        cb = _factor_theta_system(N, (float(config.tau) / h ** 2) * theta * k3,
                                  config.m_left_bc)

    monitors = {k: [] for k in ("n", "t", "min_eps", "max_eps", "min_m",
                                "max_m", "energy", "residual", "violations")}
    snapshots = [(0, 0.0, state.eps.values.copy(), state.m.values.copy())]
    _record(monitors, state, grid, params, 0, np.nan, 0)

    pos_eps = pos_m = zero_eps = zero_m = 0
    b_level1 = None
    stopped = "T"
    n_done = 0
    for n in range(1, sigma + 1):
        tau_n = float(taus[n - 1])
        cfg_n = config if config.uniform_tau else \
            dataclasses.replace(config, tau=tau_n, T=tau_n)
        eps_new = step_strain(state, cfg_n, params, f1_hat, eps_bc[n])
        b_new = update_b(eps_new, h)
        rhs = _density_rhs(state, b_new, m_bc[n], cfg_n, params, f2_hat, h)
        if theta == 0.0:
            m_new_vals = rhs
        else:
            fac = cb if cb is not None else _factor_theta_system(
                N, (tau_n / h ** 2) * theta * k3, config.m_left_bc)
            m_new_vals = scipy.linalg.cho_solve_banded((fac, False), rhs)
        m_new = CellField(m_new_vals, ghost=m_bc[n])

        d_eps = eps_new.values - state.eps.values
        d_m = m_new.values - state.m.values
        residual = math.sqrt(h * (np.sum(d_eps ** 2) + np.sum(d_m ** 2))) / tau_n
        if not np.isfinite(residual):
            raise NumericsError(f"non-finite state at step {n}")

        state.eps = eps_new
        state.m = m_new
        state.b = b_new
        state.F = compute_flux(m_new, b_new, h, k2, k3)
        state.t = float(times[n])
        state.step = n
        n_done = n
        if n == 1:
            b_level1 = b_new.copy()

        if config.negativity_monitor:
            viol = int(np.sum(eps_new.values > 0) + np.sum(m_new.values > 0))
            pos_eps += int(np.sum(eps_new.values > 0))
            pos_m += int(np.sum(m_new.values > 0))
            zero_eps += int(np.sum(eps_new.values == 0))
            zero_m += int(np.sum(m_new.values == 0))
        else:
            viol = 0

        if n % stride == 0 or n == sigma:
            _record(monitors, state, grid, params, n, residual, viol)
        if config.snapshot_stride > 0 and n % config.snapshot_stride == 0:
            snapshots.append((n, state.t, eps_new.values.copy(), m_new.values.copy()))

        if config.steady_tol > 0 and residual < config.steady_tol:
            stopped = "steady"
            if monitors["n"][-1] != n:
                _record(monitors, state, grid, params, n, residual, viol)
            break

    if snapshots[-1][0] != n_done:
        snapshots.append((n_done, state.t, state.eps.values.copy(),
                          state.m.values.copy()))

    a3 = None
    if b_level1 is not None:
        b0 = update_b(NodeField(snapshots[0][2]), h)
        a3 = check_A3(b0[1:N + 1], b_level1[1:N + 1])[0]

    return EvolutionResult(
        grid=grid, config=config, params=params, state=state,
        monitors={k: np.asarray(v) for k, v in monitors.items()},
        snapshots=snapshots, n_steps=n_done, stopped=stopped,
        pos_violations=(pos_eps, pos_m), zero_entries=(zero_eps, zero_m),
        a3_ok=a3, backend="python")


def run_regularized(grid: Grid1D, config: ThetaSchemeConfig, params: ModelParams,
                    reactions, initial, boundary, delta: float) -> EvolutionResult:
    """Evolution with every k2 cross term built from the mollified partner
    field instead of the raw one (the regularized problem).

    Mollification inside the stepping extends fields by their boundary
    values so spatially constant states remain exact fixed points.
    """
    if not config.uniform_tau:
        raise ValueError("the regularized run supports uniform tau only")
    kernel = standard_mollifier(delta, grid.h)
    from .mollifier import _check_delta
    _check_delta(kernel, grid)

    f1_hat, f2_hat, _ = _resolve_reactions(reactions, params)
    eps_D, m_D = (_as_callable(boundary[0]), _as_callable(boundary[1]))
    rep = max_stable_tau(config.theta, grid.h, params.k2, config.tau)
    if config.enforce_stability and config.tau > rep.tau_max * (1 + 1e-12):
        raise StabilityError(config.tau, rep.tau_max)

    state = make_state(grid, initial[0], initial[1],
                       eps_bc0=eps_D(0.0), m_bc0=m_D(0.0), params=params)
    sigma = config.n_steps
    ts = np.arange(sigma + 1) * float(config.tau)
    eps_bc = np.array([eps_D(t) for t in ts])
    m_bc = np.array([m_D(t) for t in ts])
    return _run_python_loop_regularized(grid, config, params, f1_hat, f2_hat,
                                        state, eps_bc, m_bc, kernel)


def _smooth_cells(m: CellField, kernel: MollifierKernel) -> CellField:
    return CellField(mollify_array(m.with_ghost(), kernel, extension="boundary")[1:],
                     ghost=m.ghost)


def _smooth_nodes(eps: NodeField, kernel: MollifierKernel) -> NodeField:
    return NodeField(mollify_array(eps.values, kernel, extension="boundary"))


def _run_python_loop_regularized(grid, config, params, f1_hat, f2_hat, state,
                                 eps_bc, m_bc, kernel) -> EvolutionResult:
    """Same loop as _run_python_loop with mollified cross terms; kept separate
    because every step needs two extra convolutions."""
    h = grid.h
    N = grid.N
    tau, theta = config.tau, config.theta
    k1, k2, k3 = params.k1, params.k2, params.k3
    lam = tau / h ** 2
    sigma = len(eps_bc) - 1
    stride = _monitor_stride(config, sigma)

    diag, off = _theta_system(N, lam * theta * k3, config.m_left_bc)
    cb = None
    if theta > 0.0:
        ab = np.zeros((2, N))
        ab[0, 1:] = off
        ab[1, :] = diag
        cb = scipy.linalg.cholesky_banded(ab, lower=False)

    monitors = {k: [] for k in ("n", "t", "min_eps", "max_eps", "min_m",
                                "max_m", "energy", "residual", "violations")}
    snapshots = [(0, 0.0, state.eps.values.copy(), state.m.values.copy())]
    _record(monitors, state, grid, params, 0, np.nan, 0)

    # b computed from the mollified strain enters the cross part of F
    b_smooth = update_b(_smooth_nodes(state.eps, kernel), h)

    pos_eps = pos_m = zero_eps = zero_m = 0
    stopped = "T"
    n_done = 0
    for n in range(1, sigma + 1):
        # strain update with the cross difference of the mollified m
        m_sm = _smooth_cells(state.m, kernel)
        e = state.eps.with_ghosts()
        lap = e[:-2] - 2.0 * e[1:-1] + e[2:]
        X = _cross_second_difference(m_sm.with_ghost(), config.cross_stencil)
        react = f1_hat(state.eps.values[1:], state.m.values)
        new_eps_vals = state.eps.values.copy()
        new_eps_vals[1:] += tau * (k1 * lap[1:] / h ** 2 + k2 * X / h ** 2 + react)
        new_eps_vals[0] = eps_bc[n]
        eps_new = NodeField(new_eps_vals)

        b_new = update_b(eps_new, h)
        b_new_smooth = update_b(_smooth_nodes(eps_new, kernel), h)

        # density solve with k2 terms from the mollified strain gradient
        shadow = state.copy()
        shadow.b = b_smooth
        shadow.F = compute_flux(state.m, b_smooth, h, k2, k3)
        rhs = _density_rhs(shadow, b_new_smooth, m_bc[n], config, params, f2_hat, h)
        if theta == 0.0:
            m_new_vals = rhs
        else:
            m_new_vals = scipy.linalg.cho_solve_banded((cb, False), rhs)
        m_new = CellField(m_new_vals, ghost=m_bc[n])

        d_eps = eps_new.values - state.eps.values
        d_m = m_new.values - state.m.values
        residual = math.sqrt(h * (np.sum(d_eps ** 2) + np.sum(d_m ** 2))) / tau
        if not np.isfinite(residual):
            raise NumericsError(f"non-finite state at step {n}")

        state.eps = eps_new
        state.m = m_new
        state.b = b_new
        state.F = compute_flux(m_new, b_new, h, k2, k3)
        state.t = n * tau
        state.step = n
        b_smooth = b_new_smooth
        n_done = n

        if config.negativity_monitor:
            viol = int(np.sum(eps_new.values > 0) + np.sum(m_new.values > 0))
            pos_eps += int(np.sum(eps_new.values > 0))
            pos_m += int(np.sum(m_new.values > 0))
            zero_eps += int(np.sum(eps_new.values == 0))
            zero_m += int(np.sum(m_new.values == 0))
        else:
            viol = 0
        if n % stride == 0 or n == sigma:
            _record(monitors, state, grid, params, n, residual, viol)
        if config.snapshot_stride > 0 and n % config.snapshot_stride == 0:
            snapshots.append((n, state.t, new_eps_vals.copy(), m_new_vals.copy()))
        if config.steady_tol > 0 and residual < config.steady_tol:
            stopped = "steady"
            if monitors["n"][-1] != n:
                _record(monitors, state, grid, params, n, residual, viol)
            break

    if snapshots[-1][0] != n_done:
        snapshots.append((n_done, state.t, state.eps.values.copy(),
                          state.m.values.copy()))
    return EvolutionResult(
        grid=grid, config=config, params=params, state=state,
        monitors={k: np.asarray(v) for k, v in monitors.items()},
        snapshots=snapshots, n_steps=n_done, stopped=stopped,
        pos_violations=(pos_eps, pos_m), zero_entries=(zero_eps, zero_m),
        a3_ok=None, backend="python")
