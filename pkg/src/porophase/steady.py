"""Stationary two-point boundary-value solver.

The stationary system on nodes x_i = l1 + i*sigma, i = 0..n, sigma = L/n:

    -k1 e'' - k2 m'' = f1(e, m)
    -k2 e'' - k3 m'' = f2(e, m)

with (e, m) pinned at l1 and either zero-derivative (ghost mirror
h_{n+1} = h_{n-1}) or pinned values at l2. Unknowns are interleaved
(e_0, m_0, e_1, m_1, ...), which keeps the Jacobian banded with
bandwidths (3, 3).

Newton iterations are damped by halving until the residual 2-norm
decreases; when the line search stalls (double-well landscapes steer the
iterates through regions where the Jacobian loses definiteness) the
solver falls back to pseudo-transient continuation, i.e. backward-Euler
steps (J + I/dt) du = -R whose pseudo-step grows geometrically, and
finishes with plain Newton.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .grid import Grid1D
from .linalg import BandedMatrix, SingularMatrixError, solve_banded
from .potential import (ModelParams, find_equilibria, reaction_f1, reaction_f2,
                        two_minima)


class NoConvergenceError(RuntimeError):
    def __init__(self, iterations: int, residual: float):
        self.iterations = iterations
        self.residual = residual
        super().__init__(f"Newton did not converge after {iterations} iterations "
                         f"(residual {residual:.3e})")


class SingularJacobianError(RuntimeError):
    pass


@dataclass(frozen=True)
class StationaryProblem:
    grid: Grid1D
    params: ModelParams
    eps_D: float
    m_D: float
    bc_mode: str = "dirichlet_neumann"   # or 'dirichlet_dirichlet'
    right_values: tuple | None = None    # (eps, m) at l2 for dirichlet_dirichlet

    def __post_init__(self):
        if self.bc_mode not in ("dirichlet_neumann", "dirichlet_dirichlet"):
            raise ValueError(f"unknown bc_mode {self.bc_mode!r}")
        if self.bc_mode == "dirichlet_dirichlet" and self.right_values is None:
            raise ValueError("dirichlet_dirichlet needs right_values=(eps, m)")
        if not (np.isfinite(self.eps_D) and np.isfinite(self.m_D)):
            raise ValueError("boundary values must be finite")

    @property
    def n(self) -> int:
        return self.grid.N

    @property
    def n_unknowns(self) -> int:
        return 2 * (self.n + 1)


@dataclass
class NewtonConfig:
    tol: float = 1e-10
    max_iters: int = 200
    damping: str = "backtracking"    # 'backtracking' | 'none'
    fd_check: bool = False
    ptc_rescue: bool = True          # pseudo-transient fallback on stall
    ptc_max_steps: int = 3000

    def __post_init__(self):
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.max_iters < 1:
            raise ValueError("max_iters must be at least 1")
        if self.damping not in ("backtracking", "none"):
            raise ValueError(f"unknown damping {self.damping!r}")


@dataclass
class NewtonReport:
    converged: bool
    iterations: int
    residual_norms: list = field(default_factory=list)
    step_norms: list = field(default_factory=list)
    strategy: str = "newton"

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("iter,residual_norm,step_norm\n")
            for i, (r, s) in enumerate(zip(self.residual_norms, self.step_norms)):
                fh.write(f"{i},{r:.17g},{s:.17g}\n")


def _reaction_derivatives(e, m, params: ModelParams):
    a, b, al = params.a, params.b, params.alpha
    d11 = -al * b ** 2 * m ** 2 - 1.0 - a * b ** 2                    # df1/de
    d12 = 2.0 * b * al * m ** 2 - 2.0 * al * b ** 2 * m * e + a * b  # df1/dm
    d21 = 2.0 * al * b * m ** 2 - 2.0 * al * b ** 2 * e * m + a * b  # df2/de
    d22 = -3.0 * al * m ** 2 + 4.0 * al * b * e * m - al * b ** 2 * e ** 2 - a
    return d11, d12, d21, d22


def assemble_residual(problem: StationaryProblem, state: np.ndarray) -> np.ndarray:
    """Central second differences minus the reactions; Dirichlet rows pin
    boundary values, the Neumann end uses the mirrored ghost."""
    u = np.asarray(state, dtype=float)
    if u.shape != (problem.n_unknowns,):
        raise ValueError(f"state has shape {u.shape}, expected ({problem.n_unknowns},)")
    par = problem.params
    s = problem.grid.h
    e = u[0::2]
    m = u[1::2]
    R = np.empty_like(u)
    R[0] = e[0] - problem.eps_D
    R[1] = m[0] - problem.m_D
    d2e = (e[2:] - 2.0 * e[1:-1] + e[:-2]) / s ** 2
    d2m = (m[2:] - 2.0 * m[1:-1] + m[:-2]) / s ** 2
    R[2:-2:2] = -par.k1 * d2e - par.k2 * d2m - reaction_f1(e[1:-1], m[1:-1], par)
    R[3:-1:2] = -par.k2 * d2e - par.k3 * d2m - reaction_f2(e[1:-1], m[1:-1], par)
    if problem.bc_mode == "dirichlet_neumann":
        d2e_n = 2.0 * (e[-2] - e[-1]) / s ** 2
        d2m_n = 2.0 * (m[-2] - m[-1]) / s ** 2
        R[-2] = -par.k1 * d2e_n - par.k2 * d2m_n - reaction_f1(e[-1], m[-1], par)
        R[-1] = -par.k2 * d2e_n - par.k3 * d2m_n - reaction_f2(e[-1], m[-1], par)
    else:
        R[-2] = e[-1] - problem.right_values[0]
        R[-1] = m[-1] - problem.right_values[1]
    return R


def assemble_jacobian(problem: StationaryProblem, state: np.ndarray,
                      shift: float = 0.0) -> BandedMatrix:
    """Analytic Jacobian of the residual (banded, interleaved unknowns);
    `shift` adds shift*I to the non-Dirichlet rows (pseudo-transient steps)."""
    u = np.asarray(state, dtype=float)
    par = problem.params
    n = problem.n
    s = problem.grid.h
    c = 1.0 / s ** 2
    e = u[0::2]
    m = u[1::2]
    d11, d12, d21, d22 = _reaction_derivatives(e, m, par)

    A = BandedMatrix.zeros(problem.n_unknowns, 3, 3)
    A[0, 0] = 1.0
    A[1, 1] = 1.0
    for i in range(1, n):
        re, rm = 2 * i, 2 * i + 1
        A.add(re, re - 2, -par.k1 * c)
        A.add(re, re + 2, -par.k1 * c)
        A.add(re, re, 2.0 * par.k1 * c - d11[i] + shift)
        A.add(re, rm - 2, -par.k2 * c)
        A.add(re, rm + 2, -par.k2 * c)
        A.add(re, rm, 2.0 * par.k2 * c - d12[i])
        A.add(rm, re - 2, -par.k2 * c)
        A.add(rm, re + 2, -par.k2 * c)
        A.add(rm, re, 2.0 * par.k2 * c - d21[i])
        A.add(rm, rm - 2, -par.k3 * c)
        A.add(rm, rm + 2, -par.k3 * c)
        A.add(rm, rm, 2.0 * par.k3 * c - d22[i] + shift)
    re, rm = 2 * n, 2 * n + 1
    if problem.bc_mode == "dirichlet_neumann":
        A.add(re, re - 2, -2.0 * par.k1 * c)
        A.add(re, re, 2.0 * par.k1 * c - d11[n] + shift)
        A.add(re, rm - 2, -2.0 * par.k2 * c)
        A.add(re, rm, 2.0 * par.k2 * c - d12[n])
        A.add(rm, re - 2, -2.0 * par.k2 * c)
        A.add(rm, re, 2.0 * par.k2 * c - d21[n])
        A.add(rm, rm - 2, -2.0 * par.k3 * c)
        A.add(rm, rm, 2.0 * par.k3 * c - d22[n] + shift)
    else:
        A[re, re] = 1.0
        A[rm, rm] = 1.0
    return A


def fd_jacobian(problem: StationaryProblem, state: np.ndarray,
                h: float = 1e-7) -> np.ndarray:
    """Dense central-difference Jacobian (verification only)."""
    u = np.asarray(state, dtype=float)
    J = np.empty((len(u), len(u)))
    for j in range(len(u)):
        up = u.copy(); up[j] += h
        um = u.copy(); um[j] -= h
        J[:, j] = (assemble_residual(problem, up) - assemble_residual(problem, um)) / (2 * h)
    return J


def newton_solve(problem: StationaryProblem, guess: np.ndarray,
                 config: NewtonConfig | None = None):
    """Damped Newton with pseudo-transient rescue.

    Returns (solution, NewtonReport); raises NoConvergenceError or
    SingularJacobianError."""
    config = config or NewtonConfig()
    u = np.asarray(guess, dtype=float).copy()
    if u.shape != (problem.n_unknowns,):
        raise ValueError(f"guess has shape {u.shape}, expected ({problem.n_unknowns},)")

    if config.fd_check:
        J = assemble_jacobian(problem, u).to_dense()
        Jfd = fd_jacobian(problem, u)
        err = np.abs(J - Jfd).max() / max(1.0, np.abs(Jfd).max())
        if err > 1e-5:
            raise SingularJacobianError(
                f"analytic Jacobian disagrees with finite differences ({err:.2e})")

    report = NewtonReport(False, 0)
    total = 0

    def solve_step(shift, R):
        try:
            return solve_banded(assemble_jacobian(problem, u, shift=shift), R)
        except SingularMatrixError as exc:
            raise SingularJacobianError(
                f"singular Jacobian near pivot {exc.pivot_index} "
                "(degenerate initial guess?)") from exc

    stalled = False
    while total < config.max_iters:
        R = assemble_residual(problem, u)
        rn = float(np.linalg.norm(R))
        report.residual_norms.append(rn)
        if np.abs(R).max() < config.tol:
            report.converged = True
            report.iterations = total
            report.step_norms.append(0.0)
            return u, report
        du = solve_step(0.0, R)
        if config.damping == "none":
            u -= du
            report.step_norms.append(float(np.linalg.norm(du)))
            total += 1
            if not np.all(np.isfinite(u)):
                raise NoConvergenceError(total, float("inf"))
            continue
        t, ok = 1.0, False
        for _ in range(20):
            if np.linalg.norm(assemble_residual(problem, u - t * du)) < rn:
                ok = True
                break
            t /= 2.0
        if not ok:
            stalled = True
            break
        u -= t * du
        report.step_norms.append(float(t * np.linalg.norm(du)))
        total += 1

    if not stalled or not config.ptc_rescue:
        rn = float(np.abs(assemble_residual(problem, u)).max())
        raise NoConvergenceError(total, rn)

    # pseudo-transient rescue: backward-Euler steps with growing pseudo-step
    report.strategy = "newton+ptc"
    dt = 1e-2
    R = assemble_residual(problem, u)
    rn_prev = float(np.linalg.norm(R))
    for _ in range(config.ptc_max_steps):
        du = solve_step(1.0 / dt, R)
        u_try = u - du
        R_try = assemble_residual(problem, u_try)
        rn = float(np.linalg.norm(R_try))
        if not np.isfinite(rn) or rn > 2.0 * rn_prev:
            dt *= 0.25
            if dt < 1e-14:
                raise NoConvergenceError(total, rn_prev)
            continue
        u, R, rn_prev = u_try, R_try, rn
        dt = min(dt * 1.5, 1e8)
        total += 1
        report.residual_norms.append(rn)
        report.step_norms.append(float(np.linalg.norm(du)))
        if np.abs(R).max() < config.tol:
            report.converged = True
            report.iterations = total
            return u, report
    raise NoConvergenceError(total, rn_prev)


def make_initial_guess(problem: StationaryProblem, kind: str,
                       config: NewtonConfig | None = None) -> np.ndarray:
    """Seed vectors for the three solution families.

    fluid_poor_const / fluid_rich_const: constant phase values with the
    Dirichlet rows overwritten. two_phase: the converged solution of the
    auxiliary problem pinning the poor phase at l1 and the rich phase at
    l2, Newton-solved from a linear interpolation between the phases.
    """
    pair = two_minima(problem.params)
    if pair is None:
        raise ValueError("the energy landscape does not have two minima at "
                         f"p={problem.params.p}; cannot build phase guesses")
    poor, rich = pair
    n = problem.n
    u = np.empty(problem.n_unknowns)
    if kind == "fluid_poor_const":
        u[0::2], u[1::2] = poor.eps, poor.m
    elif kind == "fluid_rich_const":
        u[0::2], u[1::2] = rich.eps, rich.m
    elif kind == "two_phase":
        x = np.linspace(0.0, 1.0, n + 1)
        lin = np.empty(problem.n_unknowns)
        lin[0::2] = poor.eps + (rich.eps - poor.eps) * x
        lin[1::2] = poor.m + (rich.m - poor.m) * x
        aux = StationaryProblem(problem.grid, problem.params,
                                eps_D=poor.eps, m_D=poor.m,
                                bc_mode="dirichlet_dirichlet",
                                right_values=(rich.eps, rich.m))
        u, _ = newton_solve(aux, lin, config)
    else:
        raise ValueError(f"unknown guess kind {kind!r}")
    u[0], u[1] = problem.eps_D, problem.m_D
    if problem.bc_mode == "dirichlet_dirichlet":
        u[-2], u[-1] = problem.right_values
    return u


def continuation_in_k2(problem: StationaryProblem, k2_values, guess: np.ndarray,
                       config: NewtonConfig | None = None) -> list:
    """Solve for each k2 in sequence, warm-starting from the previous
    solution. Returns [(k2, solution, report)]; raises with the failing k2."""
    out = []
    u = np.asarray(guess, dtype=float).copy()
    for k2 in k2_values:
        prob_k = StationaryProblem(problem.grid, problem.params.replace(k2=k2),
                                   problem.eps_D, problem.m_D,
                                   problem.bc_mode, problem.right_values)
        try:
            u, rep = newton_solve(prob_k, u, config)
        except (NoConvergenceError, SingularJacobianError) as exc:
            exc.args = (f"continuation failed at k2={k2:g}: {exc}",)
            raise
        out.append((k2, u.copy(), rep))
    return out


def interface_crossings(m_values: np.ndarray, level: float) -> int:
    sgn = np.sign(m_values - level)
    return int(np.sum(sgn[:-1] * sgn[1:] < 0))


def solution_to_csv(state: np.ndarray, grid: Grid1D, path) -> None:
    xs = grid.nodes()
    e = state[0::2]
    m = state[1::2]
    with open(path, "w") as fh:
        fh.write("x,eps,m\n")
        for x, ei, mi in zip(xs, e, m):
            fh.write(f"{x:.17g},{ei:.17g},{mi:.17g}\n")
