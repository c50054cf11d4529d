import os

import numpy as np
import pytest

import porophase as pp

pytestmark = pytest.mark.skipif(pp.backend_name() != "compiled",
                                reason="compiled kernels not built")


def short_run(backend, perturb=0.0, **cfg_kw):
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0,
                         k1=1e-3, k2=2e-4, k3=1e-3)
    grid = pp.build_grid(0.0, 1.0, 64)
    rep = pp.max_stable_tau(0.5, grid.h, par.k2)
    kw = dict(theta=0.5, tau=0.9 * rep.tau_max, T=0.2, steady_tol=0.0)
    kw.update(cfg_kw)
    cfg = pp.ThetaSchemeConfig(**kw)
    x = grid.nodes()
    eps0 = -0.14 - 0.01 * np.sin(np.pi * x) + perturb
    m0 = -0.12 - 0.01 * grid.cell_centers()
    os.environ["POROPHASE_BACKEND"] = backend
    try:
        return pp.run_evolution(grid, cfg, par,
                                (pp.f1_table(par), pp.f2_table(par)),
                                (eps0, m0), (-0.14, -0.12))
    finally:
        os.environ.pop("POROPHASE_BACKEND", None)


def test_backends_agree():
    r_py = short_run("python")
    r_cy = short_run("compiled")
    assert r_py.backend == "python" and r_cy.backend == "compiled"
    assert r_py.n_steps == r_cy.n_steps
    np.testing.assert_allclose(r_py.state.eps.values, r_cy.state.eps.values,
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(r_py.state.m.values, r_cy.state.m.values,
                               rtol=1e-12, atol=1e-14)
    np.testing.assert_allclose(r_py.monitors["energy"], r_cy.monitors["energy"],
                               rtol=1e-9)
    assert r_py.pos_violations == r_cy.pos_violations


def test_each_backend_is_bitwise_deterministic():
    for backend in ("python", "compiled"):
        a = short_run(backend)
        b = short_run(backend)
        assert np.array_equal(a.state.eps.values, b.state.eps.values)
        assert np.array_equal(a.state.m.values, b.state.m.values)
        # row 0 has no increment yet (residual is nan there)
        assert np.array_equal(a.monitors["residual"][1:], b.monitors["residual"][1:])


def test_forced_compiled_needs_polynomials():
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0)
    grid = pp.build_grid(0.0, 1.0, 16)
    cfg = pp.ThetaSchemeConfig(theta=0.5, tau=1e-5, T=1e-4, steady_tol=0.0)
    os.environ["POROPHASE_BACKEND"] = "compiled"
    try:
        with pytest.raises(ValueError):
            pp.run_evolution(grid, cfg, par,
                             (lambda e, m: 0.0 * e, lambda e, m: 0.0 * e),
                             (np.full(17, -0.1), np.full(16, -0.1)),
                             (-0.1, -0.1))
    finally:
        os.environ.pop("POROPHASE_BACKEND", None)


def test_callable_reactions_fall_back_to_python():
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0)
    grid = pp.build_grid(0.0, 1.0, 16)
    cfg = pp.ThetaSchemeConfig(theta=0.5, tau=1e-5, T=1e-4, steady_tol=0.0)

    def f(e, m):
        return np.zeros(np.broadcast(np.asarray(e), np.asarray(m)).shape)

    res = pp.run_evolution(grid, cfg, par, (f, f),
                           (np.full(17, -0.1), np.full(16, -0.1)), (-0.1, -0.1))
    assert res.backend == "python"


def test_monitor_stride_equivalence():
    # strided monitors must subsample the stride-1 sequence, not change it
    r1 = short_run("compiled", monitor_stride=1)
    r5 = short_run("compiled", monitor_stride=5)
    n5 = r5.monitors["n"]
    idx = np.searchsorted(r1.monitors["n"], n5)
    np.testing.assert_allclose(r5.monitors["residual"][1:],
                               r1.monitors["residual"][idx][1:], rtol=1e-12)
    np.testing.assert_allclose(r5.monitors["energy"],
                               r1.monitors["energy"][idx], rtol=1e-12)


def test_snapshot_strides_align_across_backends():
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0,
                         k1=1e-3, k2=2e-4, k3=1e-3)
    grid = pp.build_grid(0.0, 1.0, 50)
    rep = pp.max_stable_tau(0.5, grid.h, par.k2)
    cfg = pp.ThetaSchemeConfig(theta=0.5, tau=0.9 * rep.tau_max,
                               T=100 * 0.9 * rep.tau_max, steady_tol=0.0,
                               snapshot_stride=25)

    def run(backend):
        os.environ["POROPHASE_BACKEND"] = backend
        try:
            return pp.run_evolution(grid, cfg, par,
                                    (pp.f1_table(par), pp.f2_table(par)),
                                    (lambda x: -0.1 - 0.05 * x, lambda x: -0.1),
                                    (-0.1, -0.1))
        finally:
            os.environ.pop("POROPHASE_BACKEND", None)

    a, b = run("python"), run("compiled")
    assert [s[0] for s in a.snapshots] == [0, 25, 50, 75, 100]
    assert [s[0] for s in b.snapshots] == [0, 25, 50, 75, 100]
    for (na, _, ea, ma), (nb, _, eb, mb) in zip(a.snapshots, b.snapshots):
        assert na == nb
        np.testing.assert_allclose(ea, eb, atol=1e-13)
        np.testing.assert_allclose(ma, mb, atol=1e-13)


def test_fully_explicit_scheme_agrees():
    # theta = 0 skips the tridiagonal solve entirely in both backends
    par = pp.ModelParams(a=0.5, b=1.0, p=0.24, alpha=100.0,
                         k1=1e-3, k2=2e-4, k3=1e-3)
    grid = pp.build_grid(0.0, 1.0, 40)
    rep = pp.max_stable_tau(0.0, grid.h, par.k2)
    cfg = pp.ThetaSchemeConfig(theta=0.0, tau=0.9 * rep.tau_max,
                               T=50 * 0.9 * rep.tau_max, steady_tol=0.0)
    out = {}
    for backend in ("python", "compiled"):
        os.environ["POROPHASE_BACKEND"] = backend
        try:
            out[backend] = pp.run_evolution(
                grid, cfg, par, (pp.f1_table(par), pp.f2_table(par)),
                (lambda x: -0.12 - 0.02 * x * (1 - x), lambda x: -0.11),
                (-0.12, -0.11))
        finally:
            os.environ.pop("POROPHASE_BACKEND", None)
    np.testing.assert_allclose(out["python"].state.eps.values,
                               out["compiled"].state.eps.values, atol=1e-14)
    np.testing.assert_allclose(out["python"].state.m.values,
                               out["compiled"].state.m.values, atol=1e-14)
