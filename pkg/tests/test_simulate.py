import numpy as np
import pytest
from scipy.special import erf

from conftest import rel_l2
from pdediscover.expr import parse_expr
from pdediscover.simulate import (
    AxisSpec,
    BenchmarkSpec,
    DivergenceError,
    RhsSpec,
    benchmark_rhs,
    generate_benchmark,
    preset,
    solve_rhs,
    true_terms,
)


def test_preset_grids_match_reported_sizes():
    assert generate_benchmark is not None
    sizes = {
        "burgers": 256 * 201,
        "kdv": 512 * 201,
        "klein_gordon": 201 * 201,
        "convection_diffusion": 256 * 100,
        "chaffee_infante": 301 * 200,
    }
    for name, n in sizes.items():
        spec = preset(name)
        assert np.prod([ax.n for ax in spec.axes]) == n
    assert sizes["burgers"] == 51456


def test_unknown_benchmark_rejected():
    with pytest.raises(ValueError):
        preset("heat3d")
    with pytest.raises(ValueError):
        BenchmarkSpec("burgers", {"delta": 0.1, "zeta": 1.0}, "exp",
                      preset("burgers").axes)


def test_true_terms_burgers():
    spec = preset("burgers")
    assert true_terms(spec) == [(-1.0, ("u", "u_x")), (0.1, ("u_xx",))]


# --- oracle: closed-form solution of the transport preset -------------------

def test_convection_diffusion_matches_analytic(convection_diffusion_field):
    f = convection_diffusion_field
    x = f.axes[0].values
    t = f.axes[1].values
    s0, x0, c, nu = 0.25, 0.4, 1.0, 0.25
    var = s0**2 + 2 * nu * t[None, :]
    exact = (s0 / np.sqrt(var)) * np.exp(-((x[:, None] - x0 - c * t[None, :]) ** 2) / (2 * var))
    assert rel_l2(f.data, exact) <= 1e-3


# --- oracle: separable standing mode of the relativistic oscillator ---------

def test_klein_gordon_mode_matches_analytic():
    spec = preset("klein_gordon", ic="mode", k=2)
    f = generate_benchmark(spec)
    x = f.axes[0].values
    t = f.axes[1].values
    k = 2
    omega = np.sqrt(0.5 * (k * np.pi) ** 2 + 5.0)
    exact = np.cos(omega * t)[None, :] * np.sin(k * np.pi * x)[:, None]
    assert rel_l2(f.data, exact) <= 1e-3


# --- oracle: Cole-Hopf quadrature for the advection-diffusion hump ----------

def cole_hopf_slice(x, t, delta):
    """Free-space solution with IC exp(-(x+2)^2) by direct quadrature."""
    y = np.linspace(-14.0, 14.0, 6001)
    # integral of the IC from 0 to y
    ic_int = 0.5 * np.sqrt(np.pi) * (erf(y + 2.0) - erf(2.0))
    log_k = -ic_int[None, :] / (2 * delta) - (x[:, None] - y[None, :]) ** 2 / (4 * delta * t)
    log_k -= log_k.max(axis=1, keepdims=True)
    k = np.exp(log_k)
    num = np.trapezoid(((x[:, None] - y[None, :]) / t) * k, y, axis=1)
    den = np.trapezoid(k, y, axis=1)
    return num / den


@pytest.mark.slow
def test_burgers_matches_cole_hopf(burgers_field):
    f = burgers_field
    x = f.axes[0].values
    t = f.axes[1].values
    cols = range(20, 201, 36)  # a spread of interior times
    num = np.stack([f.data[:, j] for j in cols], axis=1)
    ref = np.stack([cole_hopf_slice(x, t[j], 0.1) for j in cols], axis=1)
    assert rel_l2(num, ref) <= 1e-3


# --- the general re-solver ---------------------------------------------------

def _boundary_from_field(f):
    name = f.axes[0].name
    return {name: (f.data[0], f.data[-1])}


@pytest.mark.slow
def test_solve_rhs_self_consistency_burgers(burgers_field):
    spec = preset("burgers")
    out = solve_rhs(benchmark_rhs(spec), spec.axes, burgers_field.data[:, 0], refine=2)
    assert rel_l2(out.data, burgers_field.data) <= 1e-3


@pytest.mark.slow
def test_solve_rhs_self_consistency_kdv(kdv_field):
    spec = preset("kdv")
    out = solve_rhs(benchmark_rhs(spec), spec.axes, kdv_field.data[:, 0])
    assert rel_l2(out.data, kdv_field.data) <= 1e-3


@pytest.mark.slow
def test_solve_rhs_self_consistency_klein_gordon(klein_gordon_field):
    spec = preset("klein_gordon")
    out = solve_rhs(
        benchmark_rhs(spec), spec.axes, klein_gordon_field.data[:, 0],
        v0=np.zeros(201), boundary=_boundary_from_field(klein_gordon_field), refine=2,
    )
    assert rel_l2(out.data, klein_gordon_field.data) <= 1e-3


@pytest.mark.slow
def test_solve_rhs_self_consistency_convection_diffusion(convection_diffusion_field):
    spec = preset("convection_diffusion")
    out = solve_rhs(
        benchmark_rhs(spec), spec.axes, convection_diffusion_field.data[:, 0],
        boundary=_boundary_from_field(convection_diffusion_field), refine=2,
    )
    assert rel_l2(out.data, convection_diffusion_field.data) <= 1e-3


def test_solve_rhs_wrong_advection_stays_finite():
    axes = (AxisSpec("x", -4.0, 4.0, 128, periodic=True), AxisSpec("t", 0.0, 1.0, 11))
    x = axes[0].coords()
    u0 = np.exp(-(x**2))
    out = solve_rhs(RhsSpec(1, parse_expr("u_x")), axes, u0)
    assert np.all(np.isfinite(out.data))
    assert np.linalg.norm(out.data[:, -1] - u0) > 0.1  # it moved


def test_solve_rhs_quadratic_blowup():
    axes = (AxisSpec("x", 0.0, 1.0, 32, periodic=True), AxisSpec("t", 0.0, 1.0, 21))
    u0 = np.full(32, 100.0)  # du/dt = u**2 blows up at t = 1/100
    with pytest.raises(DivergenceError):
        solve_rhs(RhsSpec(1, parse_expr("u*u")), axes, u0)


def test_solve_rhs_second_order_requires_rate():
    spec = preset("klein_gordon")
    with pytest.raises(ValueError):
        solve_rhs(benchmark_rhs(spec), spec.axes, np.zeros(201) + 0.1)


# --- conservation and convergence -------------------------------------------

def _trapz_weights(n, h):
    w = np.full(n, h)
    w[0] = w[-1] = h / 2
    return w


def test_klein_gordon_energy_drift(klein_gordon_field):
    f = klein_gordon_field
    x, t = f.axes[0].values, f.axes[1].values
    u = f.data
    ut = np.gradient(u, t, axis=1)
    ux = np.gradient(u, x, axis=0)
    w = _trapz_weights(x.size, f.axes[0].spacing)
    energy = 0.5 * np.sum(w[:, None] * (ut**2 + 0.5 * ux**2 + 5.0 * u**2), axis=0)
    drift = np.abs(energy[1:-1] - energy[1]) / energy[1]
    assert drift.max() <= 0.01


@pytest.mark.slow
def test_wave2d_energy_drift():
    f = generate_benchmark(preset("wave2d"))
    x, y, t = (ax.values for ax in f.axes)
    u = f.data
    ut = np.gradient(u, t, axis=2)
    ux = np.gradient(u, x, axis=0)
    uy = np.gradient(u, y, axis=1)
    wx = _trapz_weights(x.size, f.axes[0].spacing)
    wy = _trapz_weights(y.size, f.axes[1].spacing)
    ww = wx[:, None, None] * wy[None, :, None]
    energy = np.sum(ww * (ut**2 + ux**2 + uy**2), axis=(0, 1))
    drift = np.abs(energy[1:-1] - energy[1]) / energy[1]
    assert drift.max() <= 0.01


def _mini_spec(name, **kw):
    axes = {
        "burgers": (AxisSpec("x", -8.0, 8.0, 128, periodic=True), AxisSpec("t", 0.0, 2.0, 11)),
        "kdv": (AxisSpec("x", -1.0, 1.0, 128, periodic=True), AxisSpec("t", 0.0, 0.4, 11)),
        "klein_gordon": (AxisSpec("x", -1.0, 1.0, 81), AxisSpec("t", 0.0, 1.0, 11)),
        "convection_diffusion": (AxisSpec("x", 0.0, 2.0, 101), AxisSpec("t", 0.0, 0.5, 11)),
        "chaffee_infante": (AxisSpec("x", 0.0, 3.0, 121), AxisSpec("t", 0.0, 0.25, 11)),
        "wave2d": (AxisSpec("x", 0.0, 1.0, 33), AxisSpec("y", 0.0, 1.0, 33), AxisSpec("t", 0.0, 0.5, 11)),
    }[name]
    return BenchmarkSpec(name, dict(kw), preset(name).ic, axes, refine=1)


@pytest.mark.slow
@pytest.mark.parametrize("name,params", [
    ("burgers", {"delta": 0.1}),
    ("kdv", {"dispersion": 0.0025}),
    ("klein_gordon", {"stiffness": 0.5, "mass": 5.0}),
    ("convection_diffusion", {"speed": 1.0, "nu": 0.25}),
    ("chaffee_infante", {}),
    ("wave2d", {"c": 1.0}),
])
def test_refinement_convergence(name, params):
    base = _mini_spec(name, **params)
    sols = {}
    for r in (1, 2, 4):
        spec = BenchmarkSpec(name, params, base.ic, base.axes, refine=r)
        sols[r] = generate_benchmark(spec).data
    ref = sols[4]
    e1 = np.linalg.norm(sols[1] - ref)
    e2 = np.linalg.norm(sols[2] - ref)
    assert e2 <= e1 / 2.0 or e2 < 1e-10


@pytest.mark.slow
@pytest.mark.parametrize("name", ["convection_diffusion", "klein_gordon", "burgers"])
def test_generate_truncation_level(name):
    spec = preset(name)
    coarse = generate_benchmark(spec)
    fine = generate_benchmark(BenchmarkSpec(spec.name, spec.params, spec.ic, spec.axes,
                                            refine=2 * spec.refine))
    assert rel_l2(coarse.data, fine.data) <= 1e-4
