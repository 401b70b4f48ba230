import math

import numpy as np
import pytest
from scipy.integrate import solve_ivp

from collapse_diffusion.qmupl import (
    NotConvergedError, QmuplConfig, StepSizeError, WaveFunction, curvature_ratio, ensemble,
    evolve, free_step, gaussian_packet, observables, qmupl_step, recenter, settling_time,
    steady_state_packet, with_dt,
)
from collapse_diffusion.stochastic import RngStream


def width_ode_variance(D, m, hbar, a0, times):
    # psi ~ exp(-a x^2): da/dt = -2i (hbar/m) a^2 + 2 D / hbar^2, var = 1 / (4 Re a)
    def f(_, y):
        a = complex(y[0], y[1])
        d = -2j * hbar / m * a * a + 2 * D / hbar ** 2
        return [d.real, d.imag]
    sol = solve_ivp(f, (0, times[-1]), [a0, 0.0], t_eval=times, rtol=1e-11, atol=1e-13)
    return 1 / (4 * sol.y[0])


def test_config_derived_scales():
    cfg = QmuplConfig(D=1.0)
    assert cfg.sigma_inf == pytest.approx(8 ** -0.25)
    assert cfg.t_loc == 1.0
    assert QmuplConfig(D=4.0).t_loc == 0.5
    with pytest.raises(ValueError):
        QmuplConfig(n_grid=1000)
    with pytest.raises(ValueError):
        QmuplConfig(D=-1.0)


@pytest.mark.parametrize("D", [1.0, 4.0])
def test_width_follows_gaussian_ode(D):
    cfg = QmuplConfig(D=D)
    _, tr = evolve(cfg, RngStream(2, 0), t_max=3 * cfg.t_loc)
    var = width_ode_variance(D, 1.0, 1.0, 1 / (4 * 9 * cfg.sigma_inf ** 2), tr[:, 0])
    np.testing.assert_allclose(tr[:, 1], var, rtol=1e-5)


def test_settling_time_in_band():
    cfg = QmuplConfig()
    _, tr = evolve(cfg, RngStream(1, 0), t_max=4.0)
    ts = settling_time(tr, cfg.sigma_inf)
    assert cfg.t_loc / 3 <= ts <= 3 * cfg.t_loc


def test_settling_time_edge_cases():
    tr = np.array([[0.0, 1.0], [1.0, 2.0]])
    assert settling_time(tr, 1.0) == math.inf
    assert settling_time(np.array([[0.0, 1.0], [1.0, 1.01]]), 1.0) == 0.0


def test_steady_state_packet_is_stationary():
    cfg = QmuplConfig()
    psi = steady_state_packet(cfg)
    ob = observables(psi)
    assert ob.var_x == pytest.approx(cfg.sigma_inf ** 2, rel=1e-10)
    assert ob.curvature_ratio == pytest.approx(1.0, rel=1e-8)
    gen = RngStream(4, 0).generator()
    for dW in math.sqrt(cfg.dt) * gen.standard_normal(500):
        psi = recenter(qmupl_step(psi, cfg, dW))
    ob = observables(psi)
    assert ob.var_x == pytest.approx(cfg.sigma_inf ** 2, rel=1e-5)
    assert ob.curvature_ratio == pytest.approx(1.0, rel=1e-4)


def test_momentum_kick_matches_noise():
    # at the steady state d<p> = sqrt(2D) dW exactly in continuous time
    cfg = QmuplConfig()
    psi = steady_state_packet(cfg)
    dWs = math.sqrt(cfg.dt) * RngStream(3, 0).generator().standard_normal(2000)
    for dW in dWs:
        psi = recenter(qmupl_step(psi, cfg, dW))
    assert observables(psi).mean_p == pytest.approx(math.sqrt(2) * dWs.sum(), abs=0.02)


def test_free_spreading():
    cfg = QmuplConfig(D=0.0, dt=0.01)
    s0 = 1.0
    psi = gaussian_packet(cfg.n_grid, 60.0, s0)
    for _ in range(200):
        psi = free_step(psi, cfg)
    t = 2.0
    assert observables(psi).var_x == pytest.approx(s0 ** 2 + (t / (2 * s0)) ** 2, rel=1e-8)


def test_zero_noise_step_without_collapse_is_free():
    cfg = QmuplConfig(D=0.0, dt=0.01)
    psi = gaussian_packet(cfg.n_grid, 60.0, 1.0, momentum=0.5)
    a = qmupl_step(psi, cfg, 0.3)
    b = free_step(psi, cfg)
    np.testing.assert_allclose(a.amplitudes, b.amplitudes, atol=1e-12)


def test_large_step_rejected():
    cfg = QmuplConfig(dt=1.0)
    psi = gaussian_packet(cfg.n_grid, cfg.half_width(), 3 * cfg.sigma_inf)
    with pytest.raises(StepSizeError):
        qmupl_step(psi, cfg, 1.0)


def test_recenter_preserves_state():
    centred = gaussian_packet(1024, 10.0, 0.5)
    assert recenter(centred) is centred
    x = centred.x
    amp = np.exp(-(x + 4.0) ** 2 / (4 * 0.25)).astype(complex)
    moved = WaveFunction(amp, centred.x_min, centred.dx).normalized()
    a = observables(moved)
    assert a.mean_x == pytest.approx(-4.0, abs=1e-9)
    r = recenter(moved)
    b = observables(r)
    assert b.mean_x == pytest.approx(a.mean_x, abs=1e-9)
    assert b.var_x == pytest.approx(a.var_x, rel=1e-9)
    assert abs(b.mean_x - (r.x_min + 10.0)) < r.dx


def test_curvature_ratio_of_real_packet_is_zero():
    psi = gaussian_packet(1024, 10.0, 1.0)
    assert curvature_ratio(psi) == pytest.approx(0.0, abs=1e-10)


def test_until_converged_and_failure():
    cfg = QmuplConfig()
    psi, tr = evolve(cfg, RngStream(5, 0), until_converged=True)
    assert tr[-1, 1] == pytest.approx(cfg.sigma_inf ** 2, rel=0.05)
    with pytest.raises(NotConvergedError) as exc:
        small = QmuplConfig(dt=2e-3, n_grid=512)
        evolve(small, RngStream(5, 0), until_converged=True, rel_tol=0.0,
               psi0=steady_state_packet(small))
    assert exc.value.trace.shape[1] == 5


def test_ensemble_reproducible_and_distinct():
    cfg = QmuplConfig(n_grid=512)
    a = ensemble(cfg, [1, 2], t_max=0.5)
    b = ensemble(cfg, [1, 2], t_max=0.5)
    np.testing.assert_array_equal(a[0], b[0])
    assert not np.allclose(a[0][:, 3], a[1][:, 3])


def test_with_dt_copies():
    cfg = QmuplConfig()
    assert with_dt(cfg, 5e-4).dt == 5e-4 and cfg.dt == 1e-3
