import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from scipy.stats import poisson

from collapse_diffusion.stochastic import (
    NonFiniteStateError, RngStream, SdePath, brownian_increments, euler_maruyama,
    full_truncation_step, gamma_poisson_ncx2_sample, parallel_map,
)


def test_increment_moments():
    n, dt = 1_000_000, 0.01
    dW = brownian_increments(RngStream(7, 0), n, dt)
    assert abs(dW.mean()) < 4 * math.sqrt(dt / n)
    assert abs(dW.var() / dt - 1) < 0.01


def test_streams_reproducible_and_distinct():
    a = brownian_increments(RngStream(3, 5), 100, 1.0)
    b = brownian_increments(RngStream(3, 5), 100, 1.0)
    c = brownian_increments(RngStream(3, 6), 100, 1.0)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)


def test_high_stream_ids_do_not_collide():
    base = (1 << 63) + 10
    draws = [RngStream(3, base + i).generator().standard_normal() for i in range(4)]
    assert len(set(draws)) == 4
    top = RngStream(2 ** 64 - 1, 2 ** 64 - 1).generator().standard_normal()
    assert np.isfinite(top)


def test_stream_bounds():
    with pytest.raises(ValueError):
        RngStream(-1, 0)
    with pytest.raises(ValueError):
        RngStream(0, 1 << 64)


def test_independent_streams_uncorrelated():
    x = brownian_increments(RngStream(1, 0), 200_000, 1.0)
    y = brownian_increments(RngStream(1, 1), 200_000, 1.0)
    assert abs(np.corrcoef(x, y)[0, 1]) < 4 / math.sqrt(200_000)


def test_em_constant_and_linear_paths():
    zero = lambda x, t: 0.0 * x
    p = euler_maruyama(zero, zero, 2.5, 0.1, 50, RngStream(0, 0))
    assert np.all(p.values == 2.5)
    p = euler_maruyama(lambda x, t: 0 * x + 0.3, zero, 1.0, 0.1, 50, RngStream(0, 0))
    np.testing.assert_allclose(p.values, 1.0 + 0.3 * p.times, rtol=1e-12)


def test_em_ornstein_uhlenbeck_variance():
    # dX = -k X dt + s dW from 0: Var X_t = s^2 (1 - e^{-2kt}) / (2k)
    k, s, dt, n = 2.0, 0.7, 1e-3, 500
    t = dt * n
    finals = np.array([
        euler_maruyama(lambda x, _: -k * x, lambda x, _: s + 0 * x, 0.0, dt, n,
                       RngStream(11, i)).values[-1]
        for i in range(4000)
    ])
    expected = s ** 2 * (1 - math.exp(-2 * k * t)) / (2 * k)
    se = expected * math.sqrt(2 / len(finals))
    assert abs(finals.var(ddof=1) - expected) < 4 * se


def test_em_nonfinite_aborts_with_step():
    with pytest.raises(NonFiniteStateError) as exc, np.errstate(over="ignore"):
        euler_maruyama(lambda x, t: x * 1e200, lambda x, t: 0 * x, 1.0, 1.0, 10, RngStream())
    assert exc.value.step >= 1


def test_sdepath_validation():
    with pytest.raises(ValueError):
        SdePath([0.0, 0.0], [1.0, 2.0])
    with pytest.raises(ValueError):
        SdePath([0.0, 1.0], [1.0])


class TestFullTruncation:
    def test_zero_state_gives_drift(self):
        assert full_truncation_step(0.0, 1.5, 0.3, 2.0, 0.01, -5.0) == pytest.approx(0.015)

    def test_clips_large_negative_noise(self):
        x, a, k, s, dt, dW = 1e-4, 0.1, 0.0, 1.0, 1e-3, -3.0
        raw = x + a * dt + s * math.sqrt(x) * dW
        out = full_truncation_step(x, a, k, s, dt, dW)
        assert raw < 0 and out >= raw and out == 0.0

    @given(st.floats(-10, 10), st.floats(0, 5), st.floats(0, 5), st.floats(0, 3),
           st.floats(1e-6, 1.0), st.floats(-20, 20))
    def test_never_negative_or_nan(self, x, a, k, s, dt, dW):
        out = full_truncation_step(x, a, k, s, dt, dW)
        assert out >= 0 and not math.isnan(out)


class TestNcx2Sampler:
    n = 400_000

    def _moments_oracle(self, df, nc):
        # mixture mean / variance by direct summation over the Poisson weights
        k = np.arange(0, 400)
        w = poisson.pmf(k, nc / 2)
        shape = df / 2 + k
        mean = np.sum(w * 2 * shape)
        second = np.sum(w * (4 * shape + 4 * shape ** 2))
        return mean, second - mean ** 2

    @pytest.mark.parametrize("nc", [0.0, 3.0, 40.0])
    def test_moments(self, nc):
        x = gamma_poisson_ncx2_sample(6, np.full(self.n, nc), RngStream(5, 1))
        mean, var = self._moments_oracle(6, nc)
        assert mean == pytest.approx(6 + nc, rel=1e-12)
        assert var == pytest.approx(12 + 4 * nc, rel=1e-12)
        assert abs(x.mean() - mean) < 4 * math.sqrt(var / self.n)
        assert abs(x.var() - var) < 4 * var * math.sqrt(2.5 / self.n) * 2

    def test_rejects_negative_noncentrality(self):
        with pytest.raises(ValueError):
            gamma_poisson_ncx2_sample(6, -1.0, RngStream())


def test_parallel_map_independent_of_threads(monkeypatch):
    fn = lambda i: float(RngStream(9, i).generator().standard_normal())
    monkeypatch.setenv("COLLAPSE_DIFFUSION_THREADS", "1")
    a = parallel_map(fn, range(8))
    monkeypatch.setenv("COLLAPSE_DIFFUSION_THREADS", "4")
    b = parallel_map(fn, range(8))
    assert a == b
