import numpy as np
import pytest

from disac.errors import ConfigurationError, DimensionError
from disac.grid import (
    dd_to_ft,
    doppler_axis,
    ft_to_dd,
    make_grid,
    periodic_xcorr_2d,
    round_half_away,
)


def ft_to_dd_oracle(z):
    """Direct double-sum evaluation of the FT->DD map (unitary scaling)."""
    m, k = z.shape
    out = np.zeros((m, k), dtype=complex)
    for ell in range(m):
        for p in range(k):
            acc = 0.0 + 0.0j
            for mm in range(m):
                for kk in range(k):
                    acc += z[mm, kk] * np.exp(2j * np.pi * mm * ell / m) \
                        * np.exp(-2j * np.pi * kk * p / k)
            out[ell, p] = acc
    return out / np.sqrt(m * k)


def xcorr_2d_oracle(a, b):
    """Quadruple-loop periodic cross-correlation."""
    n, m = a.shape
    out = np.zeros((n, m), dtype=complex)
    for d1 in range(n):
        for d2 in range(m):
            acc = 0.0 + 0.0j
            for j1 in range(n):
                for j2 in range(m):
                    acc += np.conj(a[j1, j2]) * b[(j1 + d1) % n, (j2 + d2) % m]
            out[d1, d2] = acc
    return out


def test_make_grid_basic():
    g = make_grid(128, 1, 100e6)
    assert g.subcarrier_spacing == pytest.approx(781.25e3)
    assert g.delay_res == pytest.approx(10e-9)


def test_make_grid_doppler_res():
    g = make_grid(512, 4, 100e6)
    # T = 1/delta_f = 5.12 us, delta_nu = 1/(4*T)
    assert g.symbol_duration == pytest.approx(5.12e-6)
    assert g.doppler_res == pytest.approx(1.0 / (4 * 5.12e-6), rel=1e-12)


def test_make_grid_large_m():
    g = make_grid(4096, 1, 100e6)
    assert g.subcarrier_spacing == pytest.approx(24414.0625)


def test_make_grid_rejects_bad_input():
    with pytest.raises(ConfigurationError):
        make_grid(0, 4, 1e8)
    with pytest.raises(ConfigurationError):
        make_grid(16, -1, 1e8)
    with pytest.raises(ConfigurationError):
        make_grid(16, 4, 0.0)
    with pytest.raises(ConfigurationError):
        make_grid(16, 4, 1e8, cp_fraction=1.0)


def test_cp_fraction_stretches_symbol():
    g = make_grid(128, 4, 100e6, cp_fraction=0.07)
    assert g.symbol_duration == pytest.approx(1.07 / g.subcarrier_spacing)
    assert g.doppler_res == pytest.approx(1.0 / (4 * g.symbol_duration))


def test_ft_to_dd_zeros_and_impulse():
    g = make_grid(8, 4, 1e8)
    z = np.zeros(g.shape, dtype=complex)
    assert np.all(ft_to_dd(z, g) == 0)
    z[0, 0] = 1.0
    out = ft_to_dd(z, g)
    # impulse spreads to a constant grid under the unitary map
    assert np.allclose(out, 1.0 / np.sqrt(8 * 4))


def test_ft_to_dd_matches_double_sum_oracle():
    rng = np.random.default_rng(7)
    z = rng.normal(size=(8, 4)) + 1j * rng.normal(size=(8, 4))
    assert np.allclose(ft_to_dd(z), ft_to_dd_oracle(z), atol=1e-12)


def test_dd_to_ft_single_impulse_is_exponential():
    m, k = 8, 4
    l0, p0 = 3, 1
    xdd = np.zeros((m, k), dtype=complex)
    xdd[l0, p0] = 1.0
    out = dd_to_ft(xdd)
    mm, kk = np.meshgrid(np.arange(m), np.arange(k), indexing="ij")
    expect = np.exp(-2j * np.pi * mm * l0 / m) * np.exp(2j * np.pi * kk * p0 / k)
    assert np.allclose(out, expect / np.sqrt(m * k))


def test_round_trip_identity():
    rng = np.random.default_rng(3)
    for shape in [(8, 4), (16, 1), (32, 8)]:
        x = rng.normal(size=shape) + 1j * rng.normal(size=shape)
        assert np.allclose(ft_to_dd(dd_to_ft(x)), x, rtol=0, atol=1e-9 * np.abs(x).max())
        assert np.allclose(dd_to_ft(ft_to_dd(x)), x, rtol=0, atol=1e-9 * np.abs(x).max())


def test_transform_preserves_energy():
    rng = np.random.default_rng(11)
    x = rng.normal(size=(16, 4)) + 1j * rng.normal(size=(16, 4))
    e_ft = np.sum(np.abs(x) ** 2)
    e_dd = np.sum(np.abs(ft_to_dd(x)) ** 2)
    assert e_dd == pytest.approx(e_ft, rel=1e-12)


def test_shape_mismatch_raises():
    g = make_grid(8, 4, 1e8)
    with pytest.raises(DimensionError):
        ft_to_dd(np.zeros((4, 4), dtype=complex), g)
    with pytest.raises(DimensionError):
        periodic_xcorr_2d(np.zeros((4, 4)), np.zeros((4, 2)))


def test_xcorr_impulse():
    a = np.zeros((4, 4), dtype=complex)
    a[0, 0] = 1.0
    out = periodic_xcorr_2d(a, a)
    expect = np.zeros((4, 4), dtype=complex)
    expect[0, 0] = 1.0
    assert np.allclose(out, expect, atol=1e-14)


def test_xcorr_zero_lag_is_energy():
    rng = np.random.default_rng(5)
    m, k = 16, 4
    a = np.exp(1j * rng.uniform(0, 2 * np.pi, size=(m, k)))  # unit modulus
    out = periodic_xcorr_2d(a, a)
    assert out[0, 0] == pytest.approx(m * k, abs=1e-10)
    assert abs(out[0, 0].imag) < 1e-10


def test_xcorr_matches_loop_oracle():
    rng = np.random.default_rng(9)
    a = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    b = rng.normal(size=(4, 4)) + 1j * rng.normal(size=(4, 4))
    assert np.allclose(periodic_xcorr_2d(a, b), xcorr_2d_oracle(a, b), atol=1e-12)


def test_doppler_axis_range():
    g = make_grid(8, 4, 1e8)
    assert doppler_axis(g).tolist() == [-2, -1, 0, 1]


def test_round_half_away():
    assert round_half_away(0.5) == 1
    assert round_half_away(1.5) == 2
    assert round_half_away(2.5) == 3
    assert round_half_away(-0.5) == -1
    assert round_half_away(np.array([0.4, 0.6, -1.5])).tolist() == [0, 1, -2]
