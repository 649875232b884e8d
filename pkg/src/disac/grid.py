"""Frequency-time / delay-Doppler resource grids and the transform pair between them.

Conventions used everywhere in the package:

* Grids are complex arrays with the subcarrier index ``m`` on axis -2
  (natural FFT order, 0..M-1) and the OFDM-symbol index ``k`` on axis -1.
* The delay axis ``l`` (0..M-1) replaces ``m`` and the Doppler axis ``p``
  (FFT order; use :func:`doppler_axis` for the centered view) replaces ``k``
  after the transform.
* The FT->DD map evaluates ``sum_{m,k} z[m,k] e^{+j2*pi*m*l/M} e^{-j2*pi*k*p/K}``
  and the DD->FT map its conjugate-exponent dual; both carry a ``1/sqrt(M*K)``
  factor so the pair is unitary (round trip is the identity and energy is
  preserved exactly).  Correlations are *not* normalized, so the
  autocorrelation peak of a grid equals its total energy.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError, DimensionError

__all__ = [
    "GridConfig",
    "make_grid",
    "ft_to_dd",
    "dd_to_ft",
    "periodic_xcorr_2d",
    "periodic_xcorr_1d",
    "doppler_axis",
    "round_half_away",
]


@dataclass(frozen=True)
class GridConfig:
    """Fixed parameters of the FT grid and its delay-Doppler dual."""

    n_subcarriers: int      # M
    n_symbols: int          # K
    subcarrier_spacing: float   # delta_f  [Hz]
    symbol_duration: float      # T, includes the cyclic prefix  [s]
    bandwidth: float            # B = M * delta_f  [Hz]
    delay_res: float            # delta_tau = 1/B  [s]
    doppler_res: float          # delta_nu = 1/(K*T)  [Hz]
    cp_fraction: float = 0.0

    @property
    def shape(self) -> tuple[int, int]:
        return (self.n_subcarriers, self.n_symbols)

    @property
    def burst_duration(self) -> float:
        return self.n_symbols * self.symbol_duration


def make_grid(n_subcarriers: int, n_symbols: int, bandwidth: float,
              cp_fraction: float = 0.0) -> GridConfig:
    """Build a grid from (M, K, B); spacing, durations and resolutions follow."""
    if n_subcarriers <= 0 or n_symbols <= 0:
        raise ConfigurationError(
            f"grid sizes must be positive, got M={n_subcarriers}, K={n_symbols}")
    if bandwidth <= 0:
        raise ConfigurationError(f"bandwidth must be positive, got {bandwidth}")
    if not 0.0 <= cp_fraction < 1.0:
        raise ConfigurationError(f"cp_fraction must be in [0, 1), got {cp_fraction}")
    delta_f = bandwidth / n_subcarriers
    symbol_t = (1.0 + cp_fraction) / delta_f
    return GridConfig(
        n_subcarriers=n_subcarriers,
        n_symbols=n_symbols,
        subcarrier_spacing=delta_f,
        symbol_duration=symbol_t,
        bandwidth=bandwidth,
        delay_res=1.0 / bandwidth,
        doppler_res=1.0 / (n_symbols * symbol_t),
        cp_fraction=cp_fraction,
    )


def _check_shape(x: np.ndarray, grid: GridConfig | None) -> None:
    if x.ndim < 2:
        raise DimensionError(f"expected a 2D grid on the last axes, got shape {x.shape}")
    if grid is not None and x.shape[-2:] != grid.shape:
        raise DimensionError(f"grid shape {x.shape[-2:]} does not match {grid.shape}")


def ft_to_dd(signal: np.ndarray, grid: GridConfig | None = None) -> np.ndarray:
    """Map an FT grid to the DD domain (unitary)."""
    _check_shape(signal, grid)
    m, k = signal.shape[-2:]
    out = np.fft.fft(np.fft.ifft(signal, axis=-2), axis=-1)
    return out * np.sqrt(m / k)


def dd_to_ft(signal: np.ndarray, grid: GridConfig | None = None) -> np.ndarray:
    """Map a DD grid back to the FT domain; exact inverse of :func:`ft_to_dd`."""
    _check_shape(signal, grid)
    m, k = signal.shape[-2:]
    out = np.fft.fft(np.fft.ifft(signal, axis=-1), axis=-2)
    return out * np.sqrt(k / m)


def periodic_xcorr_2d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Periodic 2D cross-correlation ``r[d1,d2] = sum conj(a[j1,j2]) b[j1+d1, j2+d2]``.

    Indices wrap modulo the grid size.  ``a`` is the (conjugated) reference;
    ``periodic_xcorr_2d(a, a)[0, 0]`` equals the total energy of ``a``.
    Broadcasts over leading axes of ``b``.
    """
    if a.shape[-2:] != b.shape[-2:]:
        raise DimensionError(f"shape mismatch: {a.shape} vs {b.shape}")
    fa = np.fft.fft2(a)
    fb = np.fft.fft2(b)
    return np.fft.ifft2(np.conj(fa) * fb)


def periodic_xcorr_1d(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    """1D analogue of :func:`periodic_xcorr_2d` along the last axis."""
    if a.shape[-1] != b.shape[-1]:
        raise DimensionError(f"length mismatch: {a.shape} vs {b.shape}")
    return np.fft.ifft(np.conj(np.fft.fft(a)) * np.fft.fft(b))


def doppler_axis(grid: GridConfig) -> np.ndarray:
    """Centered Doppler indices p in [-K/2, K/2-1] matching ``fftshift`` order."""
    k = grid.n_symbols
    return np.fft.fftshift(np.fft.fftfreq(k, d=1.0 / k)).astype(int)


def round_half_away(x):
    """Round half away from zero (the rounding used for delay-bin lookup)."""
    x = np.asarray(x)
    return (np.sign(x) * np.floor(np.abs(x) + 0.5)).astype(int)
