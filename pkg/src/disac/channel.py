"""Communication, sensing and fictitious-ROI channel synthesis.

Sensing channels use the dyad ``a(theta_rx) a(theta_tx)^T``: the transmit
array couples through the transpose (matching the UE model ``h^T v``), and
the receive steering vector appears unconjugated on the left, which is what
coherent back-projection relies on.  Scattering amplitudes follow the
bistatic radar equation with an RCS-like per-target scale; the reflection
phase is a single per-target constant shared by every AP pair.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigurationError
from .grid import GridConfig
from .scenario import SPEED_OF_LIGHT, Scenario, roi_pixels, steering_vector

__all__ = [
    "CommChannel",
    "SensingChannelFT",
    "SensingChannelDD",
    "RoiChannel",
    "subcarrier_freqs",
    "build_comm_channel",
    "build_sensing_channel_ft",
    "build_sensing_channel_dd",
    "build_roi_channel",
    "target_amplitude",
]


@dataclass
class CommChannel:
    """AP -> UE channels h[n, q, m, :] for the APs listed in ``tx_ids``."""

    h: np.ndarray               # (n_tx, Q, M, L) complex
    tx_ids: list
    alphas: np.ndarray          # (n_tx, Q, C) per-path complex amplitudes
    delays: np.ndarray          # (n_tx, Q, C) per-path delays [s]

    @property
    def n_tx(self) -> int:
        return self.h.shape[0]

    @property
    def n_ues(self) -> int:
        return self.h.shape[1]

    def stacked(self) -> np.ndarray:
        """Composite channel G with shape (M, n_tx*L, Q)."""
        n_tx, q, m, l = self.h.shape
        return self.h.transpose(2, 0, 3, 1).reshape(m, n_tx * l, q)


@dataclass
class SensingChannelFT:
    """AP -> target -> AP channels H[i, j, m] as (L, L) matrices."""

    h: np.ndarray               # (n_tx, n_rx, M, L, L) complex
    tx_ids: list
    rx_ids: list
    betas: np.ndarray           # (n_tx, n_rx, U) complex scattering amplitudes
    delays: np.ndarray          # (n_tx, n_rx, U) bistatic delays [s]


@dataclass
class SensingChannelDD:
    """Delay-domain sensing channels, one (L, L) matrix per delay tap."""

    h: np.ndarray               # (n_tx, n_rx, M, L, L) complex, axis 2 = delay tap
    tx_ids: list
    rx_ids: list


@dataclass
class RoiChannel:
    """Frequency-flat fictitious LOS channel from each Tx AP to the ROI."""

    h: np.ndarray               # (n_tx, L) complex
    tx_ids: list

    def stacked(self) -> np.ndarray:
        return self.h.reshape(-1)


def subcarrier_freqs(scenario: Scenario) -> np.ndarray:
    """Physical subcarrier frequencies in array order.

    The band is centered on the carrier (subcarrier index runs over
    [-M/2, M/2-1]) and stored FFT-wrapped, so index arithmetic mod M matches
    the delay-domain transforms while keeping the spectrum symmetric about
    f0 -- which is what makes the carrier-phase compensation in the imaging
    stage exact for off-grid delays.
    """
    m = scenario.grid.n_subcarriers
    signed = np.fft.fftfreq(m, d=1.0 / m)                   # [0..M/2-1, -M/2..-1]
    return scenario.f0 + signed * scenario.grid.subcarrier_spacing


def _los_amplitude(wavelength: float, dist: np.ndarray) -> np.ndarray:
    return wavelength / (4.0 * np.pi * dist)


def target_amplitude(scenario: Scenario, tx_pos, rx_pos, target) -> complex:
    """Bistatic scattering amplitude lambda*sqrt(rcs)/((4pi)^1.5 * r_tx * r_rx)."""
    r1 = float(np.linalg.norm(target.position - np.asarray(tx_pos)))
    r2 = float(np.linalg.norm(np.asarray(rx_pos) - target.position))
    mag = scenario.wavelength * np.sqrt(target.rcs) / ((4.0 * np.pi) ** 1.5 * r1 * r2)
    return mag * np.exp(1j * target.phase)


def build_comm_channel(scenario: Scenario, clusters: int = 1,
                       rng=None, tx_ids=None) -> CommChannel:
    """Multipath AP->UE channel; path 0 is LOS, extra paths bounce off random
    scatterers in the deployment area, 6-12 dB below the LOS amplitude."""
    if clusters < 1:
        raise ConfigurationError("clusters must be >= 1")
    rng = np.random.default_rng(rng)
    tx_ids = list(range(scenario.n_aps)) if tx_ids is None else list(tx_ids)
    grid = scenario.grid
    freqs = subcarrier_freqs(scenario)                      # (M,)
    lam = scenario.wavelength

    n_tx, q_cnt = len(tx_ids), scenario.n_ues
    l_ant = scenario.aps[tx_ids[0]].n_antennas
    h = np.zeros((n_tx, q_cnt, grid.n_subcarriers, l_ant), dtype=complex)
    alphas = np.zeros((n_tx, q_cnt, clusters), dtype=complex)
    delays = np.zeros((n_tx, q_cnt, clusters))

    half = scenario.area_size / 2
    scatterers = rng.uniform(-half, half, size=(clusters - 1, 2))
    ue_phases = rng.uniform(0, 2 * np.pi, size=q_cnt)

    for i, n in enumerate(tx_ids):
        node = scenario.aps[n]
        for q, ue in enumerate(scenario.ues):
            r_los = float(np.linalg.norm(ue.position - node.position))
            a0 = _los_amplitude(lam, r_los) * np.exp(1j * ue_phases[q])
            alphas[i, q, 0] = a0
            delays[i, q, 0] = r_los / SPEED_OF_LIGHT
            paths = [(a0, delays[i, q, 0], steering_vector(node, ue.position))]
            for ci, s in enumerate(scatterers, start=1):
                att_db = rng.uniform(6.0, 12.0)
                phase = rng.uniform(0, 2 * np.pi)
                a_c = a0 * 10 ** (-att_db / 20.0) * np.exp(1j * phase)
                tau_c = (np.linalg.norm(s - node.position)
                         + np.linalg.norm(ue.position - s)) / SPEED_OF_LIGHT
                alphas[i, q, ci] = a_c
                delays[i, q, ci] = tau_c
                paths.append((a_c, tau_c, steering_vector(node, s)))
            for a_c, tau_c, steer in paths:
                h[i, q] += a_c * np.exp(-2j * np.pi * freqs * tau_c)[:, None] \
                    * steer[None, :]
    return CommChannel(h=h, tx_ids=tx_ids, alphas=alphas, delays=delays)


def build_sensing_channel_ft(scenario: Scenario, tx_ids, rx_ids) -> SensingChannelFT:
    """Sum of rank-one target returns per (tx, rx, subcarrier)."""
    if not scenario.targets:
        raise ConfigurationError("scenario has no targets")
    grid = scenario.grid
    freqs = subcarrier_freqs(scenario)
    l_ant = scenario.aps[tx_ids[0]].n_antennas
    n_tx, n_rx, u_cnt = len(tx_ids), len(rx_ids), len(scenario.targets)

    h = np.zeros((n_tx, n_rx, grid.n_subcarriers, l_ant, l_ant), dtype=complex)
    betas = np.zeros((n_tx, n_rx, u_cnt), dtype=complex)
    delays = np.zeros((n_tx, n_rx, u_cnt))
    for i, n in enumerate(tx_ids):
        tx = scenario.aps[n]
        for j, r in enumerate(rx_ids):
            rx = scenario.aps[r]
            for u, tgt in enumerate(scenario.targets):
                beta = target_amplitude(scenario, tx.position, rx.position, tgt)
                tau = (np.linalg.norm(tgt.position - tx.position)
                       + np.linalg.norm(rx.position - tgt.position)) / SPEED_OF_LIGHT
                betas[i, j, u] = beta
                delays[i, j, u] = tau
                a_tx = steering_vector(tx, tgt.position)
                a_rx = steering_vector(rx, tgt.position)
                dyad = np.outer(a_rx, a_tx)                 # a(theta_r) a(theta_n)^T
                phase = np.exp(-2j * np.pi * freqs * tau)   # (M,)
                h[i, j] += beta * phase[:, None, None] * dyad[None, :, :]
    return SensingChannelFT(h=h, tx_ids=list(tx_ids), rx_ids=list(rx_ids),
                            betas=betas, delays=delays)


def build_sensing_channel_dd(channel_ft: SensingChannelFT,
                             grid: GridConfig) -> SensingChannelDD:
    """Per-entry DFT along subcarriers with the delta_f prefactor:
    H_dd[l] = delta_f * sum_m H[m] exp(+j*2*pi*m*l/M)."""
    m = grid.n_subcarriers
    h_dd = grid.subcarrier_spacing * m * np.fft.ifft(channel_ft.h, axis=2)
    return SensingChannelDD(h=h_dd, tx_ids=channel_ft.tx_ids,
                            rx_ids=channel_ft.rx_ids)


def build_roi_channel(scenario: Scenario, tx_ids) -> RoiChannel:
    """Pixel-summed amplitude-weighted steering vectors toward the ROI."""
    pixels = roi_pixels(scenario.roi)
    lam = scenario.wavelength
    l_ant = scenario.aps[tx_ids[0]].n_antennas
    h = np.zeros((len(tx_ids), l_ant), dtype=complex)
    for i, n in enumerate(tx_ids):
        node = scenario.aps[n]
        dist = np.linalg.norm(pixels - node.position[None, :], axis=1)
        steer = steering_vector(node, pixels)               # (npix, L)
        h[i] = np.sum(_los_amplitude(lam, dist)[:, None] * steer, axis=0)
    return RoiChannel(h=h, tx_ids=list(tx_ids))
