"""Received-signal synthesis and delay-Doppler CIR extraction.

Every receive operation keeps the per-term decomposition (desired signal,
interference terms, noise) alive through the whole chain, so empirical
SINRs can be measured next to the closed forms instead of being recomputed
from formulas.  The heavy lifting happens as elementwise products in the
FT domain (correlation theorem); loop-oracle equivalence is covered by the
test suite on small grids.
"""

from dataclasses import dataclass

import numpy as np

from .channel import SensingChannelFT, CommChannel
from .errors import DimensionError
from .grid import GridConfig, ft_to_dd, periodic_xcorr_2d
from .precoding import PrecoderBank
from .waveform import CommSymbols, SensingWaveform

__all__ = [
    "UeRxDecomposition",
    "ApRxDecomposition",
    "ExtractedCir",
    "ue_receive",
    "ap_receive",
    "extract_cir",
]


def _cn(rng, shape, var):
    """Circularly-symmetric complex Gaussian with the given per-sample variance."""
    if var == 0.0:
        return np.zeros(shape, dtype=complex)
    s = np.sqrt(var / 2.0)
    return s * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


@dataclass
class UeRxDecomposition:
    """Per-UE received FT grids, split by origin; parts sum to the total."""

    desired: np.ndarray         # (Q, M, K)
    mui: np.ndarray             # (Q, M, K) other UEs' streams
    sensing_int: np.ndarray     # (Q, M, K)
    noise: np.ndarray           # (Q, M, K)

    @property
    def total(self) -> np.ndarray:
        return self.desired + self.mui + self.sensing_int + self.noise


@dataclass
class ApRxDecomposition:
    """Received FT grids at the Rx APs, the sensing part kept per Tx AP."""

    sens_by_tx: np.ndarray      # (n_rx, n_tx, L, M, K)
    comm_int: np.ndarray        # (n_rx, L, M, K)
    noise: np.ndarray           # (n_rx, L, M, K)
    rx_ids: list
    tx_ids: list

    @property
    def total(self) -> np.ndarray:
        return self.sens_by_tx.sum(axis=1) + self.comm_int + self.noise


@dataclass
class ExtractedCir:
    """DD-domain CIR for one (tx, rx) pair, decomposed term by term."""

    desired: np.ndarray         # (L, M, K): delay on axis 1, Doppler on axis 2
    int_sen: np.ndarray
    int_com: np.ndarray
    noise: np.ndarray
    tx_id: int
    rx_id: int

    @property
    def total(self) -> np.ndarray:
        return self.desired + self.int_sen + self.int_com + self.noise

    def zero_doppler(self) -> np.ndarray:
        """(L, M) slice at Doppler index p = 0."""
        return self.total[:, :, 0]


def ue_receive(channel: CommChannel, bank: PrecoderBank, symbols: CommSymbols,
               waveforms: list[SensingWaveform], eta: float, tx_power: float,
               noise_var: float, noise_seed=None) -> UeRxDecomposition:
    """Evaluate the UE-side superposition term by term."""
    g = channel.stacked()                                   # (M, NL, Q)
    q_cnt, (m, k) = symbols.n_ues, symbols.grids.shape[1:]
    if g.shape[2] != q_cnt:
        raise DimensionError("channel and symbol UE counts differ")
    amp = np.sqrt(tx_power)

    # e[m, q, q'] couples stream q' into UE q through the transpose channel
    e = np.einsum("mlq,mlp->mqp", g, bank.comm)
    streams = np.einsum("mqp,pmk->qpmk", e, symbols.grids)  # (Q, Q-streams, M, K)
    desired = amp * eta * np.einsum("qqmk->qmk", streams)
    mui = amp * eta * (streams.sum(axis=1) - np.diagonal(
        streams, axis1=0, axis2=1).transpose(2, 0, 1))

    ft = np.stack([w.ft_grid for w in waveforms])           # (n_tx, M, K)
    f = np.einsum("nqml,nl->qnm", channel.h, bank.sen)      # (Q, n_tx, M)
    sens = amp * (1.0 - eta) * np.einsum("qnm,nmk->qmk", f, ft)

    rng = np.random.default_rng(noise_seed)
    noise = _cn(rng, (q_cnt, m, k), noise_var)
    return UeRxDecomposition(desired=desired, mui=mui, sensing_int=sens,
                             noise=noise)


def ap_receive(channel: SensingChannelFT, bank: PrecoderBank,
               symbols: CommSymbols, waveforms: list[SensingWaveform],
               eta: float, tx_power: float, noise_var: float,
               noise_seed=None) -> ApRxDecomposition:
    """Evaluate the Rx-AP superposition, sensing echoes kept per Tx AP."""
    h = channel.h                                           # (n_tx, n_rx, M, L, L)
    n_tx, n_rx, m = h.shape[0], h.shape[1], h.shape[2]
    l_ant = h.shape[3]
    k = symbols.grids.shape[2]
    amp = np.sqrt(tx_power)

    ft = np.stack([w.ft_grid for w in waveforms])           # (n_tx, M, K)
    hv = np.einsum("nrmab,nb->nrma", h, bank.sen)           # (n_tx, n_rx, M, L)
    sens = amp * (1.0 - eta) * np.einsum("nrma,nmk->rnamk", hv, ft)

    w_ap = bank.comm_per_ap()                               # (n_tx, L, M, Q)
    u = np.einsum("nlmq,qmk->nlmk", w_ap, symbols.grids)    # per-AP comm signal
    comm = amp * eta * np.einsum("nrmab,nbmk->ramk", h, u)

    rng = np.random.default_rng(noise_seed)
    noise = _cn(rng, (n_rx, l_ant, m, k), noise_var)
    return ApRxDecomposition(sens_by_tx=sens, comm_int=comm, noise=noise,
                             rx_ids=list(channel.rx_ids),
                             tx_ids=list(channel.tx_ids))


def extract_cir(rx: ApRxDecomposition, rx_index: int, tx_index: int,
                waveforms: list[SensingWaveform],
                grid: GridConfig) -> ExtractedCir:
    """Matched-filter the DD-transformed Rx signal against one Tx waveform.

    Each decomposition term is transformed and correlated separately, so the
    extracted CIR stays split into desired / sensing-interference /
    communication-interference / noise parts.
    """
    ref = waveforms[tx_index].dd_grid
    if ref.shape != grid.shape:
        raise DimensionError("waveform grid does not match the resource grid")

    def mf(x):
        return periodic_xcorr_2d(ref, ft_to_dd(x, grid))

    own = rx.sens_by_tx[rx_index, tx_index]
    others = rx.sens_by_tx[rx_index].sum(axis=0) - own
    return ExtractedCir(
        desired=mf(own),
        int_sen=mf(others),
        int_com=mf(rx.comm_int[rx_index]),
        noise=mf(rx.noise[rx_index]),
        tx_id=rx.tx_ids[tx_index],
        rx_id=rx.rx_ids[rx_index],
    )
