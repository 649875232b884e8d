"""Space-frequency precoders and assembly of the transmitted grids.

Communication precoders are MR (conjugate of the composite channel) or
regularized MMSE, normalized per subcarrier so every UE stream leaves the
network with unit total power; the sensing precoder is the conjugate of the
stacked fictitious ROI channel with unit stacked norm, shared by all
subcarriers.  The transmitted grid superposes the two with amplitude
weights eta and (1 - eta).
"""

from dataclasses import dataclass

import numpy as np

from .channel import CommChannel, RoiChannel
from .errors import ConfigurationError, DimensionError
from .waveform import CommSymbols, SensingWaveform

__all__ = ["PrecoderBank", "TxGrid", "build_comm_precoder",
           "build_sensing_precoder", "assemble_tx"]

MODES = ("mr", "mmse")


@dataclass
class PrecoderBank:
    """Per-subcarrier communication precoders plus the flat sensing precoder."""

    comm: np.ndarray            # (M, n_tx*L, Q), unit-norm columns
    sen: np.ndarray             # (n_tx, L), unit stacked norm
    mode: str
    tx_ids: list
    n_antennas: int

    @property
    def n_tx(self) -> int:
        return len(self.tx_ids)

    def comm_per_ap(self) -> np.ndarray:
        """View (n_tx, L, M, Q) of the stacked communication precoder."""
        m, _, q = self.comm.shape
        return self.comm.reshape(m, self.n_tx, self.n_antennas, q).transpose(1, 2, 0, 3)


@dataclass
class TxGrid:
    """Per-AP transmitted FT grids s[n, antenna, m, k]."""

    s: np.ndarray               # (n_tx, L, M, K)
    tx_ids: list
    eta: float
    tx_power: float


def build_comm_precoder(channel: CommChannel, mode: str, tx_power: float,
                        noise_var: float) -> np.ndarray:
    """MR or MMSE precoder from the composite channel, unit power per stream."""
    if mode not in MODES:
        raise ConfigurationError(f"precoder mode must be one of {MODES}")
    g = channel.stacked()                       # (M, n_tx*L, Q)
    if np.any(np.linalg.norm(g, axis=1) == 0.0):
        raise ConfigurationError("composite channel has a zero column")
    if mode == "mr":
        w = np.conj(g)
    else:
        q = g.shape[2]
        gram = np.conj(g).transpose(0, 2, 1) @ g  # (M, Q, Q) = G^H G
        gram += (noise_var / tx_power) * np.eye(q)[None, :, :]
        w = np.conj(g) @ np.linalg.inv(gram)
    norms = np.linalg.norm(w, axis=1, keepdims=True)   # (M, 1, Q)
    return w / norms


def build_sensing_precoder(roi_channel: RoiChannel) -> np.ndarray:
    """Conjugate of the stacked ROI channel, normalized across the Tx set."""
    stacked = roi_channel.stacked()
    norm = np.linalg.norm(stacked)
    if norm == 0.0:
        raise ConfigurationError("ROI channel is identically zero")
    return np.conj(roi_channel.h) / norm


def make_precoder_bank(comm_channel: CommChannel, roi_channel: RoiChannel,
                       mode: str, tx_power: float, noise_var: float) -> PrecoderBank:
    if comm_channel.tx_ids != roi_channel.tx_ids:
        raise DimensionError("comm and ROI channels cover different Tx sets")
    l_ant = comm_channel.h.shape[3]
    return PrecoderBank(
        comm=build_comm_precoder(comm_channel, mode, tx_power, noise_var),
        sen=build_sensing_precoder(roi_channel),
        mode=mode,
        tx_ids=list(comm_channel.tx_ids),
        n_antennas=l_ant,
    )


def assemble_tx(bank: PrecoderBank, symbols: CommSymbols,
                waveforms: list[SensingWaveform], eta: float,
                tx_power: float) -> TxGrid:
    """Superpose precoded communication and sensing grids (weights eta, 1-eta)."""
    if not 0.0 <= eta <= 1.0:
        raise ConfigurationError(f"eta must lie in [0,1], got {eta}")
    if len(waveforms) != bank.n_tx:
        raise DimensionError(
            f"{len(waveforms)} waveforms for {bank.n_tx} Tx APs")
    m, _, q = bank.comm.shape
    k = symbols.grids.shape[2]
    if symbols.grids.shape != (q, m, k):
        raise DimensionError(
            f"symbol grids {symbols.grids.shape} do not match (Q={q}, M={m})")
    ft = np.stack([w.ft_grid for w in waveforms])          # (n_tx, M, K)
    if ft.shape[1] != m:
        raise DimensionError(f"waveform grid M={ft.shape[1]} mismatches precoder M={m}")

    amp = np.sqrt(tx_power)
    w_ap = bank.comm_per_ap()                              # (n_tx, L, M, Q)
    comm = np.einsum("nlmq,qmk->nlmk", w_ap, symbols.grids)
    sen = bank.sen[:, :, None, None] * ft[:, None, :, :]
    return TxGrid(s=amp * (eta * comm + (1.0 - eta) * sen),
                  tx_ids=list(bank.tx_ids), eta=eta, tx_power=tx_power)
