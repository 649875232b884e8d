"""Spectral efficiency, sensing SINR (closed-form and empirical), image entropy.

The closed forms mirror the structure of the system-level SINR expressions
with the exact precoding gains of the simulated chain inserted, so they can
be validated against the measured decompositions instead of only bounding
them.  The D-MIMO and D-RN bounds are the matched-filter limits
``P * ||g_q[m]||^2 / sigma_w^2`` and ``P * M * K * |beta|^2 * L / sigma_n^2``.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .channel import CommChannel, SensingChannelFT
from .errors import UndefinedEntropyError
from .grid import GridConfig, round_half_away
from .imaging import Image
from .precoding import PrecoderBank
from .receive import ExtractedCir, UeRxDecomposition
from .scenario import Scenario, bistatic_delay, steering_vector

__all__ = [
    "entropy",
    "comm_sinr_analytic",
    "spectral_efficiency",
    "se_from_realizations",
    "dmimo_bound_sinr",
    "dmimo_bound_se",
    "empirical_sensing_sinr",
    "closed_form_sensing_sinr",
    "drn_bound_sinr",
    "MetricReport",
]


def entropy(image) -> float:
    """Shannon entropy (bits) of the normalized intensity map."""
    pixels = image.pixels if isinstance(image, Image) else np.asarray(image)
    inten = np.abs(pixels.ravel()) ** 2
    total = inten.sum()
    if total == 0.0:
        raise UndefinedEntropyError("entropy of an identically-zero image")
    p = inten / total
    p = p[p > 0.0]
    return float(-np.sum(p * np.log2(p)))


def comm_sinr_analytic(channel: CommChannel, bank: PrecoderBank, waveforms,
                       eta: float, tx_power: float,
                       noise_var: float) -> np.ndarray:
    """Per-bin communication SINR (Q, M, K) with symbol ensembles averaged out.

    Desired and MUI powers are exact expectations over unit-power QAM; the
    sensing interference is deterministic given the waveforms.
    """
    g = channel.stacked()                                   # (M, NL, Q)
    e = np.einsum("mlq,mlp->mqp", g, bank.comm)             # (M, Q, Qs)
    p_eta = tx_power * eta ** 2
    des = p_eta * np.abs(np.einsum("mqq->mq", e)) ** 2      # (M, Q)
    mui = p_eta * (np.sum(np.abs(e) ** 2, axis=2)
                   - np.abs(np.einsum("mqq->mq", e)) ** 2)
    ft = np.stack([w.ft_grid for w in waveforms])
    f = np.einsum("nqml,nl->qnm", channel.h, bank.sen)
    sens_amp = np.einsum("qnm,nmk->qmk", f, ft)
    sens = tx_power * (1.0 - eta) ** 2 * np.abs(sens_amp) ** 2
    num = des.T[:, :, None]                                 # (Q, M, 1)
    den = mui.T[:, :, None] + sens + noise_var
    return num / den


def spectral_efficiency(channel: CommChannel, bank: PrecoderBank, waveforms,
                        eta: float, tx_power: float,
                        noise_var: float) -> np.ndarray:
    """Per-UE spectral efficiency (bits/s/Hz), averaged over the burst."""
    sinr = comm_sinr_analytic(channel, bank, waveforms, eta, tx_power, noise_var)
    return np.mean(np.log2(1.0 + sinr), axis=(1, 2))


def se_from_realizations(decomps: list[UeRxDecomposition],
                         noise_var: float) -> np.ndarray:
    """Empirical SE from measured per-bin powers over symbol realizations."""
    des = np.mean([np.abs(d.desired) ** 2 for d in decomps], axis=0)
    mui = np.mean([np.abs(d.mui) ** 2 for d in decomps], axis=0)
    sens = np.mean([np.abs(d.sensing_int) ** 2 for d in decomps], axis=0)
    sinr = des / (mui + sens + noise_var)
    return np.mean(np.log2(1.0 + sinr), axis=(1, 2))


def dmimo_bound_sinr(channel: CommChannel, tx_power: float,
                     noise_var: float) -> np.ndarray:
    """Matched-filter SNR bound P*||g_q[m]||^2 / sigma^2, shape (Q, M)."""
    g = channel.stacked()
    return tx_power * np.sum(np.abs(g) ** 2, axis=1).T / noise_var


def dmimo_bound_se(channel: CommChannel, tx_power: float,
                   noise_var: float) -> np.ndarray:
    """Per-UE SE of the all-Tx, interference-free benchmark."""
    snr = dmimo_bound_sinr(channel, tx_power, noise_var)
    return np.mean(np.log2(1.0 + snr), axis=1)


def _combined_power(cir_part: np.ndarray, steer: np.ndarray, tap: int) -> float:
    y = np.vdot(steer, cir_part[:, tap, 0])
    return float(np.abs(y) ** 2)


def empirical_sensing_sinr(cirs: list[ExtractedCir], scenario: Scenario,
                           tx_id: int, rx_id: int,
                           target_index: int = 0) -> float:
    """SINR from the decomposed CIR at the target's peak tap.

    ``cirs`` holds extractions of the same pair for one or more symbol
    realizations; communication interference is averaged across them, the
    noise floor enters analytically as L*M*K*sigma_n^2.
    """
    tgt = scenario.targets[target_index]
    tx, rx = scenario.aps[tx_id], scenario.aps[rx_id]
    grid = scenario.grid
    tau = bistatic_delay(tx, rx, tgt.position)
    tap = int(round_half_away(tau / grid.delay_res))
    steer = steering_vector(rx, tgt.position)
    l_ant = steer.size
    mk = grid.n_subcarriers * grid.n_symbols

    sig = _combined_power(cirs[0].desired, steer, tap)
    int_sen = _combined_power(cirs[0].int_sen, steer, tap)
    int_com = float(np.mean([_combined_power(c.int_com, steer, tap)
                             for c in cirs]))
    noise = l_ant * mk * scenario.noise_var
    return sig / (int_sen + int_com + noise)


def closed_form_sensing_sinr(scenario: Scenario, sens: SensingChannelFT,
                             bank: PrecoderBank, waveforms, tx_index: int,
                             rx_index: int, eta: float,
                             target_index: int = 0) -> float:
    """Single-target SINR approximation with the chain's exact gains.

    Numerator: P (1-eta)^2 (MK)^2 |beta|^2 |a_tx^T v_sen|^2 L^2.  Denominator:
    residual cross-correlation leakage of the other sensing waveforms, the
    communication streams scattered off the target, and L*M*K*sigma_n^2.
    """
    sc = scenario
    grid = sc.grid
    m, k = grid.shape
    mk = m * k
    tgt = sc.targets[target_index]
    p = sc.tx_power_w
    tx_ids = sens.tx_ids
    rx_id = sens.rx_ids[rx_index]
    l_ant = bank.n_antennas

    gains = np.empty(len(tx_ids))
    for i, n in enumerate(tx_ids):
        a_tx = steering_vector(sc.aps[n], tgt.position)
        gains[i] = np.abs(a_tx @ bank.sen[i]) ** 2
    betas = np.abs(sens.betas[:, rx_index, target_index]) ** 2      # (n_tx,)
    taps = round_half_away(sens.delays[:, rx_index, target_index]
                           / grid.delay_res)

    sig = p * (1 - eta) ** 2 * mk ** 2 * betas[tx_index] \
        * gains[tx_index] * l_ant ** 2

    ref = waveforms[tx_index]
    int_sen = 0.0
    for i in range(len(tx_ids)):
        if i == tx_index:
            continue
        lag = int(taps[i] - taps[tx_index]) % m
        rho = np.vdot(ref.delay_seq, np.roll(waveforms[i].delay_seq, -lag))
        int_sen += p * (1 - eta) ** 2 * betas[i] * gains[i] \
            * np.abs(rho) ** 2 * k ** 2 * l_ant ** 2

    # communication streams reach the Rx AP only via the target
    ref_tau_ft = np.abs(np.fft.fft(ref.delay_seq) / np.sqrt(m)) ** 2   # (M,)
    int_com = 0.0
    for i, n in enumerate(tx_ids):
        a_tx = steering_vector(sc.aps[n], tgt.position)
        w_ap = bank.comm_per_ap()[i]                    # (L, M, Q)
        f = np.einsum("l,lmq->mq", a_tx, w_ap)          # (M, Q)
        int_com += p * eta ** 2 * betas[i] * l_ant ** 2 * k \
            * float(np.sum(ref_tau_ft[:, None] * np.abs(f) ** 2))

    noise = l_ant * mk * sc.noise_var
    return float(sig / (int_sen + int_com + noise))


def drn_bound_sinr(scenario: Scenario, beta: complex) -> float:
    """Full-duplex sensing-only SNR bound P*M*K*|beta|^2*L / sigma_n^2."""
    grid = scenario.grid
    mk = grid.n_subcarriers * grid.n_symbols
    l_ant = scenario.aps[0].n_antennas
    return float(scenario.tx_power_w * mk * np.abs(beta) ** 2 * l_ant
                 / scenario.noise_var)


@dataclass
class MetricReport:
    """One evaluation point worth of metrics, JSON-serializable."""

    se_per_ue: list                      # bits/s/Hz
    sinr_com_mean_db: list               # per UE, dB
    sinr_sen_db: dict                    # "(n,r)" -> dB
    sinr_sen_avg_db: float
    entropy_bits: float | None
    se_dmimo_bound: list                 # bits/s/Hz per UE
    snr_drn_bound_db: dict = field(default_factory=dict)

    UNITS = {
        "se_per_ue": "bits/s/Hz",
        "sinr_com_mean_db": "dB",
        "sinr_sen_db": "dB",
        "sinr_sen_avg_db": "dB",
        "entropy_bits": "bits",
        "se_dmimo_bound": "bits/s/Hz",
        "snr_drn_bound_db": "dB",
    }

    def to_json(self, indent=2) -> str:
        payload = {k: getattr(self, k) for k in self.UNITS}
        payload["_units"] = self.UNITS
        return json.dumps(payload, indent=indent)

    @classmethod
    def from_json(cls, text: str) -> "MetricReport":
        data = json.loads(text)
        data.pop("_units", None)
        return cls(**data)
