"""Sensing-waveform design and communication symbol generation.

The per-AP sensing waveforms are separable delay-Doppler grids
``X[l, p] = x_tau[l] * x_nu[p]``.  Delay sequences are designed iteratively:
each new sequence is drawn from the null space of the stacked periodic
correlation rows of all previously designed sequences, restricted to the
lag set over which orthogonality must hold.  That lag set contains the
bistatic ROI delay taps of every AP pair and, in addition, every pairwise
difference of such taps observed at a common receiver: after matched
filtering, an interfering echo lands at the *relative* lag between its own
bistatic delay and the tap being read, so those are the lags that must
vanish for the pair images to stay clean.

Doppler sequences use a single shared Zadoff-Chu root: with static targets
only delay-domain orthogonality is required.
"""

import json
from dataclasses import dataclass, field
from math import gcd

import numpy as np
from scipy.linalg import circulant, null_space

from .errors import (
    ConfigurationError,
    FeasibilityError,
    GeometryError,
    RankError,
)
from .grid import dd_to_ft, periodic_xcorr_1d, round_half_away
from .scenario import Scenario, roi_delay_extrema

__all__ = [
    "DelaySupport",
    "SensingWaveform",
    "CommSymbols",
    "delay_support",
    "periodic_correlation_matrix",
    "design_delay_sequences",
    "doppler_sequence",
    "make_waveform_set",
    "pseudorandom_delay_sequences",
    "qam_symbols",
    "max_cross_correlation",
    "save_waveform_set",
    "load_waveform_set",
]


@dataclass
class DelaySupport:
    """Delay taps spanned by the ROI plus the lag set used for the design.

    ``delay_taps`` holds the union of the per-pair bistatic tap intervals
    (padded by one sample each side); ``lag_taps`` additionally contains the
    pairwise tap differences (mod M) at common receivers.
    """

    intervals: list                 # [(tau_min, tau_max)] per considered pair, s
    delay_taps: np.ndarray          # sorted absolute taps, subset of 0..M-1
    lag_taps: np.ndarray            # sorted design lags, subset of 0..M-1
    n_fft: int                      # M

    @property
    def n_lags(self) -> int:
        return len(self.lag_taps)


@dataclass
class SensingWaveform:
    """Separable DD-domain waveform of one Tx AP and its FT image."""

    delay_seq: np.ndarray           # (M,), ||.||^2 = M
    doppler_seq: np.ndarray         # (K,), ||.||^2 = K
    dd_grid: np.ndarray = field(init=False)
    ft_grid: np.ndarray = field(init=False)

    def __post_init__(self):
        self.dd_grid = np.outer(self.delay_seq, self.doppler_seq)
        self.ft_grid = dd_to_ft(self.dd_grid)


@dataclass
class CommSymbols:
    """Unit-average-power QAM grids, one per UE."""

    grids: np.ndarray               # (Q, M, K) complex
    order: int

    @property
    def n_ues(self) -> int:
        return self.grids.shape[0]


def _tap_interval(tau_min: float, tau_max: float, delay_res: float,
                  n_fft: int) -> tuple[int, int]:
    lo = int(round_half_away(tau_min / delay_res)) - 1
    hi = int(round_half_away(tau_max / delay_res)) + 1
    if hi >= n_fft:
        raise ConfigurationError(
            f"ROI delays reach tap {hi} beyond the unambiguous range M={n_fft}")
    return max(lo, 0), hi


def delay_support(scenario: Scenario, tx_set, rx_candidates,
                  allow_monostatic: bool = False) -> DelaySupport:
    """Union of bistatic ROI tap intervals and their receiver-side differences."""
    tx_set, rx_candidates = list(tx_set), list(rx_candidates)
    pairs = [(n, r) for n in tx_set for r in rx_candidates
             if n != r or allow_monostatic]
    if not pairs:
        raise GeometryError("no AP pair to build a delay support from")

    m = scenario.grid.n_subcarriers
    res = scenario.grid.delay_res
    intervals = {}
    raw = []
    for n, r in pairs:
        if (r, n) in intervals and not allow_monostatic:
            tau = intervals[(r, n)][2]
        else:
            tau = roi_delay_extrema(scenario.aps[n], scenario.aps[r], scenario.roi)
        lo, hi = _tap_interval(tau[0], tau[1], res, m)
        intervals[(n, r)] = (lo, hi, tau)
        raw.append(tau)

    taps = set()
    for lo, hi, _ in intervals.values():
        taps.update(range(lo, hi + 1))

    lags = set(taps)
    for r in rx_candidates:
        incoming = [(n, *intervals[(n, r)][:2]) for n in tx_set
                    if (n, r) in intervals]
        for n, lo1, hi1 in incoming:
            for n2, lo2, hi2 in incoming:
                if n2 == n:
                    continue
                for v in range(lo1 - hi2, hi1 - lo2 + 1):
                    lags.add(v % m)
    # close under negation so one constraint orientation covers both
    lags |= {(-v) % m for v in lags}

    return DelaySupport(intervals=raw,
                        delay_taps=np.array(sorted(taps), dtype=int),
                        lag_taps=np.array(sorted(lags), dtype=int),
                        n_fft=m)


def periodic_correlation_matrix(seq: np.ndarray) -> np.ndarray:
    """Circulant matrix X with X[i, j] = seq[(i - j) mod M]."""
    return circulant(np.asarray(seq))


def _constraint_rows(prior: np.ndarray, lag_taps: np.ndarray) -> np.ndarray:
    """Rows r_v with r_v[j] = conj(prior[(j - v) mod M]); r_v @ x is the
    periodic cross-correlation of ``prior`` against ``x`` at lag v."""
    return np.conj(circulant(prior)).T[lag_taps, :]


def design_delay_sequences(n_seqs: int, m: int, support: DelaySupport,
                           rng_seed=None) -> list[np.ndarray]:
    """Iterative null-space design of mutually orthogonal delay sequences.

    Sequence 1 is random complex Gaussian; sequence n lies in the null space
    of the stacked correlation rows of sequences 1..n-1 restricted to the
    support lags.  All sequences are scaled to ||x||^2 = M.  The family is
    feasible only while ``n_seqs <= floor(M / |lags|)``.

    The lag set is closed under mod-M negation before use (supports built by
    :func:`delay_support` already are): correlations at lag v and -v are
    conjugate mirrors, so a symmetric set zeroes both orientations of every
    ordered pair.
    """
    if support.n_fft != m:
        raise ConfigurationError(
            f"support was built for M={support.n_fft}, not M={m}")
    lag_taps = np.unique(np.concatenate(
        [support.lag_taps % m, (-support.lag_taps) % m]))
    n_lags = len(lag_taps)
    if n_lags == 0:
        raise ConfigurationError("empty delay support")
    bound = m // n_lags
    if n_seqs > bound:
        raise FeasibilityError(
            f"{n_seqs} sequences infeasible: the bound M/|lags| = "
            f"{m}/{n_lags} allows at most {bound}")

    rng = np.random.default_rng(rng_seed)
    seqs: list[np.ndarray] = []
    rows: list[np.ndarray] = []
    for n in range(n_seqs):
        if n == 0:
            x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        else:
            basis = null_space(np.vstack(rows), rcond=1e-10)
            if basis.shape[1] == 0:
                raise RankError(
                    f"null space exhausted at sequence {n + 1} of {n_seqs}")
            w = rng.standard_normal(basis.shape[1]) \
                + 1j * rng.standard_normal(basis.shape[1])
            x = basis @ w
        x = x * np.sqrt(m) / np.linalg.norm(x)
        seqs.append(x)
        rows.append(_constraint_rows(x, lag_taps))

    worst = max_cross_correlation(seqs, lag_taps)
    if worst > 1e-8 * m:
        raise RankError(
            f"designed family violates orthogonality: max |rho| = {worst:.3e}")
    return seqs


def pseudorandom_delay_sequences(n_seqs: int, m: int, rng_seed=None) -> list[np.ndarray]:
    """Unstructured benchmark sequences (zero-shift orthogonality only)."""
    rng = np.random.default_rng(rng_seed)
    out = []
    for _ in range(n_seqs):
        x = rng.standard_normal(m) + 1j * rng.standard_normal(m)
        out.append(x * np.sqrt(m) / np.linalg.norm(x))
    return out


def max_cross_correlation(seqs, lag_taps) -> float:
    """Largest |periodic cross-correlation| over ordered pairs and lags."""
    worst = 0.0
    for i, a in enumerate(seqs):
        for j, b in enumerate(seqs):
            if i == j:
                continue
            rho = periodic_xcorr_1d(a, b)
            worst = max(worst, float(np.abs(rho[lag_taps]).max()))
    return worst


def doppler_sequence(k: int, root: int = 1) -> np.ndarray:
    """Unit-modulus Zadoff-Chu sequence of length K (K=1 degenerates to [1])."""
    if k == 1:
        return np.ones(1, dtype=complex)
    if gcd(root, k) != 1:
        raise ConfigurationError(f"ZC root {root} is not coprime with K={k}")
    p = np.arange(k)
    if k % 2 == 0:
        phase = -np.pi * root * p ** 2 / k
    else:
        phase = -np.pi * root * p * (p + 1) / k
    return np.exp(1j * phase)


def make_waveform_set(delay_seqs, k: int, root: int = 1) -> list[SensingWaveform]:
    """Wrap designed delay sequences with a shared Doppler component."""
    dop = doppler_sequence(k, root)
    return [SensingWaveform(delay_seq=np.asarray(x), doppler_seq=dop)
            for x in delay_seqs]


_QAM_ORDERS = {4: 2, 16: 4, 64: 8}


def qam_symbols(n_ues: int, m: int, k: int, order: int = 4,
                rng_seed=None) -> CommSymbols:
    """I.i.d. square-QAM grids scaled to unit average power."""
    if order not in _QAM_ORDERS:
        raise ConfigurationError(f"QAM order must be one of {sorted(_QAM_ORDERS)}")
    side = _QAM_ORDERS[order]
    levels = 2 * np.arange(side) - (side - 1)          # e.g. [-3,-1,1,3]
    scale = np.sqrt(np.mean(levels ** 2) * 2)
    rng = np.random.default_rng(rng_seed)
    i = levels[rng.integers(0, side, size=(n_ues, m, k))]
    q = levels[rng.integers(0, side, size=(n_ues, m, k))]
    return CommSymbols(grids=(i + 1j * q) / scale, order=order)


def save_waveform_set(path, waveforms: list[SensingWaveform],
                      support: DelaySupport | None = None) -> None:
    """Dump a designed family to ``.npz`` with a JSON header."""
    delay = np.stack([w.delay_seq for w in waveforms])
    header = {
        "n_seqs": len(waveforms),
        "m": int(delay.shape[1]),
        "k": int(len(waveforms[0].doppler_seq)),
        "lag_taps": [] if support is None else support.lag_taps.tolist(),
        "delay_taps": [] if support is None else support.delay_taps.tolist(),
    }
    np.savez(path, header=json.dumps(header), delay_seqs=delay,
             doppler_seq=waveforms[0].doppler_seq)


def load_waveform_set(path) -> tuple[list[SensingWaveform], dict]:
    """Inverse of :func:`save_waveform_set`; returns (waveforms, header)."""
    data = np.load(path, allow_pickle=False)
    header = json.loads(str(data["header"]))
    dop = data["doppler_seq"]
    waveforms = [SensingWaveform(delay_seq=row, doppler_seq=dop)
                 for row in data["delay_seqs"]]
    return waveforms, header
