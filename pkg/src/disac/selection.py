"""Tx/Rx AP partitioning by SAF-entropy minimization.

The objective is evaluated from a cache of per-pair single-target images,
computed once, noiselessly, with a common precoder scale, so that the fused
image of any feasible allocation equals the full pipeline's image up to a
global complex factor (entropy is invariant to that factor).  The genetic
algorithm operates on the Rx indicator bits; the Tx set is the complement
(every AP is used, half-duplex).
"""

from dataclasses import dataclass, field
from itertools import combinations
from math import comb

import numpy as np

from .channel import build_roi_channel, build_sensing_channel_ft
from .errors import (
    BudgetExceededError,
    ConfigurationError,
    ConstraintViolationError,
    GeometryError,
    UndefinedEntropyError,
)
from .imaging import BackprojectionCache
from .metrics import entropy
from .pipeline import design_waveform_family
from .precoding import PrecoderBank
from .receive import ap_receive, extract_cir
from .scenario import Scenario
from .waveform import CommSymbols

__all__ = [
    "Allocation",
    "GaConfig",
    "SafCache",
    "build_saf_cache",
    "allocation_entropy",
    "solve_ga",
    "solve_exhaustive",
    "random_allocation_entropies",
]


@dataclass
class Allocation:
    """Half-duplex Tx/Rx split; every AP serves exactly one role."""

    b_tx: np.ndarray
    b_rx: np.ndarray

    def __post_init__(self):
        self.b_tx = np.asarray(self.b_tx, dtype=bool)
        self.b_rx = np.asarray(self.b_rx, dtype=bool)

    @property
    def tx_ids(self) -> list:
        return np.flatnonzero(self.b_tx).tolist()

    @property
    def rx_ids(self) -> list:
        return np.flatnonzero(self.b_rx).tolist()

    def validate(self, n_rx_max: int | None = None) -> None:
        if self.b_tx.shape != self.b_rx.shape:
            raise ConstraintViolationError("indicator lengths differ")
        if np.any(self.b_tx & self.b_rx):
            raise ConstraintViolationError("an AP cannot be Tx and Rx at once")
        if not np.all(self.b_tx | self.b_rx):
            raise ConstraintViolationError("every AP must be either Tx or Rx")
        if n_rx_max is not None and self.b_rx.sum() > n_rx_max:
            raise ConstraintViolationError(
                f"{int(self.b_rx.sum())} Rx APs exceed the budget {n_rx_max}")


@dataclass
class GaConfig:
    population: int = 64
    generations: int = 200
    crossover_rate: float = 0.9
    mutation_rate: float | None = None      # default 2/N
    elitism: int = 2
    tournament: int = 3
    patience: int | None = 50               # generations without improvement
    seed: int = 0

    def __post_init__(self):
        if self.population < 2:
            raise ConfigurationError("population must be at least 2")
        for rate in (self.crossover_rate, self.mutation_rate or 0.0):
            if not 0.0 <= rate <= 1.0:
                raise ConfigurationError("rates must lie in [0, 1]")


@dataclass
class SafCache:
    """Per-pair single-target images on a shared pixel grid."""

    pair_pixels: dict                       # (tx id, rx id) -> (npix,) complex
    n_aps: int
    npix: int

    def fused(self, alloc: Allocation) -> np.ndarray:
        total = np.zeros(self.npix, dtype=complex)
        for n in alloc.tx_ids:
            for r in alloc.rx_ids:
                total += self.pair_pixels[(n, r)]
        return total


def build_saf_cache(scenario: Scenario, *, waveform_seed=0,
                    waveform_kind: str = "designed") -> SafCache:
    """Noiseless sensing-only image of every ordered AP pair (diagonal
    excluded).  Per-AP precoders share one common normalization so any
    allocation's fused image matches the pipeline up to a global scale."""
    if len(scenario.targets) != 1 or not np.allclose(
            scenario.targets[0].position, scenario.roi.center):
        raise GeometryError("the selection cache needs one target at the ROI center")
    n = scenario.n_aps
    ids = list(range(n))
    family, _ = design_waveform_family(scenario, ids, kind=waveform_kind,
                                       seed=waveform_seed)
    roi_all = build_roi_channel(scenario, ids)
    scale = np.linalg.norm(roi_all.stacked())
    bp = BackprojectionCache(scenario)
    m, k = scenario.grid.shape
    l_ant = scenario.aps[0].n_antennas
    silent = CommSymbols(grids=np.zeros((1, m, k), dtype=complex), order=4)

    images = {}
    for tx in ids:
        bank = PrecoderBank(comm=np.zeros((m, l_ant, 1), dtype=complex),
                            sen=np.conj(roi_all.h[tx])[None, :] / scale,
                            mode="mr", tx_ids=[tx], n_antennas=l_ant)
        for rx in ids:
            if rx == tx:
                continue
            sens = build_sensing_channel_ft(scenario, [tx], [rx])
            ap = ap_receive(sens, bank, silent, [family[tx]], eta=0.0,
                            tx_power=scenario.tx_power_w, noise_var=0.0)
            cir = extract_cir(ap, 0, 0, [family[tx]], scenario.grid)
            images[(tx, rx)] = bp.pair_image(cir).pixels
    return SafCache(pair_pixels=images, n_aps=n, npix=bp.pixels.shape[0])


def allocation_entropy(alloc: Allocation, cache: SafCache,
                       n_rx_max: int | None = None) -> float:
    """Entropy of the fused image of the selected pairs."""
    alloc.validate(n_rx_max)
    if not alloc.rx_ids or not alloc.tx_ids:
        raise UndefinedEntropyError("allocation produces no Tx/Rx pair")
    return entropy(cache.fused(alloc))


def _alloc_from_rx(bits: np.ndarray) -> Allocation:
    return Allocation(b_tx=~bits, b_rx=bits)


class _Objective:
    """Memoized entropy objective over Rx bit vectors."""

    def __init__(self, cache: SafCache, fn=None):
        self.cache = cache
        self.fn = fn
        self.memo = {}

    def __call__(self, bits: np.ndarray) -> float:
        key = bits.tobytes()
        if key not in self.memo:
            alloc = _alloc_from_rx(bits)
            self.memo[key] = self.fn(alloc) if self.fn is not None \
                else allocation_entropy(alloc, self.cache)
        return self.memo[key]


def _repair(bits: np.ndarray, n_rx_max: int, objective: _Objective) -> np.ndarray:
    """Enforce 1 <= sum(rx) <= min(n_rx_max, N-1), greedily keeping the bits
    whose removal costs the least entropy."""
    bits = bits.copy()
    n = bits.size
    limit = min(n_rx_max, n - 1)
    if not bits.any():
        best, best_val = None, np.inf
        for i in range(n):
            trial = bits.copy()
            trial[i] = True
            val = objective(trial)
            if val < best_val:
                best, best_val = i, val
        bits[best] = True
    while bits.sum() > limit:
        on = np.flatnonzero(bits)
        best, best_val = None, np.inf
        for i in on:
            trial = bits.copy()
            trial[i] = False
            if not trial.any():
                continue
            val = objective(trial)
            if val < best_val:
                best, best_val = i, val
        bits[best] = False
    return bits


def solve_ga(cache: SafCache, n_rx_max: int, config: GaConfig | None = None,
             objective_fn=None) -> tuple[Allocation, dict]:
    """Genetic search over Rx subsets; always returns a feasible incumbent.

    ``objective_fn`` may replace the cached objective with a slower exact
    evaluation (e.g. the full noisy pipeline) taking an Allocation.
    """
    if n_rx_max < 1:
        raise ConfigurationError("n_rx_max must be >= 1")
    config = config or GaConfig()
    n = cache.n_aps
    rng = np.random.default_rng(config.seed)
    mut = config.mutation_rate if config.mutation_rate is not None else 2.0 / n
    objective = _Objective(cache, objective_fn)

    pop = []
    for _ in range(config.population):
        k = int(rng.integers(1, min(n_rx_max, n - 1) + 1))
        bits = np.zeros(n, dtype=bool)
        bits[rng.choice(n, size=k, replace=False)] = True
        pop.append(bits)
    fitness = np.array([objective(b) for b in pop])

    history = [fitness.min()]
    stall = 0
    for _ in range(config.generations):
        order = np.argsort(fitness)
        elite = [pop[i].copy() for i in order[:config.elitism]]
        children = list(elite)
        while len(children) < config.population:
            picks = rng.integers(0, config.population, size=config.tournament)
            p1 = pop[picks[np.argmin(fitness[picks])]]
            picks = rng.integers(0, config.population, size=config.tournament)
            p2 = pop[picks[np.argmin(fitness[picks])]]
            if rng.random() < config.crossover_rate:
                mask = rng.random(n) < 0.5
                child = np.where(mask, p1, p2)
            else:
                child = p1.copy()
            flip = rng.random(n) < mut
            child = child ^ flip
            children.append(_repair(child, n_rx_max, objective))
        pop = children
        fitness = np.array([objective(b) for b in pop])
        best = fitness.min()
        if best < history[-1] - 1e-12:
            stall = 0
        else:
            stall += 1
        history.append(min(best, history[-1]))
        if config.patience is not None and stall >= config.patience:
            break

    winner = pop[int(np.argmin(fitness))]
    alloc = _alloc_from_rx(winner)
    alloc.validate(n_rx_max)
    info = {"entropy": float(objective(winner)), "history": history,
            "evaluations": len(objective.memo)}
    return alloc, info


def solve_exhaustive(cache: SafCache, n_rx_max: int,
                     budget: int = 10 ** 6) -> tuple[Allocation, dict]:
    """Global optimum by enumerating every feasible Rx subset."""
    n = cache.n_aps
    limit = min(n_rx_max, n - 1)
    total = sum(comb(n, k) for k in range(1, limit + 1))
    if total > budget:
        raise BudgetExceededError(
            f"{total} candidate allocations exceed the budget {budget}")
    objective = _Objective(cache)
    best_bits, best_val = None, np.inf
    for k in range(1, limit + 1):
        for subset in combinations(range(n), k):
            bits = np.zeros(n, dtype=bool)
            bits[list(subset)] = True
            val = objective(bits)
            if val < best_val:
                best_bits, best_val = bits, val
    return _alloc_from_rx(best_bits), {"entropy": float(best_val),
                                       "candidates": total}


def random_allocation_entropies(cache: SafCache, n_rx: int, count: int,
                                seed=0) -> np.ndarray:
    """Entropies of uniformly drawn allocations with exactly ``n_rx`` Rx APs."""
    rng = np.random.default_rng(seed)
    objective = _Objective(cache)
    out = np.empty(count)
    for i in range(count):
        bits = np.zeros(cache.n_aps, dtype=bool)
        bits[rng.choice(cache.n_aps, size=n_rx, replace=False)] = True
        out[i] = objective(bits)
    return out
