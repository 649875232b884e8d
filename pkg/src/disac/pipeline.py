"""End-to-end single-shot simulation: channels -> precoders -> Tx -> Rx -> CIRs.

Shared by the imaging helpers, the Rx-AP selection cache and the sweep
runner, so every consumer sees the exact same chain.
"""

from dataclasses import dataclass, field

import numpy as np

from .channel import (
    CommChannel,
    SensingChannelFT,
    build_comm_channel,
    build_roi_channel,
    build_sensing_channel_ft,
)
from .errors import ConfigurationError
from .precoding import PrecoderBank, make_precoder_bank
from .receive import ApRxDecomposition, ExtractedCir, UeRxDecomposition, \
    ap_receive, extract_cir, ue_receive
from .scenario import Scenario
from .waveform import (
    CommSymbols,
    DelaySupport,
    SensingWaveform,
    delay_support,
    design_delay_sequences,
    make_waveform_set,
    pseudorandom_delay_sequences,
    qam_symbols,
)

__all__ = ["ChainResult", "design_waveform_family", "run_chain"]


@dataclass
class ChainResult:
    """Everything one simulation shot produced, decompositions included."""

    scenario: Scenario
    tx_ids: list
    rx_ids: list
    comm_channel: CommChannel
    sens_channel: SensingChannelFT
    bank: PrecoderBank
    waveforms: list          # aligned with tx_ids
    symbols: CommSymbols
    ue: UeRxDecomposition
    ap: ApRxDecomposition
    cirs: dict = field(default_factory=dict)   # (tx_id, rx_id) -> ExtractedCir
    support: DelaySupport | None = None


def design_waveform_family(scenario: Scenario, ap_ids, *, kind: str = "designed",
                           seed=0, allow_monostatic: bool = False,
                           doppler_root: int = 1):
    """One sensing waveform per AP in ``ap_ids`` plus the support used.

    The family is designed jointly for the whole id list, so any Tx subset
    can later pick its members without re-running the design.
    """
    m, k = scenario.grid.shape
    ap_ids = list(ap_ids)
    if kind == "designed":
        support = delay_support(scenario, ap_ids, ap_ids,
                                allow_monostatic=allow_monostatic)
        seqs = design_delay_sequences(len(ap_ids), m, support, rng_seed=seed)
    elif kind == "pseudorandom":
        support = delay_support(scenario, ap_ids, ap_ids,
                                allow_monostatic=allow_monostatic)
        seqs = pseudorandom_delay_sequences(len(ap_ids), m, rng_seed=seed)
    else:
        raise ConfigurationError(f"unknown waveform kind {kind!r}")
    return make_waveform_set(seqs, k=k, root=doppler_root), support


def run_chain(scenario: Scenario, tx_ids, rx_ids, *, eta: float | None = None,
              precoder: str = "mmse", waveforms=None, family_ids=None,
              waveform_kind: str = "designed", waveform_seed=0,
              symbol_seed=0, noise_seed=0, noiseless: bool = False,
              clusters: int = 1, channel_seed=0, qam_order: int = 4,
              extract_pairs: bool = True) -> ChainResult:
    """Run the full transmit/receive chain for one Tx/Rx split.

    ``waveforms`` may carry a pre-designed family aligned with ``family_ids``
    (defaults to all APs of the scenario); the Tx subset picks its members.
    """
    tx_ids, rx_ids = list(tx_ids), list(rx_ids)
    if not tx_ids:
        raise ConfigurationError("empty Tx set")
    eta = scenario.eta if eta is None else float(eta)

    support = None
    if waveforms is None:
        family_ids = list(range(scenario.n_aps)) if family_ids is None else list(family_ids)
        waveforms, support = design_waveform_family(
            scenario, family_ids, kind=waveform_kind, seed=waveform_seed,
            allow_monostatic=any(t in rx_ids for t in tx_ids))
    else:
        family_ids = list(range(scenario.n_aps)) if family_ids is None else list(family_ids)
    lookup = {ap_id: waveforms[i] for i, ap_id in enumerate(family_ids)}
    tx_waveforms = [lookup[n] for n in tx_ids]

    comm = build_comm_channel(scenario, clusters=clusters, rng=channel_seed,
                              tx_ids=tx_ids)
    roi_ch = build_roi_channel(scenario, tx_ids)
    bank = make_precoder_bank(comm, roi_ch, precoder, scenario.tx_power_w,
                              scenario.noise_var)
    m, k = scenario.grid.shape
    symbols = qam_symbols(scenario.n_ues, m, k, order=qam_order,
                          rng_seed=symbol_seed)
    noise_var = 0.0 if noiseless else scenario.noise_var

    ue = ue_receive(comm, bank, symbols, tx_waveforms, eta,
                    scenario.tx_power_w, noise_var, noise_seed)
    sens = build_sensing_channel_ft(scenario, tx_ids, rx_ids) if rx_ids else \
        SensingChannelFT(h=np.zeros((len(tx_ids), 0, m,
                                     bank.n_antennas, bank.n_antennas),
                                    dtype=complex),
                         tx_ids=tx_ids, rx_ids=[],
                         betas=np.zeros((len(tx_ids), 0, 0), dtype=complex),
                         delays=np.zeros((len(tx_ids), 0, 0)))
    ap = ap_receive(sens, bank, symbols, tx_waveforms, eta,
                    scenario.tx_power_w, noise_var, noise_seed + 1)

    result = ChainResult(scenario=scenario, tx_ids=tx_ids, rx_ids=rx_ids,
                         comm_channel=comm, sens_channel=sens, bank=bank,
                         waveforms=tx_waveforms, symbols=symbols, ue=ue, ap=ap,
                         support=support)
    if extract_pairs:
        for j, r in enumerate(rx_ids):
            for i, n in enumerate(tx_ids):
                result.cirs[(n, r)] = extract_cir(ap, j, i, tx_waveforms,
                                                  scenario.grid)
    return result
