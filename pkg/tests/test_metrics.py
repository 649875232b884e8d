import numpy as np
import pytest

from disac.channel import build_comm_channel
from disac.errors import UndefinedEntropyError
from disac.metrics import (
    MetricReport,
    closed_form_sensing_sinr,
    comm_sinr_analytic,
    dmimo_bound_se,
    drn_bound_sinr,
    empirical_sensing_sinr,
    entropy,
    se_from_realizations,
    spectral_efficiency,
)
from disac.pipeline import run_chain
from disac.receive import extract_cir, ue_receive
from disac.scenario import make_lattice_scenario, steering_vector
from disac.waveform import qam_symbols
from tests.test_receive import build_chain, on_grid_scenario


def test_entropy_single_pixel_zero():
    img = np.zeros(64, dtype=complex)
    img[10] = 3.0 - 2.0j
    assert entropy(img) == 0.0


def test_entropy_uniform_is_log2_p():
    phases = np.exp(1j * np.linspace(0, 5, 256))
    assert entropy(phases) == pytest.approx(np.log2(256), abs=1e-12)


def test_entropy_scale_invariant():
    rng = np.random.default_rng(0)
    img = rng.normal(size=128) + 1j * rng.normal(size=128)
    e = entropy(img)
    assert entropy(img * (2.3 - 1.1j)) == pytest.approx(e, rel=1e-12)


def test_entropy_zero_image_raises():
    with pytest.raises(UndefinedEntropyError):
        entropy(np.zeros(16, dtype=complex))


def test_entropy_sinc_kappa_formula():
    # separable 2D sinc sampled over its main lobe: entropy matches
    # log2(k*rho_x/pitch) + log2(k*rho_y/pitch) with k = 1.36 within 0.5 bit
    kappa = 1.36
    for rho_x, rho_y in [(20.0, 12.0), (10.0, 10.0), (30.0, 8.0)]:
        xs = np.arange(-rho_x, rho_x + 0.5, 1.0)
        ys = np.arange(-rho_y, rho_y + 0.5, 1.0)
        img = np.outer(np.sinc(xs / rho_x), np.sinc(ys / rho_y))
        predicted = np.log2(kappa * rho_x) + np.log2(kappa * rho_y)
        assert abs(entropy(img.ravel()) - predicted) < 0.5


def test_se_vanishes_in_strong_noise():
    sc = on_grid_scenario(n_ues=2)
    comm, bank, wf, sym, _, _, _ = build_chain(sc, [0, 1], [1], eta=0.8)
    se = spectral_efficiency(comm, bank, wf, 0.8, sc.tx_power_w, noise_var=1e6)
    assert np.all(se < 1e-6)


def test_se_monotone_in_noise():
    sc = on_grid_scenario(n_ues=2)
    comm, bank, wf, sym, _, _, _ = build_chain(sc, [0, 1], [1], eta=0.8)
    prev = None
    for noise in (1e-18, 1e-16, 1e-14, 1e-12):
        se = spectral_efficiency(comm, bank, wf, 0.8, sc.tx_power_w, noise)
        if prev is not None:
            assert np.all(se <= prev + 1e-12)
        prev = se


def test_se_equals_dmimo_bound_single_ue():
    # eta=1, Q=1, MMSE, LOS: the analytic SE meets the bound built on the
    # same (all-AP) channel
    sc = make_lattice_scenario(4, 4, n_subcarriers=64, n_symbols=2, n_ues=1,
                               rng=3)
    res = run_chain(sc, list(range(4)), [], eta=1.0, precoder="mmse",
                    waveform_kind="pseudorandom")
    se = spectral_efficiency(res.comm_channel, res.bank, res.waveforms, 1.0,
                             sc.tx_power_w, sc.noise_var)
    bound = dmimo_bound_se(res.comm_channel, sc.tx_power_w, sc.noise_var)
    assert se[0] == pytest.approx(bound[0], rel=0.01)


def test_se_empirical_matches_analytic():
    sc = make_lattice_scenario(9, 4, n_subcarriers=128, n_symbols=2, n_ues=2,
                               rng=1)
    res = run_chain(sc, list(range(8)), [8], eta=0.9, precoder="mmse",
                    waveform_kind="pseudorandom")
    analytic = spectral_efficiency(res.comm_channel, res.bank, res.waveforms,
                                   0.9, sc.tx_power_w, sc.noise_var)
    decomps = []
    for seed in range(64):
        sym = qam_symbols(2, *sc.grid.shape, rng_seed=1000 + seed)
        decomps.append(ue_receive(res.comm_channel, res.bank, sym,
                                  res.waveforms, 0.9, sc.tx_power_w,
                                  noise_var=0.0, noise_seed=seed))
    empirical = se_from_realizations(decomps, sc.noise_var)
    assert np.all(np.abs(empirical - analytic) < 0.5)


def test_se_below_dmimo_bound():
    sc = make_lattice_scenario(9, 4, n_subcarriers=64, n_symbols=2, n_ues=2,
                               rng=2)
    res = run_chain(sc, list(range(8)), [8], eta=0.9, precoder="mmse",
                    waveform_kind="pseudorandom")
    se = spectral_efficiency(res.comm_channel, res.bank, res.waveforms, 0.9,
                             sc.tx_power_w, sc.noise_var)
    ch_all = build_comm_channel(sc, rng=0, tx_ids=list(range(9)))
    bound = dmimo_bound_se(ch_all, sc.tx_power_w, sc.noise_var)
    assert np.all(se <= bound)


def test_sensing_sinr_formula_eta0():
    # on-grid target, no comm, designed waveforms:
    # SINR = P * MK * |beta|^2 * |a^T v|^2 * L / sigma_n^2
    sc = on_grid_scenario(m=64, k=2, l0=12)
    comm, bank, wf, sym, sens, _, ap = build_chain(sc, [0], [1], eta=0.0)
    cir = extract_cir(ap, 0, 0, wf, sc.grid)
    sinr = empirical_sensing_sinr([cir], sc, 0, 1)
    m, k = sc.grid.shape
    a_tx = steering_vector(sc.aps[0], sc.targets[0].position)
    gain = abs(a_tx @ bank.sen[0]) ** 2
    beta2 = abs(sens.betas[0, 0, 0]) ** 2
    l = sc.aps[0].n_antennas
    expect = sc.tx_power_w * m * k * beta2 * gain * l / sc.noise_var
    assert sinr == pytest.approx(expect, rel=1e-9)


def test_sensing_sinr_below_drn_bound():
    # ROI-wide illumination keeps the Tx gain below unity, so the
    # full-duplex sensing-only reference upper-bounds the empirical SINR
    sc = make_lattice_scenario(9, 4, n_subcarriers=512, n_symbols=2,
                               roi_size=(2.5, 2.5), pixel_pitch=0.05, rng=0)
    res = run_chain(sc, list(range(8)), [8], eta=0.0)
    for i, n in enumerate(range(8)):
        sinr = empirical_sensing_sinr([res.cirs[(n, 8)]], sc, n, 8)
        bound = drn_bound_sinr(sc, res.sens_channel.betas[i, 0, 0])
        assert sinr <= bound


def test_sensing_sinr_decays_toward_eta1():
    sc = make_lattice_scenario(9, 4, n_subcarriers=128, n_symbols=2, rng=0)
    prev = None
    for eta in (0.0, 0.5, 0.9, 0.99):
        res = run_chain(sc, list(range(8)), [8], eta=eta, symbol_seed=1,
                        noise_seed=1, waveform_kind="pseudorandom")
        sinr = empirical_sensing_sinr([res.cirs[(0, 8)]], sc, 0, 8)
        if prev is not None:
            assert sinr < prev
        prev = sinr
    assert prev < 1e-2 * empirical_sensing_sinr(
        [run_chain(sc, list(range(8)), [8], eta=0.0, symbol_seed=1,
                   noise_seed=1, waveform_kind="pseudorandom").cirs[(0, 8)]],
        sc, 0, 8)


def test_closed_form_tracks_empirical():
    sc = on_grid_scenario(m=64, k=2, l0=12, n_ues=1)
    for eta in (0.0, 0.7):
        comm, bank, wf, sym, sens, _, ap = build_chain(sc, [0, 1], [0], eta=eta)
        cir = extract_cir(ap, 0, 1, wf, sc.grid)    # tx 1 -> rx 0
        emp = empirical_sensing_sinr([cir], sc, 1, 0)
        cf = closed_form_sensing_sinr(sc, sens, bank, wf, 1, 0, eta)
        assert abs(10 * np.log10(emp / cf)) < 1.5   # dB agreement


def test_report_round_trip():
    rep = MetricReport(se_per_ue=[3.2, 2.9], sinr_com_mean_db=[11.0, 10.2],
                       sinr_sen_db={"(0,8)": 31.0}, sinr_sen_avg_db=31.0,
                       entropy_bits=9.8, se_dmimo_bound=[5.5, 5.1],
                       snr_drn_bound_db={"(0,8)": 44.0})
    text = rep.to_json()
    back = MetricReport.from_json(text)
    assert back == rep
    assert "bits/s/Hz" in text
