import numpy as np
import pytest

from disac.errors import DimensionError, GeometryError, UndefinedEntropyError
from disac.imaging import (
    BackprojectionCache,
    backproject_pair,
    fuse,
    image_from_chain,
    load_image,
    local_maxima,
    saf,
    save_image,
)
from disac.metrics import entropy
from disac.pipeline import design_waveform_family, run_chain
from disac.receive import ExtractedCir
from disac.scenario import (
    RegionOfInterest,
    Scenario,
    Target,
    make_lattice_scenario,
    roi_pixels,
    steering_vector,
)
from tests.test_receive import build_chain, on_grid_scenario


def zero_cir(l, m, k, tx_id=0, rx_id=1):
    z = np.zeros((l, m, k), dtype=complex)
    return ExtractedCir(desired=z.copy(), int_sen=z.copy(), int_com=z.copy(),
                        noise=z.copy(), tx_id=tx_id, rx_id=rx_id)


def test_backproject_zero_cir():
    sc = on_grid_scenario(m=32, k=2)
    cir = zero_cir(4, 32, 2)
    img = backproject_pair(cir, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    assert np.all(img.pixels == 0.0)


def test_backproject_peak_at_target():
    # noiseless single on-grid target: |I| maximal at the target pixel
    # (odd pixel count puts one pixel exactly on the target; 1 GHz bandwidth
    # makes the range bins finer than the pixel pitch)
    sc = on_grid_scenario(m=128, k=2, b=1e9, l0=80)
    sc.roi = RegionOfInterest(center=sc.roi.center, size_x=2.1, size_y=2.1,
                              pixel_pitch=0.1)
    comm, bank, wf, sym, sens, _, ap = build_chain(sc, [0], [1], eta=0.0)
    from disac.receive import extract_cir
    cir = extract_cir(ap, 0, 0, wf, sc.grid)
    img = backproject_pair(cir, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    px = roi_pixels(sc.roi)
    best = px[np.argmax(np.abs(img.pixels))]
    target = sc.targets[0].position
    assert np.linalg.norm(best - target) < 1e-9


def test_backproject_phase_at_target():
    # value at the target pixel: sqrt(P)*(1-eta)*MK * beta * (a_tx^T v) * L
    sc = on_grid_scenario(m=64, k=2, l0=12)
    # odd pixel count puts one pixel exactly on the target
    sc.roi = RegionOfInterest(center=sc.roi.center, size_x=0.5, size_y=0.5,
                              pixel_pitch=0.1)
    comm, bank, wf, sym, sens, _, ap = build_chain(sc, [0], [1], eta=0.0)
    from disac.receive import extract_cir
    cir = extract_cir(ap, 0, 0, wf, sc.grid)
    img = backproject_pair(cir, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0,
                           component="desired")
    px = roi_pixels(sc.roi)
    idx = np.argmin(np.linalg.norm(px - sc.targets[0].position, axis=1))
    assert np.linalg.norm(px[idx] - sc.targets[0].position) < 1e-9
    m, k = sc.grid.shape
    a_tx = steering_vector(sc.aps[0], sc.targets[0].position)
    expect = np.sqrt(sc.tx_power_w) * m * k * sens.betas[0, 0, 0] \
        * (a_tx @ bank.sen[0]) * sc.aps[1].n_antennas
    assert img.pixels[idx] == pytest.approx(expect, rel=1e-6)


def test_backproject_out_of_support():
    # ROI far enough that delay bins exceed M-1: pixels flagged, zeroed
    sc = on_grid_scenario(m=16, k=2)
    far_roi = RegionOfInterest(center=[0.0, 300.0], size_x=2.0, size_y=2.0,
                               pixel_pitch=0.5)
    cir = zero_cir(4, 16, 2)
    cir.desired += 1.0
    img = backproject_pair(cir, sc.aps[0], sc.aps[1], far_roi, sc.grid, sc.f0)
    assert img.out_of_support == img.pixels.size
    assert np.all(img.pixels == 0.0)


def test_backproject_linear_in_cir():
    sc = on_grid_scenario(m=32, k=2)
    rng = np.random.default_rng(0)
    c1 = zero_cir(4, 32, 2)
    c1.desired = rng.normal(size=(4, 32, 2)) + 1j * rng.normal(size=(4, 32, 2))
    c2 = zero_cir(4, 32, 2)
    c2.desired = rng.normal(size=(4, 32, 2)) + 1j * rng.normal(size=(4, 32, 2))
    args = (sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    i1 = backproject_pair(c1, *args).pixels
    i2 = backproject_pair(c2, *args).pixels
    c1.desired += c2.desired
    i12 = backproject_pair(c1, *args).pixels
    assert np.allclose(i12, i1 + i2, atol=1e-12 * np.abs(i12).max())


def test_cache_matches_direct_backprojection():
    sc = on_grid_scenario(m=64, k=2)
    comm, bank, wf, sym, sens, _, ap = build_chain(sc, [0], [1], eta=0.0)
    from disac.receive import extract_cir
    cir = extract_cir(ap, 0, 0, wf, sc.grid)
    direct = backproject_pair(cir, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    cached = BackprojectionCache(sc).pair_image(cir)
    assert np.allclose(direct.pixels, cached.pixels)


def test_fuse_single_identity_and_permutation():
    sc = on_grid_scenario(m=32, k=2)
    rng = np.random.default_rng(1)
    imgs = []
    for tx in range(3):
        c = zero_cir(4, 32, 2, tx_id=tx, rx_id=3)
        c.desired = rng.normal(size=(4, 32, 2)) + 1j * rng.normal(size=(4, 32, 2))
        imgs.append(backproject_pair(c, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0))
    assert np.array_equal(fuse([imgs[0]]).pixels, imgs[0].pixels)
    a = fuse(imgs).pixels
    b = fuse(imgs[::-1]).pixels
    assert np.allclose(a, b, atol=1e-12 * np.abs(a).max())


def test_fuse_rejects_mismatched_grids():
    sc = on_grid_scenario(m=32, k=2)
    c = zero_cir(4, 32, 2)
    i1 = backproject_pair(c, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    other = RegionOfInterest(center=sc.roi.center, size_x=1.0, size_y=1.0,
                             pixel_pitch=0.5)
    i2 = backproject_pair(c, sc.aps[0], sc.aps[1], other, sc.grid, sc.f0)
    with pytest.raises(DimensionError):
        fuse([i1, i2])


def test_fused_coherent_gain_at_target():
    # pair-constant target phase: fused magnitude ~ sum of pair magnitudes
    # (odd pixel count so one pixel sits exactly on the target)
    sc = make_lattice_scenario(4, 4, n_subcarriers=256, n_symbols=2,
                               roi_size=(0.9, 0.9), pixel_pitch=0.1, rng=0)
    wf, _ = design_waveform_family(sc, range(4), seed=0, allow_monostatic=True)
    res = run_chain(sc, [0, 1, 2, 3], [0, 1, 2, 3], eta=0.0, waveforms=wf,
                    noiseless=True)
    px = roi_pixels(sc.roi)
    idx = np.argmin(np.linalg.norm(px - sc.roi.center, axis=1))
    assert np.linalg.norm(px[idx] - sc.targets[0].position) < 1e-9
    cache = BackprojectionCache(sc)
    vals = [cache.pair_image(cir, component="desired").pixels[idx]
            for cir in res.cirs.values()]
    coherent = abs(sum(vals))
    incoherent = sum(abs(v) for v in vals)
    assert coherent >= 0.95 * incoherent


def test_saf_requires_center_target():
    sc = make_lattice_scenario(4, 2, n_subcarriers=128, n_symbols=1, rng=0)
    sc.targets[0].position = sc.roi.center + np.array([0.5, 0.0])
    with pytest.raises(GeometryError):
        saf(sc, [0, 1], [2, 3])


@pytest.fixture(scope="module")
def gigahertz_drn():
    """Shared 1 GHz N=4 full-duplex run on a lambda/4 pixel grid."""
    sc = make_lattice_scenario(4, 4, n_subcarriers=1024, n_symbols=1,
                               bandwidth=1e9, roi_size=(1.0, 1.0),
                               pixel_pitch=0.0075, rng=0)
    img = saf(sc, list(range(4)), list(range(4)), eta=0.0, noiseless=True)
    return sc, img


def test_saf_drn_peak_at_center(gigahertz_drn):
    sc, img = gigahertz_drn
    err = np.linalg.norm(img.peak_pixel() - sc.roi.center)
    assert err <= sc.roi.pixel_pitch          # within one pixel


def test_saf_entropy_increases_with_disturbance():
    # eta -> 1 with tiny sensing power and strong noise degrades the SAF
    sc = make_lattice_scenario(9, 4, n_subcarriers=256, n_symbols=1,
                               roi_size=(2.5, 2.5), pixel_pitch=0.05,
                               noise_psd_dbm_hz=-158.0, rng=0)
    tx_ids, rx_ids = [0, 1, 2, 3, 4], [8]
    wf, _ = design_waveform_family(sc, tx_ids + rx_ids, seed=0)
    e0 = entropy(saf(sc, tx_ids, rx_ids, eta=0.0, waveforms=wf,
                     family_ids=tx_ids + rx_ids, noise_seed=3))
    e1 = entropy(saf(sc, tx_ids, rx_ids, eta=0.99, waveforms=wf,
                     family_ids=tx_ids + rx_ids, noise_seed=3))
    assert e1 > e0


def test_saf_entropy_drops_with_bandwidth(gigahertz_drn):
    sc_hi, img_hi = gigahertz_drn
    sc_lo = make_lattice_scenario(4, 4, bandwidth=1e8, n_subcarriers=1024,
                                  n_symbols=1, roi_size=(1.0, 1.0),
                                  pixel_pitch=0.0075, rng=0)
    img_lo = saf(sc_lo, list(range(4)), list(range(4)), eta=0.0, noiseless=True)
    assert entropy(img_hi) < entropy(img_lo)


def test_multitarget_image_superposes():
    base = make_lattice_scenario(4, 4, n_subcarriers=256, n_symbols=1,
                                 roi_size=(2.0, 2.0), pixel_pitch=0.1, rng=0)
    t1 = Target(position=base.roi.center + np.array([-0.6, -0.5]), rcs=1.0, phase=0.3)
    t2 = Target(position=base.roi.center + np.array([0.7, 0.4]), rcs=1.0, phase=1.1)
    wf, _ = design_waveform_family(base, range(4), seed=0, allow_monostatic=True)

    def run_with(targets):
        sc = Scenario(aps=base.aps, ues=base.ues, roi=base.roi, targets=targets,
                      f0=base.f0, noise_psd_dbm_hz=base.noise_psd_dbm_hz,
                      tx_power_w=base.tx_power_w, grid=base.grid, eta=0.0)
        res = run_chain(sc, [0, 1, 2, 3], [0, 1, 2, 3], eta=0.0, waveforms=wf,
                        noiseless=True)
        return image_from_chain(res).pixels

    joint = run_with([t1, t2])
    s1 = run_with([t1])
    s2 = run_with([t2])
    synth = s1 + s2
    corr = abs(np.vdot(joint, synth)) / (np.linalg.norm(joint) * np.linalg.norm(synth))
    assert corr >= 0.95


def test_local_maxima_finds_target(gigahertz_drn):
    sc, img = gigahertz_drn
    peaks = local_maxima(img, min_rel=0.5)
    d = np.linalg.norm(peaks - sc.roi.center, axis=1).min()
    assert d <= sc.roi.pixel_pitch


def test_image_round_trip(tmp_path):
    sc = on_grid_scenario(m=32, k=2)
    rng = np.random.default_rng(5)
    c = zero_cir(4, 32, 2)
    c.desired = rng.normal(size=(4, 32, 2)) + 1j * rng.normal(size=(4, 32, 2))
    img = backproject_pair(c, sc.aps[0], sc.aps[1], sc.roi, sc.grid, sc.f0)
    path = tmp_path / "image.npz"
    save_image(path, img)
    back = load_image(path)
    assert np.allclose(back.pixels, img.pixels)
    assert back.pairs == img.pairs
    assert back.nx == img.nx and back.ny == img.ny
