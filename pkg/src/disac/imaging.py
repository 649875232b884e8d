"""Back-projection imaging and coherent multistatic fusion.

A pair image evaluates the extracted zero-Doppler CIR at every pixel's
rounded bistatic delay bin, combines across Rx antennas with the conjugate
steering vector toward the pixel, and compensates the carrier phase.  The
fused image is the plain complex sum over the selected Tx/Rx pairs; with a
single point target at the ROI center it *is* the spatial ambiguity
function of the selected configuration.
"""

import json
from dataclasses import dataclass, field

import numpy as np

from .errors import DimensionError, GeometryError
from .grid import GridConfig, round_half_away
from .receive import ExtractedCir
from .scenario import AccessPoint, RegionOfInterest, Scenario, \
    bistatic_delay, roi_pixels, steering_vector

__all__ = ["Image", "BackprojectionCache", "backproject_pair", "fuse",
           "image_from_chain", "saf", "local_maxima", "save_image",
           "load_image"]


@dataclass
class Image:
    """Complex pixel map over the ROI (row-major, y rows by x columns)."""

    pixels: np.ndarray                  # (ny*nx,) complex
    nx: int
    ny: int
    roi: RegionOfInterest
    pairs: list = field(default_factory=list)
    out_of_support: int = 0

    def as_matrix(self) -> np.ndarray:
        return self.pixels.reshape(self.ny, self.nx)

    def intensity(self) -> np.ndarray:
        return np.abs(self.pixels) ** 2

    def peak_pixel(self) -> np.ndarray:
        """Position of the strongest pixel."""
        return roi_pixels(self.roi)[int(np.argmax(self.intensity()))]


class BackprojectionCache:
    """Precomputed pixel geometry for repeated imaging on a fixed layout.

    Delay bins, carrier-phase factors and Rx steering vectors depend only on
    the AP positions, the ROI grid and f0, so sweeps reuse them across
    Tx/Rx splits, trade-off factors and seeds.
    """

    def __init__(self, scenario: Scenario):
        self.scenario = scenario
        self.pixels = roi_pixels(scenario.roi)
        self._steer = {}          # rx id -> conj steering (npix, L)
        self._pair = {}           # (tx id, rx id) -> (taps, valid, phase)

    def _steering(self, rx_id: int) -> np.ndarray:
        if rx_id not in self._steer:
            self._steer[rx_id] = np.conj(
                steering_vector(self.scenario.aps[rx_id], self.pixels))
        return self._steer[rx_id]

    def _geometry(self, tx_id: int, rx_id: int):
        key = (tx_id, rx_id)
        if key not in self._pair:
            sc = self.scenario
            tau = bistatic_delay(sc.aps[tx_id], sc.aps[rx_id], self.pixels)
            taps = round_half_away(tau / sc.grid.delay_res)
            valid = (taps >= 0) & (taps < sc.grid.n_subcarriers)
            phase = np.exp(2j * np.pi * sc.f0 * tau)
            self._pair[key] = (np.where(valid, taps, 0), valid, phase)
        return self._pair[key]

    def pair_image(self, cir: ExtractedCir, component: str = "total") -> Image:
        h = getattr(cir, component)
        taps, valid, phase = self._geometry(cir.tx_id, cir.rx_id)
        steer = self._steering(cir.rx_id)
        vals = np.einsum("pl,lp->p", steer, h[:, :, 0][:, taps]) * phase
        vals[~valid] = 0.0
        roi = self.scenario.roi
        return Image(pixels=vals, nx=roi.n_pixels_x, ny=roi.n_pixels_y,
                     roi=roi, pairs=[(cir.tx_id, cir.rx_id)],
                     out_of_support=int(np.sum(~valid)))


def backproject_pair(cir: ExtractedCir, tx: AccessPoint, rx: AccessPoint,
                     roi: RegionOfInterest, grid: GridConfig, f0: float,
                     component: str = "total") -> Image:
    """Matched-filter image of one (tx, rx) pair over the ROI pixel grid.

    Pixels whose delay bin falls outside [0, M-1] are zeroed and counted in
    ``out_of_support``.
    """
    h = getattr(cir, component) if component != "total" else cir.total
    h0 = h[:, :, 0]                                     # zero-Doppler slice
    pixels = roi_pixels(roi)
    tau = bistatic_delay(tx, rx, pixels)                # (npix,)
    taps = round_half_away(tau / grid.delay_res)
    valid = (taps >= 0) & (taps < grid.n_subcarriers)
    taps_safe = np.where(valid, taps, 0)
    steer = steering_vector(rx, pixels)                 # (npix, L)
    vals = np.einsum("pl,lp->p", np.conj(steer), h0[:, taps_safe])
    vals = vals * np.exp(2j * np.pi * f0 * tau)
    vals[~valid] = 0.0
    return Image(pixels=vals, nx=roi.n_pixels_x, ny=roi.n_pixels_y, roi=roi,
                 pairs=[(cir.tx_id, cir.rx_id)],
                 out_of_support=int(np.sum(~valid)))


def fuse(images: list[Image]) -> Image:
    """Coherent (complex) sum of per-pair images on identical pixel grids."""
    if not images:
        raise DimensionError("nothing to fuse")
    first = images[0]
    total = np.zeros_like(first.pixels)
    pairs = []
    oos = 0
    for im in images:
        if (im.nx, im.ny) != (first.nx, first.ny) or im.roi is not first.roi \
                and not _same_roi(im.roi, first.roi):
            raise DimensionError("pair images use different pixel grids")
        total = total + im.pixels
        pairs.extend(im.pairs)
        oos += im.out_of_support
    return Image(pixels=total, nx=first.nx, ny=first.ny, roi=first.roi,
                 pairs=pairs, out_of_support=oos)


def _same_roi(a: RegionOfInterest, b: RegionOfInterest) -> bool:
    return (np.allclose(a.center, b.center) and a.size_x == b.size_x
            and a.size_y == b.size_y and a.pixel_pitch == b.pixel_pitch)


def image_from_chain(result, pairs=None, component: str = "total",
                     cache: BackprojectionCache | None = None) -> Image:
    """Backproject and fuse the selected pairs of a :class:`ChainResult`."""
    sc = result.scenario
    pairs = list(result.cirs.keys()) if pairs is None else list(pairs)
    if cache is not None:
        images = [cache.pair_image(result.cirs[(n, r)], component=component)
                  for n, r in pairs]
    else:
        images = [backproject_pair(result.cirs[(n, r)], sc.aps[n], sc.aps[r],
                                   sc.roi, sc.grid, sc.f0, component=component)
                  for n, r in pairs]
    return fuse(images)


def saf(scenario: Scenario, tx_ids, rx_ids, *, eta: float | None = None,
        precoder: str = "mmse", waveforms=None, family_ids=None,
        waveform_kind: str = "designed", waveform_seed=0, symbol_seed=0,
        noise_seed=0, noiseless: bool = False) -> Image:
    """Spatial ambiguity function: full pipeline for one center target.

    Requires the scenario to carry exactly one target at the ROI center.
    """
    from .pipeline import run_chain

    if len(scenario.targets) != 1 or not np.allclose(
            scenario.targets[0].position, scenario.roi.center):
        raise GeometryError("SAF needs exactly one target at the ROI center")
    result = run_chain(scenario, tx_ids, rx_ids, eta=eta, precoder=precoder,
                       waveforms=waveforms, family_ids=family_ids,
                       waveform_kind=waveform_kind, waveform_seed=waveform_seed,
                       symbol_seed=symbol_seed, noise_seed=noise_seed,
                       noiseless=noiseless)
    return image_from_chain(result)


def local_maxima(image: Image, min_rel: float = 0.2) -> np.ndarray:
    """Positions of pixels that dominate their 8-neighborhood and exceed
    ``min_rel`` times the global intensity peak."""
    from scipy.ndimage import maximum_filter

    inten = image.intensity().reshape(image.ny, image.nx)
    peak = maximum_filter(inten, size=3, mode="nearest")
    mask = (inten >= peak) & (inten >= min_rel * inten.max())
    return roi_pixels(image.roi)[mask.ravel()]


def save_image(path, image: Image) -> None:
    """Binary matrix dump with a JSON header (ROI bounds, pitch, pairs)."""
    header = {
        "bounds": list(image.roi.bounds),
        "pitch": image.roi.pixel_pitch,
        "nx": image.nx,
        "ny": image.ny,
        "pairs": [list(p) for p in image.pairs],
        "out_of_support": image.out_of_support,
    }
    np.savez(path, header=json.dumps(header), pixels=image.as_matrix())


def load_image(path) -> Image:
    data = np.load(path, allow_pickle=False)
    header = json.loads(str(data["header"]))
    xmin, xmax, ymin, ymax = header["bounds"]
    roi = RegionOfInterest(center=[(xmin + xmax) / 2, (ymin + ymax) / 2],
                           size_x=xmax - xmin, size_y=ymax - ymin,
                           pixel_pitch=header["pitch"])
    return Image(pixels=data["pixels"].ravel(), nx=header["nx"],
                 ny=header["ny"], roi=roi,
                 pairs=[tuple(p) for p in header["pairs"]],
                 out_of_support=header["out_of_support"])
