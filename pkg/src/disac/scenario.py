"""Network geometry: access points, UEs, region of interest, targets.

All positions are 2D, in meters.  Angles follow one convention: the global
bearing of a point seen from an AP is measured from the +x axis, and the
local array angle is ``theta = bearing - ap.orientation`` (broadside at 0).
"""

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.constants import c as SPEED_OF_LIGHT

from .errors import ConfigurationError, GeometryError
from .grid import GridConfig, make_grid

__all__ = [
    "SPEED_OF_LIGHT",
    "AccessPoint",
    "UserEquipment",
    "RegionOfInterest",
    "Target",
    "Scenario",
    "steering_vector",
    "bistatic_delay",
    "roi_delay_extrema",
    "roi_pixels",
    "make_lattice_scenario",
    "dbm_to_watt",
]


def dbm_to_watt(dbm: float) -> float:
    return 10.0 ** ((dbm - 30.0) / 10.0)


@dataclass
class AccessPoint:
    """ULA node; element spacing is half the carrier wavelength."""

    position: np.ndarray        # (2,) [m]
    orientation: float          # psi_n [rad]
    n_antennas: int

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.n_antennas < 1:
            raise ConfigurationError("AP needs at least one antenna")


@dataclass
class UserEquipment:
    position: np.ndarray        # (2,) [m]

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)


@dataclass
class RegionOfInterest:
    """Axis-aligned imaging rectangle sampled on a regular pixel grid."""

    center: np.ndarray          # (2,) [m]
    size_x: float
    size_y: float
    pixel_pitch: float

    def __post_init__(self):
        self.center = np.asarray(self.center, dtype=float)
        if self.size_x <= 0 or self.size_y <= 0 or self.pixel_pitch <= 0:
            raise ConfigurationError("ROI size and pitch must be positive")

    @property
    def n_pixels_x(self) -> int:
        return max(1, int(round(self.size_x / self.pixel_pitch)))

    @property
    def n_pixels_y(self) -> int:
        return max(1, int(round(self.size_y / self.pixel_pitch)))

    @property
    def bounds(self) -> tuple[float, float, float, float]:
        """(xmin, xmax, ymin, ymax)."""
        cx, cy = self.center
        return (cx - self.size_x / 2, cx + self.size_x / 2,
                cy - self.size_y / 2, cy + self.size_y / 2)

    def contains(self, point) -> bool:
        x, y = np.asarray(point, dtype=float)
        xmin, xmax, ymin, ymax = self.bounds
        return xmin <= x <= xmax and ymin <= y <= ymax

    def corners(self) -> np.ndarray:
        xmin, xmax, ymin, ymax = self.bounds
        return np.array([[xmin, ymin], [xmin, ymax], [xmax, ymin], [xmax, ymax]])


@dataclass
class Target:
    """Point scatterer; the reflection phase is common to every AP pair."""

    position: np.ndarray        # (2,) [m]
    rcs: float = 1.0            # radar-cross-section-like magnitude scale [m^2]
    phase: float = 0.0          # [rad]

    def __post_init__(self):
        self.position = np.asarray(self.position, dtype=float)
        if self.rcs < 0:
            raise ConfigurationError("target rcs must be nonnegative")


@dataclass
class Scenario:
    """Immutable-by-convention container for one network realization."""

    aps: list
    ues: list
    roi: RegionOfInterest
    targets: list
    f0: float                   # carrier [Hz]
    noise_psd_dbm_hz: float
    tx_power_w: float           # P, per subcarrier, network-wide per UE [W]
    grid: GridConfig
    eta: float = 0.5
    area_size: float = 20.0     # deployment square side [m], used for UE draws

    def __post_init__(self):
        n, l = len(self.aps), self.aps[0].n_antennas
        if len(self.ues) > n * l:
            raise ConfigurationError(
                f"Q={len(self.ues)} exceeds N*L={n * l}")
        if not 0.0 <= self.eta <= 1.0:
            raise ConfigurationError(f"eta must lie in [0,1], got {self.eta}")
        for t in self.targets:
            if not self.roi.contains(t.position):
                raise ConfigurationError(
                    f"target at {t.position} lies outside the ROI")

    @property
    def wavelength(self) -> float:
        return SPEED_OF_LIGHT / self.f0

    @property
    def n_aps(self) -> int:
        return len(self.aps)

    @property
    def n_ues(self) -> int:
        return len(self.ues)

    @property
    def noise_var(self) -> float:
        """Per-bin noise variance sigma^2 = PSD * delta_f, same at UEs and APs."""
        return dbm_to_watt(self.noise_psd_dbm_hz) * self.grid.subcarrier_spacing


def steering_vector(ap: AccessPoint, point, f0: float | None = None) -> np.ndarray:
    """ULA response toward ``point``: element u carries exp(-j*pi*u*sin(theta)).

    ``point`` may be a single (2,) position or an (n, 2) batch; the result is
    (L,) or (n, L).  Entries are unit modulus by construction.
    """
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    delta = pts - ap.position[None, :]
    rng = np.hypot(delta[:, 0], delta[:, 1])
    if np.any(rng == 0.0):
        raise GeometryError(f"direction point coincides with AP at {ap.position}")
    bearing = np.arctan2(delta[:, 1], delta[:, 0])
    theta = bearing - ap.orientation
    u = np.arange(ap.n_antennas)
    a = np.exp(-1j * np.pi * np.sin(theta)[:, None] * u[None, :])
    return a[0] if np.asarray(point).ndim == 1 else a


def bistatic_delay(tx: AccessPoint, rx: AccessPoint, point) -> np.ndarray | float:
    """Two-way delay tx -> point -> rx in seconds; vectorized over points."""
    pts = np.atleast_2d(np.asarray(point, dtype=float))
    d = (np.linalg.norm(pts - tx.position[None, :], axis=1)
         + np.linalg.norm(rx.position[None, :] - pts, axis=1))
    tau = d / SPEED_OF_LIGHT
    return float(tau[0]) if np.asarray(point).ndim == 1 else tau


def _segment_intersects_rect(p0, p1, bounds) -> bool:
    """Liang-Barsky clip test for the segment p0-p1 against the rectangle."""
    xmin, xmax, ymin, ymax = bounds
    d = p1 - p0
    t0, t1 = 0.0, 1.0
    for delta, lo, hi in ((d[0], xmin - p0[0], xmax - p0[0]),
                          (d[1], ymin - p0[1], ymax - p0[1])):
        if delta == 0.0:
            if lo > 0 or hi < 0:
                return False
            continue
        ta, tb = lo / delta, hi / delta
        if ta > tb:
            ta, tb = tb, ta
        t0, t1 = max(t0, ta), min(t1, tb)
        if t0 > t1:
            return False
    return True


def roi_delay_extrema(tx: AccessPoint, other: AccessPoint,
                      roi: RegionOfInterest) -> tuple[float, float]:
    """Min and max bistatic delay over the ROI for the (tx, other) pair.

    The delay is a convex function of the pixel position, so the maximum is
    attained at one of the four corners (evaluated exactly).  The minimum is
    ``|p_tx - p_other| / c`` whenever the inter-AP segment crosses the ROI;
    otherwise it lies on the boundary, which is sampled densely.
    """
    corners = roi.corners()
    tau_max = float(np.max(bistatic_delay(tx, other, corners)))

    if _segment_intersects_rect(tx.position, other.position, roi.bounds):
        tau_min = float(np.linalg.norm(tx.position - other.position)) / SPEED_OF_LIGHT
    else:
        xmin, xmax, ymin, ymax = roi.bounds
        n = max(64, int(math.ceil(max(roi.size_x, roi.size_y) / 1e-3)))
        ts = np.linspace(0.0, 1.0, n)
        edges = [
            np.stack([xmin + (xmax - xmin) * ts, np.full(n, ymin)], axis=1),
            np.stack([xmin + (xmax - xmin) * ts, np.full(n, ymax)], axis=1),
            np.stack([np.full(n, xmin), ymin + (ymax - ymin) * ts], axis=1),
            np.stack([np.full(n, xmax), ymin + (ymax - ymin) * ts], axis=1),
        ]
        boundary = np.concatenate(edges, axis=0)
        interior = roi_pixels(roi)
        cand = np.concatenate([boundary, interior, corners], axis=0)
        tau_min = float(np.min(bistatic_delay(tx, other, cand)))
    return tau_min, tau_max


def roi_pixels(roi: RegionOfInterest) -> np.ndarray:
    """Row-major (ny*nx, 2) grid of pixel centers covering the ROI."""
    nx, ny = roi.n_pixels_x, roi.n_pixels_y
    cx, cy = roi.center
    xs = cx + (np.arange(nx) - (nx - 1) / 2.0) * roi.pixel_pitch
    ys = cy + (np.arange(ny) - (ny - 1) / 2.0) * roi.pixel_pitch
    gx, gy = np.meshgrid(xs, ys)          # rows iterate y, columns x
    return np.stack([gx.ravel(), gy.ravel()], axis=1)


def make_lattice_scenario(
    n_aps: int = 9,
    n_antennas: int = 4,
    *,
    area_size: float = 20.0,
    f0: float = 10e9,
    bandwidth: float = 100e6,
    n_subcarriers: int = 512,
    n_symbols: int = 4,
    cp_fraction: float = 0.0,
    roi_center=(-5.0, -5.0),
    roi_size=(5.0, 5.0),
    pixel_pitch: float = 0.05,
    n_ues: int = 2,
    n_targets: int = 1,
    target_rcs: float = 10.0,
    eta: float = 0.5,
    tx_power_dbm_ref: float = -15.0,
    ref_subcarriers: int = 128,
    noise_psd_dbm_hz: float = -173.0,
    orientation: str = "roi",
    rng=None,
) -> Scenario:
    """Regular sqrt(N) x sqrt(N) AP lattice spanning a square area.

    Arrays face the ROI center by default (``orientation="roi"``), which
    keeps the conjugate ROI-beam phase common across APs so pair images fuse
    coherently; ``orientation="area"`` faces the area center instead.  The
    transmit power per subcarrier keeps the spectral density constant:
    P = P_ref * M / M_ref.  The first target sits at the ROI center; UEs
    (and any extra targets) are drawn uniformly, UEs outside the ROI.
    """
    side = int(round(math.sqrt(n_aps)))
    if side * side != n_aps:
        raise ConfigurationError(f"lattice needs a square AP count, got {n_aps}")
    if orientation not in ("roi", "area"):
        raise ConfigurationError("orientation must be 'roi' or 'area'")
    rng = np.random.default_rng(rng)
    half = area_size / 2
    coords = np.linspace(-half, half, side) if side > 1 else np.array([0.0])
    look_at = np.asarray(roi_center, dtype=float) if orientation == "roi" \
        else np.zeros(2)
    aps = []
    for y in coords:
        for x in coords:
            pos = np.array([x, y])
            d = look_at - pos
            psi = math.atan2(d[1], d[0]) if np.any(d) else 0.0
            aps.append(AccessPoint(position=pos, orientation=psi,
                                   n_antennas=n_antennas))

    roi = RegionOfInterest(center=np.asarray(roi_center, dtype=float),
                           size_x=float(roi_size[0]), size_y=float(roi_size[1]),
                           pixel_pitch=pixel_pitch)

    ues = []
    while len(ues) < n_ues:
        p = rng.uniform(-half, half, size=2)
        if not roi.contains(p):
            ues.append(UserEquipment(position=p))

    targets = []
    for i in range(n_targets):
        if i == 0:
            pos = roi.center.copy()
        else:
            xmin, xmax, ymin, ymax = roi.bounds
            margin = 0.05 * min(roi.size_x, roi.size_y)
            pos = rng.uniform([xmin + margin, ymin + margin],
                              [xmax - margin, ymax - margin])
        targets.append(Target(position=pos, rcs=target_rcs,
                              phase=float(rng.uniform(0, 2 * math.pi))))

    grid = make_grid(n_subcarriers, n_symbols, bandwidth, cp_fraction)
    p_w = dbm_to_watt(tx_power_dbm_ref) * n_subcarriers / ref_subcarriers
    return Scenario(aps=aps, ues=ues, roi=roi, targets=targets, f0=f0,
                    noise_psd_dbm_hz=noise_psd_dbm_hz, tx_power_w=p_w,
                    grid=grid, eta=eta, area_size=area_size)
