"""Per-cluster channel metrics.

Five numbers summarize each cluster:

  r_p          eigenvalue ratio of the angular co-kurtosis matrix;
               concentrated (single-ray) footprints score high
  k_t          kurtosis of tap magnitudes of the cluster's impulse response
  k_f          kurtosis of the magnitude frequency response
  tau_mean_ns  power-weighted mean excess delay
  tau_rms_ns   power-weighted rms delay spread

Kurtosis is the population ratio m4 / m2^2 of central moments; angular
moments are power-weighted over the cluster's pixels in degrees.
"""

from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DegenerateInputError
from .pas import CfrSlice, CirSlice, CirTensor, PasMap, cfr_from_cir
from .segmentation import Cluster

METRIC_NAMES = ("r_p", "k_t", "k_f", "tau_mean_ns", "tau_rms_ns")

# spread below this fraction of a squared pixel step counts as collapsed
_SPREAD_REL_TOL = 1e-12
# magnitude variance below this fraction of the squared mean is constant
_VARIANCE_REL_TOL = 1e-12
# tap gate: keep taps this far above the per-slice median power
_GATE_MARGIN_DB = 6.0


@dataclass(frozen=True)
class CoKurtosisMatrix:
    """Symmetric 2x2 angular moment matrix; axis 1 is azimuth, axis 2
    elevation."""

    rho11: float
    rho12: float
    rho22: float

    def as_array(self) -> np.ndarray:
        return np.array([[self.rho11, self.rho12],
                         [self.rho12, self.rho22]])


@dataclass(frozen=True)
class FeatureVector:
    r_p: float
    k_t: float
    k_f: float
    tau_mean_ns: float
    tau_rms_ns: float
    label: str | None = None

    def values(self) -> np.ndarray:
        """Metric values in canonical METRIC_NAMES order."""
        return np.array([self.r_p, self.k_t, self.k_f,
                         self.tau_mean_ns, self.tau_rms_ns])

    def metric(self, name: str) -> float:
        if name not in METRIC_NAMES:
            raise ConfigError(f"unknown metric {name!r}")
        return getattr(self, name)


@dataclass(frozen=True)
class MetricConfig:
    r_p_mode: str = "kurtosis"     # "kurtosis" or "covariance"
    aggregation: str = "peak"      # "peak" or "power_weighted"
    gate_taps: bool = False        # gate delay-domain metrics above the tap floor

    def __post_init__(self):
        if self.r_p_mode not in ("kurtosis", "covariance"):
            raise ConfigError(f"unknown r_p_mode {self.r_p_mode!r}")
        if self.aggregation not in ("peak", "power_weighted"):
            raise ConfigError(f"unknown aggregation {self.aggregation!r}")

    def to_dict(self) -> dict:
        return {"r_p_mode": self.r_p_mode, "aggregation": self.aggregation,
                "gate_taps": self.gate_taps}

    @classmethod
    def from_dict(cls, d: dict) -> "MetricConfig":
        unknown = set(d) - {f.name for f in cls.__dataclass_fields__.values()}
        if unknown:
            raise ConfigError(f"unknown MetricConfig fields: {sorted(unknown)}")
        return cls(**d)


def co_kurtosis(cluster: Cluster, pas: PasMap,
                mode: str = "kurtosis") -> CoKurtosisMatrix:
    """Power-weighted angular moment matrix of one cluster.

    mode "kurtosis" fills the matrix with normalized fourth moments
    (marginal kurtoses on the diagonal, the cross term off it); mode
    "covariance" returns the plain weighted covariance in the same
    container.  Both are invariant to scaling the power map.
    """
    if mode not in ("kurtosis", "covariance"):
        raise ConfigError(f"unknown co-kurtosis mode {mode!r}")
    pix = sorted(cluster.pixels)
    if len(pix) < 3:
        raise DegenerateInputError(
            f"cluster needs at least 3 pixels for angular moments, "
            f"got {len(pix)}")
    grid = pas.grid
    az_axis = grid.azimuths_deg
    el_axis = grid.elevations_deg
    el = np.array([el_axis[p[0]] for p in pix])
    az = np.array([az_axis[p[1]] for p in pix])
    if grid.wraps_azimuth:
        # measure azimuth relative to the peak so a seam-straddling
        # cluster stays contiguous on the angle axis
        ref = az_axis[cluster.peak_pixel[1]]
        az = (az - ref + 180.0) % 360.0 - 180.0
    if len(set(az.tolist())) < 2 or len(set(el.tolist())) < 2:
        raise DegenerateInputError(
            "cluster spans fewer than 2 distinct angles on an axis")

    w = np.array([pas.power[p] for p in pix], dtype=float)
    total = w.sum()
    if total <= 0.0:
        raise DegenerateInputError("cluster carries no power")
    w = w / total

    daz = az - np.dot(w, az)
    del_ = el - np.dot(w, el)
    s11 = np.dot(w, daz ** 2)
    s22 = np.dot(w, del_ ** 2)
    if s11 < _SPREAD_REL_TOL * grid.az_step_deg ** 2 \
            or s22 < _SPREAD_REL_TOL * grid.el_step_deg ** 2:
        raise DegenerateInputError(
            "cluster power is concentrated on a single angle; angular "
            "spread is numerically zero")
    if mode == "covariance":
        return CoKurtosisMatrix(rho11=float(s11),
                                rho12=float(np.dot(w, daz * del_)),
                                rho22=float(s22))
    m4a = np.dot(w, daz ** 4)
    m4e = np.dot(w, del_ ** 4)
    m22 = np.dot(w, daz ** 2 * del_ ** 2)
    return CoKurtosisMatrix(rho11=float(m4a / s11 ** 2),
                            rho12=float(m22 / (s11 * s22)),
                            rho22=float(m4e / s22 ** 2))


def eigen_ratio(matrix: CoKurtosisMatrix) -> float:
    """min/max eigenvalue ratio of the 2x2 symmetric moment matrix."""
    a, b, c = matrix.rho11, matrix.rho12, matrix.rho22
    half_trace = 0.5 * (a + c)
    disc = np.hypot(0.5 * (a - c), b)
    lo, hi = half_trace - disc, half_trace + disc
    if hi == 0.0:
        raise DegenerateInputError("moment matrix has no nonzero eigenvalue")
    return float(lo / hi)


def _magnitude_kurtosis(mag: np.ndarray, what: str) -> float:
    mean = float(np.mean(mag))
    dev = mag - mean
    m2 = float(np.mean(dev ** 2))
    if m2 <= 0.0 or m2 < _VARIANCE_REL_TOL * mean ** 2:
        raise DegenerateInputError(
            f"{what} magnitudes are effectively constant; kurtosis undefined")
    m4 = float(np.mean(dev ** 4))
    return m4 / m2 ** 2


def time_kurtosis(pixel: CirSlice) -> float:
    """Kurtosis of tap magnitudes of one beam direction."""
    if pixel.n_taps < 8:
        raise DegenerateInputError(
            f"need at least 8 taps for a magnitude kurtosis, got {pixel.n_taps}")
    return _magnitude_kurtosis(np.abs(np.asarray(pixel.taps)), "tap")


def freq_kurtosis(cfr: CfrSlice) -> float:
    """Kurtosis of the magnitude frequency response of one beam direction."""
    return _magnitude_kurtosis(np.abs(np.asarray(cfr.values)), "frequency-bin")


def _delay_stats(mag: np.ndarray, delays: np.ndarray) -> tuple[float, float]:
    p = mag ** 2
    total = p.sum()
    if total <= 0.0:
        raise DegenerateInputError("slice carries no energy; delays undefined")
    mean = float(np.dot(p, delays) / total)
    var = float(np.dot(p, (delays - mean) ** 2) / total)
    return mean, float(np.sqrt(max(var, 0.0)))


def mean_excess_delay(pixel: CirSlice) -> float:
    """Power-weighted mean tap delay, nanoseconds from the record start."""
    mag = np.abs(np.asarray(pixel.taps))
    return _delay_stats(mag, pixel.delays_ns)[0]


def rms_delay_spread(pixel: CirSlice) -> float:
    """Power-weighted standard deviation of tap delay, nanoseconds."""
    mag = np.abs(np.asarray(pixel.taps))
    return _delay_stats(mag, pixel.delays_ns)[1]


def _gate(mag: np.ndarray) -> np.ndarray:
    """Keep taps above the per-slice median power plus a margin.  The median
    tracks the noise-only level because signal occupies few taps."""
    p = mag ** 2
    floor = np.median(p)
    keep = p >= floor * 10.0 ** (_GATE_MARGIN_DB / 10.0)
    return keep if floor > 0.0 else p > 0.0


def _pixel_delay_metrics(pixel: CirSlice, gate_taps: bool):
    mag = np.abs(np.asarray(pixel.taps))
    delays = pixel.delays_ns
    if gate_taps:
        keep = _gate(mag)
        mag, delays = mag[keep], delays[keep]
        if len(mag) < 8:
            raise DegenerateInputError(
                f"tap gate left {len(mag)} taps, need at least 8")
    k_t = _magnitude_kurtosis(mag, "tap")
    tau_mean, tau_rms = _delay_stats(mag, delays)
    return k_t, tau_mean, tau_rms


def cluster_features(cluster: Cluster, cir: CirTensor, pas: PasMap,
                     config: MetricConfig = MetricConfig()) -> FeatureVector:
    """All five metrics for one segmented cluster.

    The angular metric always uses the whole pixel set.  The delay and
    frequency metrics come from the peak pixel's impulse response, or, with
    aggregation "power_weighted", from the power-weighted average of the
    per-pixel values across the cluster.
    """
    try:
        r_p = eigen_ratio(co_kurtosis(cluster, pas, config.r_p_mode))
        if config.aggregation == "peak":
            k_t, tau_mean, tau_rms = _pixel_delay_metrics(
                cir.pixel(*cluster.peak_pixel), config.gate_taps)
            k_f = freq_kurtosis(cfr_from_cir(cir.pixel(*cluster.peak_pixel)))
        else:
            pix = sorted(cluster.pixels)
            w = np.array([pas.power[p] for p in pix], dtype=float)
            w = w / w.sum()
            rows = []
            for p in pix:
                s = cir.pixel(*p)
                k_t_p, tm_p, tr_p = _pixel_delay_metrics(s, config.gate_taps)
                rows.append((k_t_p, tm_p, tr_p, freq_kurtosis(cfr_from_cir(s))))
            agg = w @ np.array(rows)
            k_t, tau_mean, tau_rms, k_f = (float(v) for v in agg)
    except DegenerateInputError as exc:
        raise DegenerateInputError(f"cluster {cluster.id}: {exc}") from exc
    return FeatureVector(r_p=float(r_p), k_t=float(k_t), k_f=float(k_f),
                         tau_mean_ns=float(tau_mean), tau_rms_ns=float(tau_rms),
                         label=cluster.truth)
