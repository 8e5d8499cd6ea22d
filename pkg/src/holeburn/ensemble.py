"""Inhomogeneous ensemble of ion classes and its absorption spectrum.

A class is the set of ions whose g1 -> e1 transition sits at one frequency
offset from the optical line center.  Classes are laid out on a uniform
grid; their statistical weights follow a configurable inhomogeneous profile.
The optical depth seen by a weak probe is the weighted sum, over classes and
over the four transitions of each class, of the lower-minus-upper population
difference times a Lorentzian line of the probe-limited width.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import GridMismatchError
from .levels import RateParams, TransitionSet, ZeemanConfig, transition_set

__all__ = [
    "InhomogeneousProfile",
    "EnsembleState",
    "Spectrum",
    "SpectralFeature",
    "GridResolutionWarning",
    "build_ensemble",
    "absorbance",
    "readout_scan",
    "hole_area",
    "predicted_features",
]

PROFILE_SHAPES = ("gaussian", "lorentzian", "flat")


class GridResolutionWarning(UserWarning):
    """The class grid is too coarse to resolve the level splittings."""


@dataclass(frozen=True)
class InhomogeneousProfile:
    """Shape and discretisation of the inhomogeneous line.

    The class grid spans center +- grid_span/2 with uniform step grid_step;
    fwhm_MHz is ignored for the flat shape.
    """

    center_MHz: float = 0.0
    fwhm_MHz: float = 1000.0
    shape: str = "flat"
    grid_span_MHz: float = 500.0
    grid_step_MHz: float = 0.5

    def __post_init__(self):
        if self.shape not in PROFILE_SHAPES:
            raise ValueError(f"shape must be one of {PROFILE_SHAPES}, got {self.shape!r}")
        if self.grid_step_MHz <= 0:
            raise ValueError("grid_step_MHz must be > 0")
        if self.grid_span_MHz < 10.0 * self.grid_step_MHz:
            raise ValueError("grid_span_MHz must be at least 10 grid steps")
        if self.shape != "flat" and self.fwhm_MHz <= 0:
            raise ValueError("fwhm_MHz must be > 0")

    def weights(self, centers_MHz: np.ndarray) -> np.ndarray:
        x = np.asarray(centers_MHz, dtype=float) - self.center_MHz
        if self.shape == "flat":
            return np.ones_like(x)
        if self.shape == "gaussian":
            sigma = self.fwhm_MHz / (2.0 * np.sqrt(2.0 * np.log(2.0)))
            return np.exp(-0.5 * (x / sigma) ** 2)
        hw2 = (0.5 * self.fwhm_MHz) ** 2
        return hw2 / (x * x + hw2)


@dataclass
class Spectrum:
    """Optical depth and transmission on a frequency grid."""

    freqs_MHz: np.ndarray
    optical_depth: np.ndarray
    transmission: np.ndarray = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        self.freqs_MHz = np.asarray(self.freqs_MHz, dtype=float)
        self.optical_depth = np.asarray(self.optical_depth, dtype=float)
        if self.freqs_MHz.shape != self.optical_depth.shape:
            raise ValueError("frequency and optical-depth grids differ in shape")
        expected = np.exp(-self.optical_depth)
        if self.transmission is None:
            self.transmission = expected
        else:
            self.transmission = np.asarray(self.transmission, dtype=float)
            if np.max(np.abs(self.transmission - expected)) > 1e-12:
                raise ValueError("transmission is not exp(-optical_depth)")

    def to_csv(self, path) -> None:
        with open(path, "w") as fh:
            fh.write("freq_MHz,optical_depth,transmission\n")
            for f, od, tr in zip(self.freqs_MHz, self.optical_depth, self.transmission):
                fh.write(f"{float(f)!r},{float(od)!r},{float(tr)!r}\n")

    @classmethod
    def from_csv(cls, path) -> "Spectrum":
        data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
        if data.shape[1] != 3:
            raise ValueError("spectrum CSV must have 3 columns")
        return cls(data[:, 0], data[:, 1], data[:, 2])


@dataclass(frozen=True)
class SpectralFeature:
    """A predicted hole or antihole position for a single pumped class."""

    freq_MHz: float
    kind: str  # "hole" or "antihole"
    overlapping: bool = False


@dataclass
class EnsembleState:
    """Mutable population bookkeeping for the whole class grid.

    populations has shape (n_classes, 5) with columns (g1, g2, e1, e2,
    persistent_bleached); rows sum to one.  probe_linewidth_MHz is the
    Lorentzian FWHM used both for readout and, by default, for the pump
    response.
    """

    config: ZeemanConfig
    params: RateParams
    profile: InhomogeneousProfile
    centers_MHz: np.ndarray
    weights: np.ndarray
    populations: np.ndarray
    probe_linewidth_MHz: float = 1.0

    @property
    def n_classes(self) -> int:
        return len(self.centers_MHz)

    @property
    def classes(self):
        """Per-class view as (center_MHz, weight, population row) tuples."""
        return list(zip(self.centers_MHz, self.weights, self.populations))

    def transition_freqs(self) -> np.ndarray:
        """Transition frequencies, shape (n_classes, 4)."""
        dg = self.config.delta_g_MHz
        de = self.config.delta_e_MHz
        c = self.centers_MHz
        return np.stack([c, c + de, c - dg, c - (dg - de)], axis=1)

    def copy(self) -> "EnsembleState":
        return EnsembleState(
            config=self.config,
            params=self.params,
            profile=self.profile,
            centers_MHz=self.centers_MHz,
            weights=self.weights,
            populations=self.populations.copy(),
            probe_linewidth_MHz=self.probe_linewidth_MHz,
        )


def build_ensemble(profile: InhomogeneousProfile,
                   config: ZeemanConfig,
                   params: RateParams,
                   target_od: float | None = 1.0,
                   probe_linewidth_MHz: float = 1.0) -> EnsembleState:
    """Construct a thermal ensemble on the profile's class grid.

    Every class starts with both ground sublevels equally occupied.  When
    ``target_od`` is given, the cross-section scale is recalibrated so the
    unpumped optical depth at the profile center equals it; pass None to
    keep ``params.sigma_scale`` as supplied.
    """
    if probe_linewidth_MHz <= 0:
        raise ValueError("probe_linewidth_MHz must be > 0")
    de = config.delta_e_MHz
    if de > 0 and profile.grid_step_MHz > de / 4.0:
        warnings.warn(
            f"grid step {profile.grid_step_MHz} MHz exceeds a quarter of the "
            f"excited splitting {de} MHz; side structure will be aliased",
            GridResolutionWarning,
            stacklevel=2,
        )

    half = profile.grid_span_MHz / 2.0
    n = int(round(profile.grid_span_MHz / profile.grid_step_MHz)) + 1
    centers = profile.center_MHz + np.linspace(-half, half, n)
    weights = profile.weights(centers)

    pops = np.zeros((n, 5))
    pops[:, 0] = 0.5
    pops[:, 1] = 0.5

    ens = EnsembleState(
        config=config,
        params=params,
        profile=profile,
        centers_MHz=centers,
        weights=weights,
        populations=pops,
        probe_linewidth_MHz=probe_linewidth_MHz,
    )
    if target_od is not None:
        if target_od <= 0:
            raise ValueError("target_od must be > 0")
        base = absorbance(ens, profile.center_MHz)
        if base <= 0:
            raise ValueError("thermal ensemble has no absorption at the profile center")
        ens.params = replace(params, sigma_scale=params.sigma_scale * target_od / base)
    return ens


def _optical_depth(ens: EnsembleState, freqs: np.ndarray) -> np.ndarray:
    """Weak-probe optical depth at the given frequencies.

    Computed as sigma * sum over classes and transitions of
    weight * (N_lower - N_upper) * unit-peak Lorentzian.  Inverted
    transitions contribute negative depth (gain).
    """
    trans = ens.transition_freqs()  # (n, 4)
    pops = ens.populations
    diff = np.stack(
        [pops[:, lo] - pops[:, up]
         for lo, up in zip(TransitionSet.LOWER, TransitionSet.UPPER)],
        axis=1,
    )  # (n, 4)
    amp = (ens.weights[:, None] * diff).ravel()
    f0 = trans.ravel()
    hw2 = (0.5 * ens.probe_linewidth_MHz) ** 2

    out = np.empty(len(freqs))
    # Chunk the probe axis to bound the temporary (n_freq, n_classes*4) block.
    step = max(1, int(4e6 / max(len(f0), 1)))
    for i in range(0, len(freqs), step):
        d = freqs[i:i + step, None] - f0[None, :]
        out[i:i + step] = (amp * (hw2 / (d * d + hw2))).sum(axis=1)
    return ens.params.sigma_scale * out


def absorbance(ens: EnsembleState, probe_MHz: float) -> float:
    """Optical depth alpha-L at a single probe frequency."""
    return float(_optical_depth(ens, np.array([float(probe_MHz)]))[0])


def readout_scan(ens: EnsembleState, f_start_MHz: float, f_stop_MHz: float,
                 n_points: int) -> Spectrum:
    """Snapshot transmission spectrum over a frequency window.

    The probe is treated as non-perturbative: populations are read, not
    driven, so the scan has no duration.
    """
    if n_points < 2:
        raise ValueError("n_points must be >= 2")
    if not f_stop_MHz > f_start_MHz:
        raise ValueError("f_stop_MHz must exceed f_start_MHz")
    freqs = np.linspace(f_start_MHz, f_stop_MHz, n_points)
    od = _optical_depth(ens, freqs)
    return Spectrum(freqs, od)


def hole_area(spectrum: Spectrum, baseline: Spectrum,
              window_MHz: tuple[float, float]) -> float:
    """Integrated depth of a hole: trapezoid of (baseline - current) depth.

    Positive for a hole, negative over an antihole.  Both spectra must share
    the same frequency grid.
    """
    if spectrum.freqs_MHz.shape != baseline.freqs_MHz.shape or not np.array_equal(
            spectrum.freqs_MHz, baseline.freqs_MHz):
        raise GridMismatchError("spectrum and baseline are on different frequency grids")
    lo, hi = window_MHz
    if not hi > lo:
        raise ValueError("window must satisfy hi > lo")
    mask = (spectrum.freqs_MHz >= lo) & (spectrum.freqs_MHz <= hi)
    if mask.sum() < 2:
        raise ValueError("window contains fewer than two grid points")
    f = spectrum.freqs_MHz[mask]
    d = baseline.optical_depth[mask] - spectrum.optical_depth[mask]
    return float(np.trapezoid(d, f))


def predicted_features(pump_MHz: float, config: ZeemanConfig) -> list[SpectralFeature]:
    """Hole and antihole positions for the class pumped on its g1 -> e1 line.

    Holes appear on both transitions sharing the depleted ground level,
    antiholes on the two transitions from the enriched one.  When the two
    splittings coincide, the antihole at pump - (dg - de) lands on the pump
    hole and both entries are flagged as overlapping.
    """
    ts = transition_set(pump_MHz, config)
    feats = [
        SpectralFeature(ts.f1_MHz, "hole"),
        SpectralFeature(ts.f2_MHz, "hole"),
        SpectralFeature(ts.f3_MHz, "antihole"),
        SpectralFeature(ts.f4_MHz, "antihole"),
    ]
    freqs = [f.freq_MHz for f in feats]
    out = []
    for i, feat in enumerate(feats):
        overlap = any(
            j != i and abs(freqs[j] - feat.freq_MHz) < 1e-9 for j in range(len(feats))
        )
        out.append(replace(feat, overlapping=overlap))
    return out
