"""Core value types for multitemporal hyperspectral data and the on-disk dataset format.

All container types are frozen dataclasses holding float32 arrays; they are
treated as immutable after construction and are safe for concurrent reads.
Disk layout is a directory with a ``meta.json`` plus raw little-endian
float32 rasters, one file per phase (see `save_bundle`).
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from pathlib import Path
from typing import NamedTuple

import numpy as np

# Tolerances for the abundance constraints: softmax-built maps meet these,
# stricter values fail under accumulated float32 rounding.
ASC_TOL = 1e-5
ANC_SLACK = 1e-7

STORAGE_DTYPE = np.dtype("<f4")


class FormatError(ValueError):
    """Dataset directory or raster file does not match its declared layout."""


class ValidationError(ValueError):
    """Data violates a type invariant (non-finite values, constraint breach...)."""


def _require_finite(name: str, arr: np.ndarray) -> None:
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")


def _as_f32(arr) -> np.ndarray:
    return np.ascontiguousarray(arr, dtype=STORAGE_DTYPE)


@dataclass(frozen=True, eq=False)
class HyperCubeSequence:
    """Observed reflectance sequence, shape (T, L, H, W)."""

    data: np.ndarray
    wavelengths: tuple[float, ...] | None = None
    phase_labels: tuple[str, ...] | None = None

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32(self.data))
        if self.data.ndim != 4:
            raise ValidationError(f"cube must be (T, L, H, W), got shape {self.data.shape}")
        t, l, h, w = self.data.shape
        if t < 1 or l < 2 or h < 1 or w < 1:
            raise ValidationError(f"invalid cube dimensions T={t} L={l} H={h} W={w}")
        _require_finite("cube data", self.data)
        if self.wavelengths is not None:
            object.__setattr__(self, "wavelengths", tuple(float(x) for x in self.wavelengths))
            if len(self.wavelengths) != l:
                raise ValidationError(f"wavelength list length {len(self.wavelengths)} != L={l}")
        if self.phase_labels is not None:
            object.__setattr__(self, "phase_labels", tuple(str(x) for x in self.phase_labels))
            if len(self.phase_labels) != t:
                raise ValidationError(f"phase label list length {len(self.phase_labels)} != T={t}")

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def L(self) -> int:
        return self.data.shape[1]

    @property
    def H(self) -> int:
        return self.data.shape[2]

    @property
    def W(self) -> int:
        return self.data.shape[3]

    @property
    def N(self) -> int:
        return self.H * self.W

    def flat(self) -> np.ndarray:
        """Pixel-flattened view, shape (T, L, N), row-major pixel order."""
        return self.data.reshape(self.T, self.L, self.N)


@dataclass(frozen=True, eq=False)
class EndmemberSet:
    """Per-phase endmember matrices (T, L, P); columns are spectra.

    `per_pixel`, when present (ground truth with spectral variability),
    has shape (T, N, L, P) in row-major pixel order.
    """

    per_phase: np.ndarray
    per_pixel: np.ndarray | None = None

    def __post_init__(self):
        object.__setattr__(self, "per_phase", _as_f32(self.per_phase))
        if self.per_phase.ndim != 3:
            raise ValidationError(f"per-phase endmembers must be (T, L, P), got {self.per_phase.shape}")
        _require_finite("endmembers", self.per_phase)
        if np.any(self.per_phase < 0):
            raise ValidationError("endmember spectra must be nonnegative")
        norms = np.linalg.norm(self.per_phase.astype(np.float64), axis=1)
        if np.any(norms == 0):
            raise ValidationError("endmember columns must have nonzero norm")
        if self.per_pixel is not None:
            object.__setattr__(self, "per_pixel", _as_f32(self.per_pixel))
            if self.per_pixel.ndim != 4:
                raise ValidationError(f"per-pixel endmembers must be (T, N, L, P), got {self.per_pixel.shape}")
            t, l, p = self.per_phase.shape
            if self.per_pixel.shape[0] != t or self.per_pixel.shape[2:] != (l, p):
                raise ValidationError("per-pixel endmember dims disagree with per-phase matrices")
            _require_finite("per-pixel endmembers", self.per_pixel)
            if np.any(self.per_pixel < 0):
                raise ValidationError("per-pixel endmember spectra must be nonnegative")

    @property
    def T(self) -> int:
        return self.per_phase.shape[0]

    @property
    def L(self) -> int:
        return self.per_phase.shape[1]

    @property
    def P(self) -> int:
        return self.per_phase.shape[2]


@dataclass(frozen=True, eq=False)
class AbundanceSequence:
    """Abundance fractions, shape (T, P, H, W).

    Valid instances satisfy ANC (entries >= -1e-7) and ASC (per-pixel sums
    within 1e-5 of one); use `validate_abundance` to check.
    """

    data: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "data", _as_f32(self.data))
        if self.data.ndim != 4:
            raise ValidationError(f"abundances must be (T, P, H, W), got {self.data.shape}")
        _require_finite("abundances", self.data)

    @property
    def T(self) -> int:
        return self.data.shape[0]

    @property
    def P(self) -> int:
        return self.data.shape[1]

    @property
    def H(self) -> int:
        return self.data.shape[2]

    @property
    def W(self) -> int:
        return self.data.shape[3]

    def flat(self) -> np.ndarray:
        """Pixel-flattened view, shape (T, P, N)."""
        t, p, h, w = self.data.shape
        return self.data.reshape(t, p, h * w)


class Violation(NamedTuple):
    t: int
    pixel: int
    kind: str  # "anc" or "asc"
    magnitude: float


def _constraint_violations(a: np.ndarray, anc_tol: float, asc_tol: float) -> list[Violation]:
    t_dim, p_dim, h, w = a.shape
    flat = a.reshape(t_dim, p_dim, h * w).astype(np.float64)
    out: list[Violation] = []
    worst_neg = flat.min(axis=1)  # (T, N)
    sums = flat.sum(axis=1)
    for t in range(t_dim):
        bad_anc = np.flatnonzero(worst_neg[t] < -anc_tol)
        for n in bad_anc:
            out.append(Violation(t, int(n), "anc", float(-worst_neg[t, n])))
        bad_asc = np.flatnonzero(np.abs(sums[t] - 1.0) > asc_tol)
        for n in bad_asc:
            out.append(Violation(t, int(n), "asc", float(abs(sums[t, n] - 1.0))))
    return out


def validate_abundance(a: AbundanceSequence | np.ndarray, tol: float = ASC_TOL) -> list[Violation]:
    """Report all ANC/ASC breaches beyond `tol`, one entry per (phase, pixel, kind).

    Empty list iff every entry is >= -tol and every per-pixel sum is within
    +-tol of one. Pixel indices are row-major (n = i*W + j).
    """
    data = a.data if isinstance(a, AbundanceSequence) else np.asarray(a)
    return _constraint_violations(data, tol, tol)


@dataclass(frozen=True, eq=False)
class DatasetBundle:
    """Observed sequence plus optional ground truth and generation metadata."""

    observed: HyperCubeSequence
    gt_endmembers: EndmemberSet | None = None
    gt_abundances: AbundanceSequence | None = None
    noise_snr_db: float | None = None
    seed: int = 0

    def __post_init__(self):
        t, l = self.observed.T, self.observed.L
        if self.gt_endmembers is not None:
            if self.gt_endmembers.T != t or self.gt_endmembers.L != l:
                raise ValidationError("ground-truth endmember dims disagree with observed cube")
            if self.gt_endmembers.per_pixel is not None and self.gt_endmembers.per_pixel.shape[1] != self.observed.N:
                raise ValidationError("per-pixel endmember pixel count disagrees with observed cube")
        if self.gt_abundances is not None:
            if (self.gt_abundances.T != t or self.gt_abundances.H != self.observed.H
                    or self.gt_abundances.W != self.observed.W):
                raise ValidationError("ground-truth abundance dims disagree with observed cube")
        if self.gt_endmembers is not None and self.gt_abundances is not None:
            if self.gt_endmembers.P != self.gt_abundances.P:
                raise ValidationError("ground-truth endmember/abundance P disagree")

    @property
    def P(self) -> int | None:
        if self.gt_endmembers is not None:
            return self.gt_endmembers.P
        if self.gt_abundances is not None:
            return self.gt_abundances.P
        return None


def _read_raster(path: Path, shape: tuple[int, ...]) -> np.ndarray:
    if not path.is_file():
        raise FormatError(f"missing raster file: {path.name}")
    raw = path.read_bytes()
    expected = int(np.prod(shape)) * STORAGE_DTYPE.itemsize
    if len(raw) != expected:
        raise FormatError(
            f"raster {path.name}: expected {expected} bytes for shape {shape}, found {len(raw)}")
    return np.frombuffer(raw, dtype=STORAGE_DTYPE).reshape(shape)


def save_bundle(bundle: DatasetBundle, path) -> None:
    """Write `bundle` to a directory; bit-exact float32, deterministic bytes."""
    out = Path(path)
    out.mkdir(parents=True, exist_ok=True)
    obs = bundle.observed
    meta = {
        "T": obs.T,
        "L": obs.L,
        "H": obs.H,
        "W": obs.W,
        "seed": int(bundle.seed),
        "has_gt_endmembers": bundle.gt_endmembers is not None,
        "has_gt_abundances": bundle.gt_abundances is not None,
        "has_per_pixel_endmembers": (bundle.gt_endmembers is not None
                                     and bundle.gt_endmembers.per_pixel is not None),
    }
    if bundle.P is not None:
        meta["P"] = int(bundle.P)
    if bundle.noise_snr_db is not None and np.isfinite(bundle.noise_snr_db):
        meta["noise_snr_db"] = float(bundle.noise_snr_db)
    if obs.wavelengths is not None:
        meta["wavelengths"] = list(obs.wavelengths)
    (out / "meta.json").write_bytes(
        (json.dumps(meta, sort_keys=True, indent=2) + "\n").encode())

    for t in range(obs.T):
        (out / f"phase_{t:02d}.f32").write_bytes(_as_f32(obs.data[t]).tobytes())
    if bundle.gt_endmembers is not None:
        em = bundle.gt_endmembers
        for t in range(obs.T):
            (out / f"gt_endmembers_{t:02d}.f32").write_bytes(_as_f32(em.per_phase[t]).tobytes())
        if em.per_pixel is not None:
            for t in range(obs.T):
                px = em.per_pixel[t].reshape(obs.H, obs.W, obs.L, em.P)
                (out / f"gt_endmembers_px_{t:02d}.f32").write_bytes(_as_f32(px).tobytes())
    if bundle.gt_abundances is not None:
        for t in range(obs.T):
            (out / f"gt_abundance_{t:02d}.f32").write_bytes(
                _as_f32(bundle.gt_abundances.data[t]).tobytes())


def load_bundle(path) -> DatasetBundle:
    """Load a dataset directory written by `save_bundle`, validating invariants."""
    src = Path(path)
    meta_path = src / "meta.json"
    if not meta_path.is_file():
        raise FormatError(f"missing meta.json in {src}")
    try:
        meta = json.loads(meta_path.read_text())
    except json.JSONDecodeError as exc:
        raise FormatError(f"meta.json is not valid JSON: {exc}") from exc
    try:
        t_dim, l_dim, h, w = int(meta["T"]), int(meta["L"]), int(meta["H"]), int(meta["W"])
    except KeyError as exc:
        raise FormatError(f"meta.json missing required key {exc}") from exc

    phases = np.stack([_read_raster(src / f"phase_{t:02d}.f32", (l_dim, h, w))
                       for t in range(t_dim)])
    observed = HyperCubeSequence(
        phases,
        wavelengths=tuple(meta["wavelengths"]) if "wavelengths" in meta else None)

    gt_endmembers = None
    if meta.get("has_gt_endmembers"):
        p_dim = int(meta["P"])
        per_phase = np.stack([_read_raster(src / f"gt_endmembers_{t:02d}.f32", (l_dim, p_dim))
                              for t in range(t_dim)])
        per_pixel = None
        if meta.get("has_per_pixel_endmembers"):
            per_pixel = np.stack([
                _read_raster(src / f"gt_endmembers_px_{t:02d}.f32", (h, w, l_dim, p_dim))
                .reshape(h * w, l_dim, p_dim)
                for t in range(t_dim)])
        gt_endmembers = EndmemberSet(per_phase, per_pixel)

    gt_abundances = None
    if meta.get("has_gt_abundances"):
        p_dim = int(meta["P"])
        amaps = np.stack([_read_raster(src / f"gt_abundance_{t:02d}.f32", (p_dim, h, w))
                          for t in range(t_dim)])
        gt_abundances = AbundanceSequence(amaps)
        bad = _constraint_violations(gt_abundances.data, ANC_SLACK, ASC_TOL)
        if bad:
            v = bad[0]
            raise ValidationError(
                f"ground-truth abundances violate {v.kind} at phase {v.t}, pixel {v.pixel} "
                f"(magnitude {v.magnitude:.3g}; {len(bad)} violations total)")

    return DatasetBundle(
        observed=observed,
        gt_endmembers=gt_endmembers,
        gt_abundances=gt_abundances,
        noise_snr_db=meta.get("noise_snr_db"),
        seed=int(meta.get("seed", 0)),
    )
