"""Seeded generators for the two synthetic multitemporal unmixing benchmarks.

Both recipes are pure functions of (config, seed). Randomness is drawn from
named `SeedSequence` child streams, so per-phase parallelism cannot change
the output and every bundle is byte-reproducible.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.ndimage import gaussian_filter

from .datamodel import (AbundanceSequence, DatasetBundle, EndmemberSet,
                        HyperCubeSequence, ValidationError)

# Smooth stand-in signatures: each class is a baseline plus Gaussian bumps
# (center, amplitude, width) over the normalized band axis.
_CLASS_TEMPLATES: dict[str, tuple[float, tuple[tuple[float, float, float], ...]]] = {
    "water": (0.04, ((0.06, 0.50, 0.09), (0.22, 0.18, 0.10))),
    "vegetation": (0.05, ((0.28, 0.12, 0.05), (0.70, 0.55, 0.16), (0.95, 0.25, 0.10))),
    "soil": (0.12, ((0.55, 0.28, 0.28), (0.90, 0.22, 0.15))),
    "road": (0.22, ((0.45, 0.18, 0.40),)),
}

BUILTIN_CLASS_NAMES = tuple(_CLASS_TEMPLATES)


def _stream(seed: int, *key: int) -> np.random.Generator:
    """Independent, named child stream of the bundle seed."""
    return np.random.default_rng(np.random.SeedSequence(seed, spawn_key=key))


@dataclass(frozen=True, eq=False)
class SpectraBank:
    """Named collections of nonnegative spectra, one list per class."""

    classes: dict[str, np.ndarray]  # name -> (count, L)

    def __post_init__(self):
        if not self.classes:
            raise ValidationError("spectra bank has no classes")
        fixed = {}
        bands = None
        for name, spectra in self.classes.items():
            arr = np.ascontiguousarray(spectra, dtype=np.float32)
            if arr.ndim != 2 or arr.shape[0] < 1:
                raise ValidationError(f"class {name!r}: bank entries must be a nonempty (count, L) array")
            if bands is None:
                bands = arr.shape[1]
            elif arr.shape[1] != bands:
                raise ValidationError(f"class {name!r}: band count {arr.shape[1]} != {bands}")
            if not np.all(np.isfinite(arr)) or np.any(arr < 0):
                raise ValidationError(f"class {name!r}: spectra must be finite and nonnegative")
            fixed[name] = arr
        object.__setattr__(self, "classes", fixed)

    @property
    def L(self) -> int:
        return next(iter(self.classes.values())).shape[1]

    def spectra(self, name: str) -> np.ndarray:
        if name not in self.classes:
            raise KeyError(f"bank has no class {name!r}")
        return self.classes[name]

    @classmethod
    def from_json(cls, path) -> "SpectraBank":
        payload = json.loads(Path(path).read_text())
        return cls({name: np.asarray(rows, dtype=np.float32)
                    for name, rows in payload["classes"].items()})

    def to_json(self, path) -> None:
        payload = {"classes": {name: arr.astype(float).tolist()
                               for name, arr in self.classes.items()}}
        Path(path).write_text(json.dumps(payload) + "\n")


def builtin_bank(bands: int, per_class: int = 24, seed: int = 7) -> SpectraBank:
    """Self-contained bank of smooth synthetic signatures, `per_class` variants each."""
    x = np.linspace(0.0, 1.0, bands)
    classes: dict[str, np.ndarray] = {}
    for ci, (name, (base, bumps)) in enumerate(_CLASS_TEMPLATES.items()):
        rng = _stream(seed, 101, ci)
        rows = np.empty((per_class, bands))
        for k in range(per_class):
            spec = np.full(bands, base * rng.uniform(0.9, 1.1))
            for center, amp, width in bumps:
                c = center + rng.normal(0.0, 0.015)
                a = amp * rng.uniform(0.85, 1.15)
                w = width * rng.uniform(0.9, 1.1)
                spec += a * np.exp(-((x - c) ** 2) / (2.0 * w**2))
            rows[k] = spec
        classes[name] = rows.astype(np.float32)
    return SpectraBank(classes)


@dataclass(frozen=True)
class Synth1Config:
    """Six-phase scene with per-pixel piecewise-linear spectral scaling."""

    t_phases: int = 6
    height: int = 50
    width: int = 50
    endmembers: int = 3
    bands: int = 224
    scale_amplitude: tuple[float, float] = (0.85, 1.15)
    scale_knots: int = 5
    mutation_phases: tuple[int, ...] = (2, 3, 4, 5)  # 1-based phase numbers
    mutation_radius_px: int = 6
    snr_db: float | None = 30.0
    seed: int = 0
    bank: SpectraBank | None = field(default=None, compare=False)

    def __post_init__(self):
        lo, hi = self.scale_amplitude
        if not (0.0 < lo <= 1.0 <= hi):
            raise ValidationError(f"scale amplitude {self.scale_amplitude} must contain 1")
        if self.scale_knots < 2:
            raise ValidationError("scale_knots must be >= 2")
        if any(t < 1 or t > self.t_phases for t in self.mutation_phases):
            raise ValidationError("mutation phases must lie in 1..T")


@dataclass(frozen=True)
class Synth2Config:
    """Fifteen-phase scene with per-pixel spectra drawn from pure-pixel banks."""

    t_phases: int = 15
    height: int = 50
    width: int = 50
    bands: int = 198
    class_names: tuple[str, ...] = ("water", "vegetation", "soil", "road")
    snr_db: float | None = 30.0
    seed: int = 0
    bank: SpectraBank | None = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.class_names) < 2:
            raise ValidationError("need at least two endmember classes")


def piecewise_scaling(bands: int, amplitude: tuple[float, float], knots: int,
                      rng: np.random.Generator) -> np.ndarray:
    """One piecewise-linear positive scaling vector of length `bands`.

    Knot values are i.i.d. uniform on `amplitude` at `knots` evenly spaced
    breakpoints; entries stay inside the interval by convexity.
    """
    return _piecewise_scaling_batch(bands, amplitude, knots, rng, ())


def _piecewise_scaling_batch(bands: int, amplitude: tuple[float, float], knots: int,
                             rng: np.random.Generator, batch: tuple[int, ...]) -> np.ndarray:
    if knots < 2:
        raise ValidationError("piecewise scaling needs at least 2 knots")
    lo, hi = amplitude
    if not (0.0 < lo <= hi):
        raise ValidationError(f"amplitude interval {amplitude} must be positive")
    values = rng.uniform(lo, hi, size=batch + (knots,))
    if bands == 1:
        return values[..., 0:1].copy()
    pos = np.arange(bands) * (knots - 1) / (bands - 1)
    left = np.minimum(pos.astype(int), knots - 2)
    frac = pos - left
    return values[..., left] * (1.0 - frac) + values[..., left + 1] * frac


def add_noise_snr(cube: HyperCubeSequence, snr_db: float | None,
                  rng: np.random.Generator) -> HyperCubeSequence:
    """Add i.i.d. zero-mean Gaussian noise calibrated to `snr_db` over the whole sequence.

    `snr_db` of None or +inf disables noise and returns the input unchanged.
    """
    if snr_db is None or math.isinf(snr_db):
        return cube
    signal_power = float(np.mean(cube.data.astype(np.float64) ** 2))
    if signal_power == 0.0:
        raise ValidationError("cannot calibrate noise for an all-zero cube")
    sigma = math.sqrt(signal_power / 10.0 ** (snr_db / 10.0))
    noisy = cube.data.astype(np.float64) + rng.normal(0.0, sigma, size=cube.data.shape)
    return HyperCubeSequence(noisy, wavelengths=cube.wavelengths,
                             phase_labels=cube.phase_labels)


def _smooth_unit_field(rng: np.random.Generator, shape: tuple[int, int],
                       smooth_px: float = 5.0) -> np.ndarray:
    f = gaussian_filter(rng.standard_normal(shape), sigma=smooth_px, mode="reflect")
    return (f - f.mean()) / f.std()


def _abundance_fields(seed: int, t_phases: int, p_dim: int, h: int, w: int) -> np.ndarray:
    """Smooth simplex-valued maps (T, P, H, W): softmax over drifting random fields."""
    start = np.stack([_smooth_unit_field(_stream(seed, 301, p), (h, w)) for p in range(p_dim)])
    stop = np.stack([_smooth_unit_field(_stream(seed, 302, p), (h, w)) for p in range(p_dim)])
    maps = np.empty((t_phases, p_dim, h, w))
    for t in range(t_phases):
        u = t / (t_phases - 1) if t_phases > 1 else 0.0
        logits = (1.0 - u) * start + u * stop
        # convex mix of two unit-variance fields loses variance; restore it so
        # every phase has the same mixing statistics
        logits /= math.sqrt((1.0 - u) ** 2 + u**2)
        e = np.exp(logits - logits.max(axis=0, keepdims=True))
        maps[t] = e / e.sum(axis=0, keepdims=True)
    return maps


def _apply_mutations(maps: np.ndarray, cfg: Synth1Config) -> None:
    """Overwrite a seeded disk per mutated phase with a one-endmember-dominant mix."""
    t_dim, p_dim, h, w = maps.shape
    ii, jj = np.meshgrid(np.arange(h), np.arange(w), indexing="ij")
    for phase in sorted(cfg.mutation_phases):
        rng = _stream(cfg.seed, 303, phase)
        ci = int(rng.integers(0, h))
        cj = int(rng.integers(0, w))
        k = int(rng.integers(0, p_dim))
        disk = (ii - ci) ** 2 + (jj - cj) ** 2 <= cfg.mutation_radius_px**2
        vec = np.full(p_dim, 0.1 / (p_dim - 1))
        vec[k] = 0.9
        maps[phase - 1][:, disk] = vec[:, None]


def _mix(per_pixel_m: np.ndarray, maps: np.ndarray) -> np.ndarray:
    """Noiseless observation (T, L, H, W) from per-pixel endmembers and abundances."""
    t_dim, n_pix, l_dim, p_dim = per_pixel_m.shape
    h, w = maps.shape[2:]
    a_flat = maps.reshape(t_dim, p_dim, n_pix).astype(np.float64)
    y = np.einsum("tnlp,tpn->tln", per_pixel_m.astype(np.float64), a_flat)
    return y.reshape(t_dim, l_dim, h, w)


def generate_synthetic1(cfg: Synth1Config) -> DatasetBundle:
    """Scene 1: fixed reference spectra warped per pixel by piecewise-linear scaling."""
    h, w, p_dim, l_dim = cfg.height, cfg.width, cfg.endmembers, cfg.bands
    n_pix = h * w
    bank = cfg.bank if cfg.bank is not None else builtin_bank(l_dim)
    if len(bank.classes) < p_dim:
        raise ValidationError(f"bank has {len(bank.classes)} classes, need {p_dim}")
    if bank.L != l_dim:
        raise ValidationError(f"bank band count {bank.L} != configured {l_dim}")

    ref_rng = _stream(cfg.seed, 300)
    names = list(bank.classes)
    chosen = ref_rng.choice(len(names), size=p_dim, replace=False)
    refs = np.stack([bank.spectra(names[c])[int(ref_rng.integers(len(bank.spectra(names[c]))))]
                     for c in chosen], axis=1).astype(np.float64)  # (L, P)

    scale_rng = _stream(cfg.seed, 304)
    scales = _piecewise_scaling_batch(l_dim, cfg.scale_amplitude, cfg.scale_knots,
                                      scale_rng, (cfg.t_phases, n_pix, p_dim))
    per_pixel = (refs.T[None, None] * scales).transpose(0, 1, 3, 2)  # (T, N, L, P)
    per_pixel = per_pixel.astype(np.float32)

    maps = _abundance_fields(cfg.seed, cfg.t_phases, p_dim, h, w)
    _apply_mutations(maps, cfg)

    clean = _mix(per_pixel, maps)
    observed = HyperCubeSequence(clean)
    observed = add_noise_snr(observed, cfg.snr_db, _stream(cfg.seed, 305))

    per_phase = per_pixel.astype(np.float64).mean(axis=1)  # (T, L, P)
    return DatasetBundle(
        observed=observed,
        gt_endmembers=EndmemberSet(per_phase, per_pixel),
        gt_abundances=AbundanceSequence(maps),
        noise_snr_db=cfg.snr_db if cfg.snr_db is not None and math.isfinite(cfg.snr_db) else None,
        seed=cfg.seed,
    )


def generate_synthetic2(cfg: Synth2Config) -> DatasetBundle:
    """Scene 2: per-pixel, per-phase spectra drawn uniformly from class banks."""
    h, w, l_dim = cfg.height, cfg.width, cfg.bands
    p_dim = len(cfg.class_names)
    n_pix = h * w
    bank = cfg.bank if cfg.bank is not None else builtin_bank(l_dim)
    if bank.L != l_dim:
        raise ValidationError(f"bank band count {bank.L} != configured {l_dim}")
    pools = []
    for name in cfg.class_names:
        spectra = bank.spectra(name)
        if len(spectra) == 0:
            raise ValidationError(f"class {name!r} has an empty bank")
        pools.append(spectra)

    per_pixel = np.empty((cfg.t_phases, n_pix, l_dim, p_dim), dtype=np.float32)
    for p, pool in enumerate(pools):
        rng = _stream(cfg.seed, 306, p)
        idx = rng.integers(0, len(pool), size=(cfg.t_phases, n_pix))
        per_pixel[:, :, :, p] = pool[idx]

    maps = _abundance_fields(cfg.seed, cfg.t_phases, p_dim, h, w)

    clean = _mix(per_pixel, maps)
    observed = HyperCubeSequence(clean)
    observed = add_noise_snr(observed, cfg.snr_db, _stream(cfg.seed, 305))

    per_phase = per_pixel.astype(np.float64).mean(axis=1)
    return DatasetBundle(
        observed=observed,
        gt_endmembers=EndmemberSet(per_phase, per_pixel),
        gt_abundances=AbundanceSequence(maps),
        noise_snr_db=cfg.snr_db if cfg.snr_db is not None and math.isfinite(cfg.snr_db) else None,
        seed=cfg.seed,
    )
