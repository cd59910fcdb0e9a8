"""Run configuration: a flat key=value file with CLI overrides.

Every physical and pipeline parameter lives here; unknown keys are rejected
so typos fail loudly.  Values default to the reference experiment: 286/13 um
source widths, 810 nm photons, 10/15/12.5 cm preparation lenses and a 15 cm
Fourier lens.  All artifacts carry a hash of the effective configuration so
re-runs are checkable byte for byte.
"""
from __future__ import annotations

import dataclasses
import hashlib
from dataclasses import dataclass

from .states import DomainError

__all__ = ["RunConfig", "parse_config_file", "config_from_file"]


@dataclass(frozen=True)
class RunConfig:
    # source: either direct widths, or crystal/pump parameters when nonzero
    sigma_plus_um: float = 286.0
    sigma_minus_um: float = 13.0
    crystal_length_um: float = 0.0
    pump_wavelength_um: float = 0.405
    pump_index: float = 1.0
    pump_waist_um: float = 0.0
    wavelength_um: float = 0.81
    # preparation and measurement lenses
    f_um: float = 100000.0
    f2_um: float = 150000.0
    f3_um: float = 125000.0
    fm_um: float = 150000.0
    magnifications: tuple = (0.5, 0.75, 1.0, 1.25, 1.5, 2.0, 2.5, 3.0)
    # detector and synthesis
    frames: int = 100000
    pixel_pitch_um: float = 0.0  # 0 = choose per magnification from predicted widths
    arm_width_px: int = 256
    arm_height_px: int = 64  # used in 2d mode only
    mean_pair_rate: float = 4.0
    dark_count_prob: float = 0.0001
    clip_binary: int = 1
    keep_unsplit: int = 1
    mode: str = "1d"
    # calibration stacks
    calib_frames: int = 40000
    near_pitch_um: float = 3.25
    far_pitch_um: float = 16.0
    calib_width_px: int = 512
    calib_rate: float = 2.0
    # cleaning
    wavelet_order: int = 4
    decomp_level: int = 2
    psd_threshold: float = 0.3
    lowpass_cutoff: float = 0.12
    kde_bandwidth_px: float = 1.5
    # run control
    seed: int = 12345
    out_dir: str = "out"

    def __post_init__(self):
        if self.mode not in ("1d", "2d"):
            raise DomainError(f"mode must be 1d or 2d, got {self.mode!r}")
        if self.mode == "2d" and self.arm_height_px < 2:
            raise DomainError("2d mode needs arm_height_px >= 2")
        if not self.magnifications:
            raise DomainError("magnification list must not be empty")
        if any(m == 0.0 for m in self.magnifications):
            raise DomainError("magnifications must be nonzero")
        if self.frames < 2 or self.calib_frames < 2:
            raise DomainError("frame counts must be at least 2")

    @property
    def sigma_minus(self) -> float:
        if self.crystal_length_um > 0.0:
            from .states import sigma_minus_from_crystal

            return sigma_minus_from_crystal(
                self.crystal_length_um, self.pump_wavelength_um, self.pump_index
            )
        return self.sigma_minus_um

    @property
    def sigma_plus(self) -> float:
        if self.pump_waist_um > 0.0:
            return self.pump_waist_um / 2.0
        return self.sigma_plus_um

    def canonical_items(self) -> list[tuple[str, str]]:
        items = []
        for field in dataclasses.fields(self):
            value = getattr(self, field.name)
            if isinstance(value, tuple):
                value = ",".join(repr(float(v)) for v in value)
            items.append((field.name, str(value)))
        return sorted(items)

    def config_hash(self) -> str:
        payload = "\n".join(f"{k}={v}" for k, v in self.canonical_items())
        return hashlib.sha256(payload.encode()).hexdigest()[:12]


_FLOAT_FIELDS = {
    f.name
    for f in dataclasses.fields(RunConfig)
    if f.type == "float"
}
_INT_FIELDS = {f.name for f in dataclasses.fields(RunConfig) if f.type == "int"}


def _coerce(key: str, raw: str):
    if key == "magnifications":
        parts = [p for p in raw.replace(";", ",").split(",") if p.strip()]
        return tuple(float(p) for p in parts)
    if key in _FLOAT_FIELDS:
        return float(raw)
    if key in _INT_FIELDS:
        return int(raw)
    return raw


def parse_config_file(path) -> dict:
    """Read key=value lines; '#' starts a comment; unknown keys are rejected."""
    known = {f.name for f in dataclasses.fields(RunConfig)}
    values = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            body = line.split("#", 1)[0].strip()
            if not body:
                continue
            if "=" not in body:
                raise DomainError(f"{path}:{lineno}: expected key=value, got {line.strip()!r}")
            key, _, raw = body.partition("=")
            key = key.strip()
            if key not in known:
                raise DomainError(f"{path}:{lineno}: unknown configuration key {key!r}")
            values[key] = _coerce(key, raw.strip())
    return values


def config_from_file(path=None, overrides: dict | None = None) -> RunConfig:
    values = parse_config_file(path) if path else {}
    if overrides:
        for key, val in overrides.items():
            if val is None:
                continue
            values[key] = _coerce(key, val) if isinstance(val, str) else val
    return RunConfig(**values)
