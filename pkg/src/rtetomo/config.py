"""Run configuration: a flat key=value file with typed defaults.

Defaults reproduce the full-scale noiseless letter-A study: half-widths
1/2 for both the medium and the source segment, slab from 1 to 2, bump
sources of radius 0.05, scattering level 5, absorber level 5,
acquisition step 1/40, inversion step 1/20, weight exponent 5, Tikhonov
weight 1e-3, viscosity 1e-2.  Desk-scale runs override the two steps and
keep everything else.  The file key for the weight exponent is
``lambda`` (so is the CLI flag); the attribute is ``lam`` to stay clear
of the Python keyword.
"""

import hashlib
from dataclasses import dataclass, fields, replace
from pathlib import Path

from .errors import UsageError
from .geometry import Geometry
from .phantom import LETTER_STROKES


def _file_key(attr):
    return "lambda" if attr == "lam" else attr


def _attr_name(key):
    return "lam" if key == "lambda" else key


@dataclass(frozen=True)
class RunConfig:
    """Everything one experiment needs, hashable as canonical text."""

    half_width: float = 0.5
    slab_bottom: float = 1.0
    slab_top: float = 2.0
    source_half_width: float = 0.5
    sigma: float = 0.05
    anisotropy: float = 0.5
    mu_s: float = 5.0
    letter: "str | None" = "A"
    c_a: float = 5.0
    h_forward: float = 0.025
    h_inverse: float = 0.05
    lam: float = 5.0
    gamma: float = 1e-3
    epsilon: float = 1e-2
    delta: float = 0.0
    seed: int = 0
    out: str = "run"

    def __post_init__(self):
        if not (self.half_width > 0 and self.source_half_width > 0):
            raise UsageError("half widths must be positive")
        if not 0 < self.slab_bottom < self.slab_top:
            raise UsageError("need 0 < slab_bottom < slab_top")
        if self.sigma <= 0:
            raise UsageError("source radius must be positive")
        if not 0.0 <= self.anisotropy < 1.0:
            raise UsageError("anisotropy must lie in [0, 1)")
        if self.mu_s < 0:
            raise UsageError("scattering level must be non-negative")
        if self.letter is not None and self.letter not in LETTER_STROKES:
            raise UsageError(
                f"unknown letter {self.letter!r}; choose from {sorted(LETTER_STROKES)} or none"
            )
        if self.c_a < 0:
            raise UsageError("absorber level must be non-negative")
        if self.letter is not None and not self.c_a > 0:
            raise UsageError("absorber level must be positive when a letter is drawn")
        if self.h_forward <= 0 or self.h_inverse <= 0:
            raise UsageError("grid steps must be positive")
        ratio = self.h_inverse / self.h_forward
        if abs(ratio - round(ratio)) > 1e-9 or round(ratio) < 1:
            raise UsageError("inversion step must be an integer multiple of the forward step")
        if self.lam <= 0:
            raise UsageError("weight exponent lambda must be positive")
        if not 0.0 <= self.gamma < 1.0:
            raise UsageError("regularization weight gamma must lie in [0, 1)")
        if self.epsilon <= 0:
            raise UsageError("viscosity epsilon must be positive")
        if self.delta < 0:
            raise UsageError("noise level delta must be non-negative")
        if not self.out:
            raise UsageError("output directory must be non-empty")

    @property
    def downsample_factor(self):
        """Acquisition-to-inversion grid ratio (validated to be integral)."""
        return round(self.h_inverse / self.h_forward)


def geometry_of(config):
    """The :class:`Geometry` the configuration describes."""
    return Geometry(
        half_width=config.half_width,
        slab_bottom=config.slab_bottom,
        slab_top=config.slab_top,
        source_half_width=config.source_half_width,
    )


def _coerce(attr, value):
    """File/flag text to the typed attribute value; typed input passes through."""
    if not isinstance(value, str):
        return value
    if attr == "letter":
        return None if value.lower() in ("", "none") else value
    if attr == "out":
        return value
    if attr == "seed":
        try:
            return int(value)
        except ValueError:
            raise UsageError(f"seed expects an integer, got {value!r}") from None
    try:
        return float(value)
    except ValueError:
        raise UsageError(f"{_file_key(attr)} expects a number, got {value!r}") from None


def with_overrides(config, **overrides):
    """Copy of ``config`` with the non-None overrides applied (re-validated)."""
    typed = {k: _coerce(k, v) for k, v in overrides.items() if v is not None}
    return replace(config, **typed) if typed else config


def load_config(path):
    """Parse a flat key=value file into a :class:`RunConfig`.

    Blank lines and '#' comments are skipped; unknown keys, repeated
    keys, and unparsable values are usage errors.  Keys not present keep
    their defaults.
    """
    known = {_file_key(f.name) for f in fields(RunConfig)}
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read config {path}: {exc}") from None
    seen = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"{path}:{lineno}: expected key=value, got {raw!r}")
        key, _, val = line.partition("=")
        key = key.strip()
        if key not in known:
            raise UsageError(f"{path}:{lineno}: unknown key {key!r}")
        if key in seen:
            raise UsageError(f"{path}:{lineno}: repeated key {key!r}")
        seen[key] = val.strip()
    return with_overrides(RunConfig(), **{_attr_name(k): v for k, v in seen.items()})


def config_lines(config):
    """Canonical key=value lines, one per field, floats at 17 digits."""
    out = []
    for f in fields(config):
        v = getattr(config, f.name)
        if f.name == "letter":
            text = "none" if v is None else v
        elif f.name == "seed":
            text = str(int(v))
        elif f.name == "out":
            text = v
        else:
            text = format(float(v), ".17g")
        out.append(f"{_file_key(f.name)}={text}")
    return out


def config_hash(config):
    """First 16 hex digits of the sha256 over the experiment lines.

    Every field enters except the output directory: the hash identifies
    the experiment (physics, grids, noise, seed), and the same experiment
    written to two places must produce byte-identical data files.  The
    worker count is a CLI concern and never part of the hash.
    """
    lines = [line for line in config_lines(config) if not line.startswith("out=")]
    blob = "\n".join(lines).encode("utf-8")
    return hashlib.sha256(blob).hexdigest()[:16]
