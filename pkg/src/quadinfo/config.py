"""Run configuration: flat ``key = value`` files, presets, canonical hashing.

Config files (QCFG v1) are plain text with ``#`` comments and dotted keys::

    # QCFG v1
    preset = reference          # optional baseline, overridden by later keys
    cm.g = 0.004
    cm.eps.count = 45
    basis1.parity = even-even
    win.nb = 500
    gauge.mode = per-eps

``preset`` names a built-in baseline; every other key overrides one field of
the baseline (or of the all-defaults configuration).  The same reader also
serves the calibration format (QCAL v1).  ``canonical_text`` serializes a
RunConfig back to a stable key ordering, and ``config_hash`` is the sha256 of
that text — two configurations hash equal iff every semantic field matches.
"""

from __future__ import annotations

import hashlib
from pathlib import Path

import numpy as np

from .coupled_mode import DetuningModel
from .errors import ConfigError, ParseError, VersionError
from .field_synth import BasisModeSpec
from .pipeline import RunConfig

CONFIG_TAG = "QCFG"
CONFIG_VERSION = 1


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


# ----------------------------------------------------------------------
# generic tagged key = value reader (shared with the calibration format)
# ----------------------------------------------------------------------

def read_kv_file(path, tag: str, version: int) -> dict:
    """Read a '# TAG vN' key=value file into an ordered dict of strings."""
    path = Path(path)
    out: dict[str, str] = {}
    tag_seen = False
    with path.open("r", encoding="ascii") as fh:
        for lineno, rawline in enumerate(fh, start=1):
            line = rawline.strip()
            if not line:
                continue
            if not tag_seen:
                parts = line.split()
                if line.startswith("#") and len(parts) == 3 and parts[1] == tag:
                    if parts[2] != f"v{version}":
                        raise VersionError(
                            f"{path}: unsupported {tag} version {parts[2]!r}"
                        )
                    tag_seen = True
                    continue
                raise VersionError(
                    f"{path}: first line must be '# {tag} v{version}', "
                    f"got {line!r}"
                )
            if line.startswith("#"):
                continue
            if "=" not in line:
                raise ParseError(f"expected 'key = value', got {line!r}", lineno)
            key, _, value = line.partition("=")
            key = key.strip()
            value = value.split("#", 1)[0].strip()
            if not key:
                raise ParseError("empty key", lineno)
            out[key] = value
    if not tag_seen:
        raise VersionError(f"{path}: empty file, no {tag} tag")
    return out


# ----------------------------------------------------------------------
# presets
# ----------------------------------------------------------------------

def _reference_items() -> dict:
    # Affine detunings crossing at eps = 0.16655, the midpoint of a 45-point
    # grid spanning [0.16105, 0.17205]; subcritical losses so the imaginary
    # parts cross while the real parts repel.
    return {
        "cm.omega1.slope": "4.0",
        "cm.omega1.intercept": "5.3338",
        "cm.omega2.slope": "-4.0",
        "cm.omega2.intercept": "6.6662",
        "cm.gamma1.slope": "0.0",
        "cm.gamma1.intercept": "0.010",
        "cm.gamma2.slope": "0.0",
        "cm.gamma2.intercept": "0.004",
        "cm.g": "0.004",
        "cm.eps.start": "0.16105",
        "cm.eps.stop": "0.17205",
        "cm.eps.count": "45",
        "grid.nx": "256",
        "grid.ny": "256",
        "basis1.kx": "8.0",
        "basis1.ky": "6.0",
        "basis1.parity": "even-even",
        "basis2.kx": "9.5",
        "basis2.ky": "7.5",
        "basis2.parity": "odd-odd",
        # A slightly generous pad keeps the window from clipping the pure
        # modes far from the crossing, whose intensity-weighted tails are
        # heavier than the anchor hybrid's (every off-crossing record then
        # clamps well under 1% of its mass).
        "win.qlo": "0.005",
        "win.qhi": "0.995",
        "win.pad": "0.08",
        "win.nb": "500",
        "hist.weighting": "intensity",
        "anchor.eps_star": "0.16655",
        "gauge.mode": "per-eps",
        "robust.nb": "300,500,700",
        "robust.weighting": "intensity,unit",
        "run.workers": "1",
        "plots.scatter": "false",
    }


def _decoupled_items() -> dict:
    items = _reference_items()
    items["cm.g"] = "0.0"
    return items


PRESETS = {
    "reference": _reference_items,
    "decoupled": _decoupled_items,
}


# ----------------------------------------------------------------------
# typed assembly
# ----------------------------------------------------------------------

_FLOAT_KEYS = {
    "cm.omega1.slope", "cm.omega1.intercept",
    "cm.omega2.slope", "cm.omega2.intercept",
    "cm.gamma1.slope", "cm.gamma1.intercept",
    "cm.gamma2.slope", "cm.gamma2.intercept",
    "cm.g", "cm.eps.start", "cm.eps.stop",
    "basis1.kx", "basis1.ky", "basis2.kx", "basis2.ky",
    "win.qlo", "win.qhi", "win.pad",
    "anchor.eps_star",
}
_INT_KEYS = {"cm.eps.count", "grid.nx", "grid.ny", "win.nb", "run.workers",
             "run.seed"}
_STR_KEYS = {"basis1.parity", "basis2.parity", "hist.weighting", "gauge.mode",
             "fields.dir"}
_LIST_INT_KEYS = {"robust.nb"}
_LIST_STR_KEYS = {"robust.weighting"}
_BOOL_KEYS = {"plots.scatter"}

KNOWN_KEYS = (_FLOAT_KEYS | _INT_KEYS | _STR_KEYS | _LIST_INT_KEYS
              | _LIST_STR_KEYS | _BOOL_KEYS | {"preset"})

_MODEL_KEYS = [k for k in _FLOAT_KEYS if k.startswith("cm.")] + \
              ["cm.eps.count"]


def _parse_bool(key, value):
    v = value.strip().lower()
    if v in ("true", "1", "yes", "on"):
        return True
    if v in ("false", "0", "no", "off"):
        return False
    raise ConfigError(f"{key}: expected a boolean, got {value!r}")


def _typed(key: str, value: str):
    try:
        if key in _FLOAT_KEYS:
            return float(value)
        if key in _INT_KEYS:
            return int(value)
        if key in _LIST_INT_KEYS:
            return tuple(int(v.strip()) for v in value.split(",") if v.strip())
        if key in _LIST_STR_KEYS:
            return tuple(v.strip() for v in value.split(",") if v.strip())
        if key in _BOOL_KEYS:
            return _parse_bool(key, value)
    except ConfigError:
        raise
    except ValueError:
        raise ConfigError(f"{key}: cannot parse {value!r}")
    return value


def build_config(items: dict) -> RunConfig:
    """Assemble a RunConfig from flat string items (preset already merged)."""
    unknown = set(items) - KNOWN_KEYS
    if unknown:
        raise ConfigError(f"unknown config keys: {sorted(unknown)}")
    typed = {k: _typed(k, v) for k, v in items.items() if k != "preset"}

    model = None
    cm_present = [k for k in typed if k.startswith("cm.")]
    if cm_present:
        missing = [k for k in _MODEL_KEYS if k not in typed]
        if missing:
            raise ConfigError(f"incomplete detuning model, missing {missing}")
        count = typed["cm.eps.count"]
        if count < 3:
            raise ConfigError("cm.eps.count must be at least 3")
        eps_grid = np.linspace(typed["cm.eps.start"], typed["cm.eps.stop"],
                               count)
        model = DetuningModel(
            omega1_slope=typed["cm.omega1.slope"],
            omega1_intercept=typed["cm.omega1.intercept"],
            omega2_slope=typed["cm.omega2.slope"],
            omega2_intercept=typed["cm.omega2.intercept"],
            gamma1_slope=typed["cm.gamma1.slope"],
            gamma1_intercept=typed["cm.gamma1.intercept"],
            gamma2_slope=typed["cm.gamma2.slope"],
            gamma2_intercept=typed["cm.gamma2.intercept"],
            g=typed["cm.g"],
            eps_grid=eps_grid,
        )

    def basis(prefix):
        keys = (f"{prefix}.kx", f"{prefix}.ky", f"{prefix}.parity")
        if not any(k in typed for k in keys):
            return None
        if not all(k in typed for k in keys):
            raise ConfigError(f"incomplete basis spec {prefix}.*")
        return BasisModeSpec(kx=typed[keys[0]], ky=typed[keys[1]],
                             parity=typed[keys[2]])

    fields_dir = typed.get("fields.dir")
    kwargs = dict(
        model=model if fields_dir is None else None,
        fields_dir=Path(fields_dir) if fields_dir else None,
        nx=typed.get("grid.nx", 256),
        ny=typed.get("grid.ny", 256),
        basis1=basis("basis1"),
        basis2=basis("basis2"),
        eps_star=typed.get("anchor.eps_star"),
        nb=typed.get("win.nb", 500),
        weighting=typed.get("hist.weighting", "intensity"),
        q_lo=typed.get("win.qlo", 0.005),
        q_hi=typed.get("win.qhi", 0.995),
        padding_frac=typed.get("win.pad", 0.05),
        gauge_mode=typed.get("gauge.mode", "per-eps"),
        robust_nb=typed.get("robust.nb", (300, 500, 700)),
        robust_weighting=typed.get("robust.weighting", ("intensity", "unit")),
        workers=typed.get("run.workers", 1),
        emit_scatter=typed.get("plots.scatter", False),
        seed=typed.get("run.seed"),
    )
    return RunConfig(**kwargs)


def load_config(source, overrides: dict | None = None) -> RunConfig:
    """Load a RunConfig from a preset name or a QCFG file path.

    A file may itself start from ``preset = <name>``; explicit file keys win
    over the preset, and ``overrides`` (CLI flags) win over both.
    """
    source = str(source)
    if source in PRESETS:
        items = PRESETS[source]()
    else:
        path = Path(source)
        if not path.exists():
            raise ConfigError(
                f"config {source!r} is neither a preset "
                f"({sorted(PRESETS)}) nor an existing file"
            )
        raw = read_kv_file(path, CONFIG_TAG, CONFIG_VERSION)
        preset = raw.pop("preset", None)
        if preset is not None:
            if preset not in PRESETS:
                raise ConfigError(f"unknown preset {preset!r}")
            items = PRESETS[preset]()
            items.update(raw)
        else:
            items = raw
    if overrides:
        items = dict(items)
        items.update({k: str(v) for k, v in overrides.items()
                      if v is not None})
    return build_config(items)


# ----------------------------------------------------------------------
# canonical serialization & hashing
# ----------------------------------------------------------------------

def canonical_items(config: RunConfig) -> list:
    """Stable (key, value) pairs capturing every semantic field."""
    items = []
    m = config.model
    if m is not None:
        items += [
            ("cm.omega1.slope", _fmt(m.omega1_slope)),
            ("cm.omega1.intercept", _fmt(m.omega1_intercept)),
            ("cm.omega2.slope", _fmt(m.omega2_slope)),
            ("cm.omega2.intercept", _fmt(m.omega2_intercept)),
            ("cm.gamma1.slope", _fmt(m.gamma1_slope)),
            ("cm.gamma1.intercept", _fmt(m.gamma1_intercept)),
            ("cm.gamma2.slope", _fmt(m.gamma2_slope)),
            ("cm.gamma2.intercept", _fmt(m.gamma2_intercept)),
            ("cm.g", _fmt(m.g)),
            ("cm.eps.start", _fmt(m.eps_grid[0])),
            ("cm.eps.stop", _fmt(m.eps_grid[-1])),
            ("cm.eps.count", str(m.eps_grid.size)),
        ]
    if config.fields_dir is not None:
        items.append(("fields.dir", str(config.fields_dir)))
    items += [("grid.nx", str(config.nx)), ("grid.ny", str(config.ny))]
    for prefix, b in (("basis1", config.basis1), ("basis2", config.basis2)):
        if b is not None:
            items += [
                (f"{prefix}.kx", _fmt(b.kx)),
                (f"{prefix}.ky", _fmt(b.ky)),
                (f"{prefix}.parity", b.parity),
            ]
    if config.eps_star is not None:
        items.append(("anchor.eps_star", _fmt(config.eps_star)))
    items += [
        ("win.qlo", _fmt(config.q_lo)),
        ("win.qhi", _fmt(config.q_hi)),
        ("win.pad", _fmt(config.padding_frac)),
        ("win.nb", str(config.nb)),
        ("hist.weighting", config.weighting),
        ("gauge.mode", config.gauge_mode),
        ("robust.nb", ",".join(str(int(v)) for v in config.robust_nb)),
        ("robust.weighting", ",".join(config.robust_weighting)),
        ("run.workers", str(config.workers)),
        ("plots.scatter", "true" if config.emit_scatter else "false"),
    ]
    if config.seed is not None:
        items.append(("run.seed", str(config.seed)))
    return items


def canonical_text(config: RunConfig) -> str:
    lines = [f"# {CONFIG_TAG} v{CONFIG_VERSION}"]
    lines += [f"{k} = {v}" for k, v in canonical_items(config)]
    return "\n".join(lines) + "\n"


def config_hash(config: RunConfig) -> str:
    """sha256 of the canonical text, minus volatile execution knobs.

    Worker count and scatter emission cannot change any number in the
    results, so they are excluded: runs differing only in those hash equal.
    """
    volatile = {"run.workers", "plots.scatter"}
    lines = [f"{k} = {v}" for k, v in canonical_items(config)
             if k not in volatile]
    digest = hashlib.sha256("\n".join(lines).encode("ascii")).hexdigest()
    return f"sha256:{digest}"


def write_config(config: RunConfig, path) -> Path:
    path = Path(path)
    path.write_text(canonical_text(config), encoding="ascii", newline="\n")
    return path
