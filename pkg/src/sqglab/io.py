"""Configuration files, run manifests, binary snapshots and CSV series."""

from __future__ import annotations

import datetime as _dt
import hashlib
import json
import os
import platform
import struct
from dataclasses import dataclass
from pathlib import Path
from typing import Any, Iterable, Sequence

import numpy as np

from .spectral import GridSpec, SpectralField

SNAPSHOT_MAGIC = b"SQGS"
SNAPSHOT_VERSION = 1
_HEADER = struct.Struct("<4sIId")


class ConfigError(ValueError):
    """Malformed or inconsistent configuration."""


class SnapshotError(ValueError):
    """Corrupt or incompatible snapshot file."""


# ---------------------------------------------------------------------------
# configuration
# ---------------------------------------------------------------------------

def _floats(s: str) -> tuple:
    return tuple(float(x) for x in s.replace(";", ",").split(",") if x.strip())


def _bool(s: str) -> bool:
    v = s.strip().lower()
    if v in ("1", "true", "yes", "on"):
        return True
    if v in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {s!r}")


# key -> (parser, default)
SCHEMA: dict[str, tuple] = {
    "seed": (int, 0),
    "grid.n": (int, 64),
    "multiplier.kind": (str, "fractional"),
    "multiplier.gamma": (float, 0.5),
    "multiplier.a": (float, 0.25),
    "multiplier.kappa": (float, float(np.e)),
    "init.kind": (str, "random"),
    "init.amplitude": (float, 1.0),
    "init.decay": (float, 3.0),
    "init.kcut": (int, 0),
    "forcing.kind": (str, "shear"),
    "steady.A": (float, 1.0),
    "steady.m": (int, 1),
    "steady.solve": (_bool, False),
    "steady.perturbation": (float, 0.0),
    "steady.tol": (float, 1e-10),
    "stepper.dt": (float, 1e-3),
    "stepper.t_end": (float, 1.0),
    "stepper.adaptive": (_bool, False),
    "stepper.c_cfl": (float, 0.5),
    "stepper.dt_max": (float, 0.05),
    "stepper.cadence": (float, 0.0),
    "stepper.snapshot_every": (float, 0.0),
    "eig.count": (int, 2),
    "eig.t_prop": (float, 1.0),
    "eig.mode": (str, "propagator"),
    "ladder.epsilons": (_floats, (1e-2, 1e-3, 1e-4)),
    "escape.rho": (float, 0.5),
    "escape.sat_window": (float, 6.0),
    "schedule.xi0": (float, 0.5),
    "schedule.alpha": (float, 0.25),
    "schedule.c0": (float, 1.0),
    "schedule.c0_scan": (_floats, ()),
    "holder.n_radii": (int, 24),
    "holder.n_angles": (int, 16),
    "holder.t_factor": (float, 10.0),
    "verify.count": (int, 32),
    "verify.grids": (_floats, (64.0, 128.0)),
    "verify.nmax": (_floats, (32.0, 64.0)),
    "monitor.energy_tol": (float, 1e-6),
}


def parse_config(text: str) -> dict[str, Any]:
    """Parse ``key = value`` lines; ``#`` starts a comment.  Unknown keys are errors."""
    cfg = {k: d for k, (_, d) in SCHEMA.items()}
    seen = set()
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"line {lineno}: expected 'key = value', got {raw!r}")
        key, val = (s.strip() for s in line.split("=", 1))
        if key not in SCHEMA:
            raise ConfigError(f"line {lineno}: unknown key {key!r}")
        if key in seen:
            raise ConfigError(f"line {lineno}: duplicate key {key!r}")
        seen.add(key)
        try:
            cfg[key] = SCHEMA[key][0](val)
        except ValueError as exc:
            raise ConfigError(f"line {lineno}: bad value for {key}: {exc}") from None
    return cfg


def load_config(path: str | os.PathLike | None) -> dict[str, Any]:
    if path is None:
        return parse_config("")
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def config_hash(cfg: dict[str, Any]) -> str:
    canon = json.dumps({k: cfg[k] for k in sorted(cfg)}, sort_keys=True, default=list)
    return hashlib.sha256(canon.encode("utf-8")).hexdigest()


# ---------------------------------------------------------------------------
# manifest
# ---------------------------------------------------------------------------

def _versions() -> dict[str, str]:
    from importlib import metadata

    out = {"python": platform.python_version()}
    for pkg in ("numpy", "scipy", "numba"):
        try:
            out[pkg] = metadata.version(pkg)
        except metadata.PackageNotFoundError:
            out[pkg] = "absent"
    try:
        out["sqglab"] = metadata.version("artifact")
    except metadata.PackageNotFoundError:
        out["sqglab"] = "unknown"
    return out


@dataclass(frozen=True)
class RunManifest:
    path: Path
    data: dict

    @property
    def config_hash(self) -> str:
        return self.data["config_hash"]


def write_manifest(out_dir: str | os.PathLike, command: str, cfg: dict, outputs: Sequence[str],
                   extra: dict | None = None) -> RunManifest:
    """Write ``manifest.json`` once; an existing manifest is never overwritten."""
    out = Path(out_dir)
    data = {
        "command": command,
        "config_hash": config_hash(cfg),
        "seed": cfg.get("seed"),
        "grid": cfg.get("grid.n"),
        "multiplier": {k.split(".", 1)[1]: cfg[k] for k in cfg if k.startswith("multiplier.")},
        "config": cfg,
        "versions": _versions(),
        "outputs": sorted(outputs),
        "created_utc": _dt.datetime.now(_dt.timezone.utc).isoformat(timespec="seconds"),
    }
    if extra:
        data["results"] = extra
    path = out / "manifest.json"
    with open(path, "x", encoding="utf-8") as fh:
        json.dump(data, fh, indent=2, sort_keys=True, default=_json_default)
        fh.write("\n")
    os.chmod(path, 0o444)
    return RunManifest(path, data)


def _json_default(o):
    if isinstance(o, (np.floating, np.integer)):
        return o.item()
    if isinstance(o, (tuple, set, np.ndarray)):
        return list(o)
    if isinstance(o, complex):
        return [o.real, o.imag]
    raise TypeError(f"not serializable: {type(o).__name__}")


def read_manifest(path: str | os.PathLike) -> RunManifest:
    p = Path(path)
    if p.is_dir():
        p = p / "manifest.json"
    with open(p, encoding="utf-8") as fh:
        return RunManifest(p, json.load(fh))


# ---------------------------------------------------------------------------
# snapshots
# ---------------------------------------------------------------------------

def snapshot_bytes(theta: SpectralField, t: float = 0.0) -> bytes:
    head = _HEADER.pack(SNAPSHOT_MAGIC, SNAPSHOT_VERSION, theta.grid.n, float(t))
    body = np.ascontiguousarray(theta.coeffs, dtype="<c16").tobytes()
    return head + body


def save_snapshot(path: str | os.PathLike, theta: SpectralField, t: float = 0.0) -> None:
    with open(path, "wb") as fh:
        fh.write(snapshot_bytes(theta, t))


def parse_snapshot(blob: bytes) -> tuple[SpectralField, float]:
    if len(blob) < _HEADER.size:
        raise SnapshotError("snapshot shorter than its header")
    magic, version, n, t = _HEADER.unpack_from(blob)
    if magic != SNAPSHOT_MAGIC:
        raise SnapshotError(f"bad magic {magic!r}")
    if version != SNAPSHOT_VERSION:
        raise SnapshotError(f"unsupported snapshot version {version} (expected {SNAPSHOT_VERSION})")
    try:
        grid = GridSpec(int(n))
    except ValueError as exc:
        raise SnapshotError(str(exc)) from None
    count = grid.spectral_shape[0] * grid.spectral_shape[1]
    if len(blob) != _HEADER.size + 16 * count:
        raise SnapshotError(f"payload size {len(blob) - _HEADER.size} does not match n={n}")
    coeffs = np.frombuffer(blob, dtype="<c16", offset=_HEADER.size).reshape(grid.spectral_shape)
    return SpectralField(grid, coeffs.astype(np.complex128)), float(t)


def load_snapshot(path: str | os.PathLike) -> tuple[SpectralField, float]:
    with open(path, "rb") as fh:
        return parse_snapshot(fh.read())


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------

def _fmt(x) -> str:
    if isinstance(x, (bool, np.bool_)):
        return "1" if x else "0"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    if isinstance(x, (float, np.floating)):
        return "%.17g" % x
    if x is None:
        return ""
    return str(x)


def write_csv(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(",".join(columns) + "\n")
        for row in rows:
            if len(row) != len(columns):
                raise ValueError(f"row has {len(row)} fields, header has {len(columns)}")
            fh.write(",".join(_fmt(x) for x in row) + "\n")


def append_csv(path: str | os.PathLike, columns: Sequence[str], rows: Iterable[Sequence]) -> None:
    """Append rows, writing the header first if the file is new or empty."""
    p = Path(path)
    new = not p.exists() or p.stat().st_size == 0
    with open(p, "a", encoding="utf-8", newline="\n") as fh:
        if new:
            fh.write(",".join(columns) + "\n")
        for row in rows:
            fh.write(",".join(_fmt(x) for x in row) + "\n")
