"""Input parsing for distributions and run configuration; report writers."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional

import numpy as np

from .mixture import GaussMix
from .quadrature import QuadSettings

FILE_WEIGHT_TOL = 1e-9


class InputError(ValueError):
    """Malformed user input: distribution file, config file or flag value."""


def parse_distribution(text: str, source: str = "<string>", renormalize: bool = False) -> GaussMix:
    """Parse ``{"weights": [...], "means": [...], "variances": [...]}``.

    Weights must sum to one within ``1e-9`` unless ``renormalize`` is set;
    accepted weights are rescaled to sum to one exactly.
    """
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise InputError(f"{source}:{exc.lineno}:{exc.colno}: {exc.msg}") from None
    if not isinstance(obj, dict):
        raise InputError(f"{source}: expected a JSON object")
    arrays = {}
    for key in ("weights", "means", "variances"):
        val = obj.get(key)
        if not isinstance(val, list) or not val:
            raise InputError(f"{source}: {key!r} must be a non-empty array")
        if not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in val):
            raise InputError(f"{source}: {key!r} must contain numbers only")
        arrays[key] = [float(v) for v in val]
    extra = set(obj) - set(arrays)
    if extra:
        raise InputError(f"{source}: unknown keys {sorted(extra)}")
    if len({len(v) for v in arrays.values()}) != 1:
        raise InputError(f"{source}: weights, means and variances differ in length")
    total = math.fsum(arrays["weights"])
    if not renormalize and abs(total - 1.0) > FILE_WEIGHT_TOL:
        raise InputError(f"{source}: weights sum to {total!r}; pass --renormalize to rescale")
    try:
        return GaussMix.normalized(arrays["weights"], arrays["means"], arrays["variances"])
    except ValueError as exc:
        raise InputError(f"{source}: {exc}") from None


def load_distribution(path, renormalize: bool = False) -> GaussMix:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_distribution(text, str(path), renormalize)


def parse_float_list(text: str, what: str = "list") -> tuple:
    try:
        values = tuple(float(t) for t in text.split(",") if t.strip())
    except ValueError:
        raise InputError(f"{what}: cannot parse {text!r} as comma-separated numbers") from None
    if not values or not all(math.isfinite(v) for v in values):
        raise InputError(f"{what}: need at least one finite number")
    return values


@dataclass(frozen=True)
class RunConfig:
    tol1d: float = 1e-9
    tol2d: float = 1e-7
    max_levels: int = 12
    gamma_grid: tuple = (0.5, 1.0, 2.0)
    mc_seed: int = 1
    mc_samples: int = 1_000_000
    output_dir: Optional[str] = None
    workers: int = 1

    def __post_init__(self):
        if not (self.tol1d > 0 and self.tol2d > 0):
            raise InputError("tolerances must be > 0")
        if not 1 <= self.max_levels <= 16:
            raise InputError("quad.max_levels must lie in [1, 16]")
        g = self.gamma_grid
        if not g or any(v <= 0 for v in g) or any(b <= a for a, b in zip(g, g[1:])):
            raise InputError("gamma.grid must be non-empty, positive and increasing")
        if self.mc_samples < 1:
            raise InputError("mc.samples must be >= 1")
        if self.workers < 1:
            raise InputError("workers must be >= 1")

    @property
    def settings(self) -> QuadSettings:
        return QuadSettings(self.tol1d, self.tol2d, self.max_levels, self.workers)


_KEYS = {
    "quad.tol1d": ("tol1d", float),
    "quad.tol2d": ("tol2d", float),
    "quad.max_levels": ("max_levels", int),
    "gamma.grid": ("gamma_grid", lambda s: parse_float_list(s, "gamma.grid")),
    "mc.seed": ("mc_seed", int),
    "mc.samples": ("mc_samples", int),
    "output.dir": ("output_dir", str),
    "workers": ("workers", int),
}


def parse_config(text: str, source: str = "<config>") -> RunConfig:
    """Flat ``key = value`` lines; ``#`` starts a comment."""
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (s.strip() for s in line.partition("="))
        if not sep:
            raise InputError(f"{source}:{lineno}: expected key = value")
        if key not in _KEYS:
            raise InputError(f"{source}:{lineno}: unknown key {key!r}")
        name, conv = _KEYS[key]
        try:
            values[name] = conv(val)
        except (ValueError, InputError) as exc:
            raise InputError(f"{source}:{lineno}: bad value for {key}: {exc}") from None
    return RunConfig(**values)


def load_config(path) -> RunConfig:
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise InputError(f"{path}: {exc.strerror}") from None
    return parse_config(text, str(path))


def override(cfg: RunConfig, **changes) -> RunConfig:
    return replace(cfg, **{k: v for k, v in changes.items() if v is not None})


def format_number(x) -> str:
    """17 significant digits, enough to round-trip any double."""
    x = float(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot serialize non-finite number {x!r}")
    if x == int(x) and abs(x) < 1e16:
        return str(int(x))
    return format(x, ".17g")


def to_json(obj, indent: int = 2) -> str:
    """JSON text with every float written by :func:`format_number`."""
    return _encode(obj, indent, 0) + "\n"


def _encode(obj, indent, depth):
    pad = " " * (indent * (depth + 1))
    end = " " * (indent * depth)
    if obj is None or isinstance(obj, bool):
        return json.dumps(obj)
    if isinstance(obj, (int, np.integer)):
        return str(int(obj))
    if isinstance(obj, (float, np.floating)):
        return format_number(obj)
    if isinstance(obj, str):
        return json.dumps(obj)
    if isinstance(obj, dict):
        if not obj:
            return "{}"
        items = [f"{pad}{json.dumps(str(k))}: {_encode(v, indent, depth + 1)}" for k, v in obj.items()]
        return "{\n" + ",\n".join(items) + "\n" + end + "}"
    if isinstance(obj, (list, tuple, np.ndarray)):
        if len(obj) == 0:
            return "[]"
        if all(isinstance(v, (int, float, np.number)) and not isinstance(v, bool) for v in obj):
            return "[" + ", ".join(_encode(v, indent, depth + 1) for v in obj) + "]"
        items = [pad + _encode(v, indent, depth + 1) for v in obj]
        return "[\n" + ",\n".join(items) + "\n" + end + "]"
    raise TypeError(f"cannot serialize {type(obj).__name__}")


def to_csv(header, rows) -> str:
    lines = [",".join(header)]
    lines.extend(",".join(format_number(v) for v in row) for row in rows)
    return "\n".join(lines) + "\n"
