"""INI run configuration.

A config has three sections::

    [scenario]          kind, output, optional seed and workers
    [problem]           every ProblemSpec field (T1 optional)
    [params]            scenario-specific overrides, all optional

Problem keys use the short names ``a``, ``T``, ``p`` and ``A``. Intervals are
written ``lo, hi``.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field
from pathlib import Path

from ..solver_core import ProblemSpec

SCENARIOS = {
    "hermite": (1,),
    "kernel": (2, 3),
    "theorem21": (4,),
    "rate": (5,),
    "exit_modes": (6,),
    "degree": (7,),
    "riccati": (8,),
    "null_control": (9,),
    "theorem11": (10,),
    "theorem12": (11,),
    "solver": (12,),
}

# config key -> (ProblemSpec field, parser)
_PROBLEM_KEYS = {
    "omega_domain": ("omega_domain", "interval"),
    "actuator": ("actuator", "interval"),
    "a": ("target_point", "float"),
    "T": ("target_time", "float"),
    "p": ("exponent", "float"),
    "eps0": ("eps0", "float"),
    "K0": ("K0", "float"),
    "A": ("A_const", "float"),
    "eta0": ("eta0", "float"),
    "T1": ("T1", "float"),
    "grid_points": ("grid_points", "int"),
}
_OPTIONAL_PROBLEM = {"T1"}


class ConfigError(ValueError):
    """Schema violations, all of them at once."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid config:\n  " + "\n  ".join(errors))


@dataclass
class RunConfig:
    kind: str
    output: Path
    spec: ProblemSpec
    seed: int = 0
    workers: int = 1
    params: dict[str, str] = field(default_factory=dict)
    source: str = ""

    def param(self, key: str, default, cast=float):
        if key not in self.params:
            return default
        return cast(self.params[key])

    def to_dict(self) -> dict:
        return {"kind": self.kind, "output": str(self.output), "seed": self.seed,
                "workers": self.workers, "params": dict(self.params),
                "problem": self.spec.to_dict()}


def _parse(kind: str, raw: str):
    if kind == "interval":
        parts = [float(v) for v in raw.replace(" ", "").split(",") if v]
        if len(parts) != 2:
            raise ValueError("expected 'lo, hi'")
        return tuple(parts)
    if kind == "int":
        return int(raw)
    return float(raw)


def parse_config(text: str, base_dir: Path | None = None) -> RunConfig:
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str  # keys are case-sensitive (T vs t)
    errors: list[str] = []
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError([f"unreadable config: {exc}"]) from None

    for sec in ("scenario", "problem"):
        if not cp.has_section(sec):
            errors.append(f"missing section [{sec}]")
    for sec in cp.sections():
        if sec not in ("scenario", "problem", "params"):
            errors.append(f"unknown section [{sec}]")

    sc = cp["scenario"] if cp.has_section("scenario") else {}
    kind = sc.get("kind")
    if kind is None:
        errors.append("scenario.kind: missing")
    elif kind not in SCENARIOS:
        errors.append(f"scenario.kind: unknown kind {kind!r} (choose from {', '.join(SCENARIOS)})")
    out = sc.get("output")
    if out is None:
        errors.append("scenario.output: missing")
    seed, workers = 0, 1
    for key in ("seed", "workers"):
        if key in sc:
            try:
                v = int(sc[key])
            except ValueError:
                errors.append(f"scenario.{key}: not an integer: {sc[key]!r}")
                continue
            if key == "seed":
                seed = v
            else:
                workers = v
    for key in sc:
        if key not in ("kind", "output", "seed", "workers"):
            errors.append(f"scenario.{key}: unknown field")

    pr = cp["problem"] if cp.has_section("problem") else {}
    values = {}
    for key, (name, typ) in _PROBLEM_KEYS.items():
        if key not in pr:
            if key not in _OPTIONAL_PROBLEM and cp.has_section("problem"):
                errors.append(f"problem.{key}: missing")
            continue
        try:
            values[name] = _parse(typ, pr[key])
        except ValueError as exc:
            errors.append(f"problem.{key}: {exc}")
    for key in pr:
        if key not in _PROBLEM_KEYS:
            errors.append(f"problem.{key}: unknown field")

    spec = None
    if not errors:
        try:
            spec = ProblemSpec(**values)
        except ValueError as exc:
            errors.append(f"problem: {exc}")
    if errors:
        raise ConfigError(errors)
    params = dict(cp["params"]) if cp.has_section("params") else {}
    path = Path(out)
    if base_dir is not None and not path.is_absolute():
        path = base_dir / path
    return RunConfig(kind, path, spec, seed, workers, params, text)


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    return parse_config(path.read_text(), base_dir=Path.cwd())
