"""Run configuration: dataclass sections, YAML I/O and validation with line diagnostics."""
from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

import re

import yaml


class _Loader(yaml.SafeLoader):
    """SafeLoader that also reads exponent floats without a dot (1e-3), as YAML 1.2 does."""


_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"^[-+]?(?:[0-9][0-9_]*(?:\.[0-9_]*)?|\.[0-9_]+)[eE][-+]?[0-9]+$"),
    list("-+0123456789."))


def _load(text: str):
    return yaml.load(text, Loader=_Loader)


class ConfigError(ValueError):
    def __init__(self, message: str, field_path: str | None = None, line: int | None = None):
        self.field_path = field_path
        self.line = line
        where = []
        if line is not None:
            where.append(f"line {line}")
        if field_path:
            where.append(f"field {field_path}")
        super().__init__(f"{', '.join(where)}: {message}" if where else message)


@dataclass
class PotentialSection:
    name: str = "canonical"
    V0: float = 10.0
    coefficients: list | None = None  # rows [m, n, re, im] when name == "custom"


@dataclass
class BasisSection:
    cutoff: int = 6


@dataclass
class ForcingSection:
    kind: str = "circular"
    R: float = 1.0
    omega: float = 2.0
    T_per: float | None = None
    samples: list | None = None  # rows [A1, A2] for kind == "tabulated"


@dataclass
class DiracSection:
    d0: float | None = None  # None: 0.25 μ(0)/v_D
    n_radial: int = 24
    n_angular: int = 48
    cone_radii: list = field(default_factory=lambda: [0.005, 0.01, 0.02])
    cone_directions: int = 12
    path_samples: int = 40
    n_bands: int = 8
    wkb_xi: list = field(default_factory=lambda: [10.0, 20.0, 40.0, 80.0, 160.0])
    wkb_v_D: float = 1.0
    coverage_v_D: float = 1.0
    coverage_d0_max: float = 8.0
    coverage_dr: float = 0.002
    coverage_angles: int = 2
    coverage_rungs: int = 16
    coverage_bins: int = 720
    fold_delta: float = 0.5
    fold_delta0: float | None = None
    fold_grid: int = 24


@dataclass
class SupercellSection:
    epsilon: float = 0.125
    L: int = 48
    M: int = 16
    cutoff: int = 4
    dt: float = 1e-3
    horizon_periods: int = 1
    envelope_d0: float = 0.2
    envelope_width: float = 0.15
    spinor: list = field(default_factory=lambda: [1.0, 0.5])
    xi: list = field(default_factory=lambda: [0.0, 0.0])
    tol: float = 1e-4
    # the real-space split-step run needs a small supercell
    grid_L: int = 3
    grid_epsilon: float = 0.25
    grid_d0: float = 2.5


@dataclass
class ScanSection:
    g: float | None = None  # None: half the effective gap g_tilde
    d0: float = 0.2
    L: int = 48
    eps_list: list = field(default_factory=lambda: [0.125, 0.0625, 0.03125])
    average_L: int = 3
    average_radius: float = 2.5
    seed: int = 0


@dataclass
class OutputSection:
    directory: str = "out"
    formats: list = field(default_factory=lambda: ["csv", "json"])


@dataclass
class RunConfig:
    potential: PotentialSection = field(default_factory=PotentialSection)
    basis: BasisSection = field(default_factory=BasisSection)
    forcing: ForcingSection = field(default_factory=ForcingSection)
    dirac: DiracSection = field(default_factory=DiracSection)
    supercell: SupercellSection = field(default_factory=SupercellSection)
    scan: ScanSection = field(default_factory=ScanSection)
    output: OutputSection = field(default_factory=OutputSection)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def to_yaml(self) -> str:
        return yaml.safe_dump(self.to_dict(), sort_keys=False)

    def section_hash(self, *names: str) -> str:
        blob = json.dumps({n: dataclasses.asdict(getattr(self, n)) for n in names}, sort_keys=True)
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


_SECTION_TYPES = {
    "potential": PotentialSection, "basis": BasisSection, "forcing": ForcingSection,
    "dirac": DiracSection, "supercell": SupercellSection, "scan": ScanSection,
    "output": OutputSection,
}


def _line_index(text: str) -> dict[tuple[str, ...], int]:
    """1-based line numbers of mapping keys, keyed by their path."""
    out: dict[tuple[str, ...], int] = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return out

    def walk(node, path):
        if isinstance(node, yaml.MappingNode):
            for k, v in node.value:
                p = path + (str(k.value),)
                out[p] = k.start_mark.line + 1
                walk(v, p)

    if root is not None:
        walk(root, ())
    return out


def _coerce(value: Any, hint: str, path: str):
    if value is None:
        if "None" in hint:
            return None
        raise ConfigError("value may not be null", path)
    if "list" in hint:
        if not isinstance(value, list):
            raise ConfigError(f"expected a list, got {type(value).__name__}", path)
        return value
    if "bool" in hint:
        return bool(value)
    if "int" in hint and "float" not in hint:
        if isinstance(value, bool) or not isinstance(value, (int, float)) or int(value) != value:
            raise ConfigError(f"expected an integer, got {value!r}", path)
        return int(value)
    if "float" in hint:
        if isinstance(value, bool) or not isinstance(value, (int, float)):
            raise ConfigError(f"expected a number, got {value!r}", path)
        return float(value)
    if "str" in hint:
        if not isinstance(value, str):
            raise ConfigError(f"expected a string, got {value!r}", path)
        return value
    return value


def from_dict(data: dict | None, lines: dict | None = None) -> RunConfig:
    lines = lines or {}
    data = data or {}
    if not isinstance(data, dict):
        raise ConfigError("top level must be a mapping of sections")
    kwargs = {}
    for sec, payload in data.items():
        if sec not in _SECTION_TYPES:
            raise ConfigError(f"unknown section {sec!r}", sec, lines.get((sec,)))
        cls = _SECTION_TYPES[sec]
        payload = payload or {}
        if not isinstance(payload, dict):
            raise ConfigError("section must be a mapping", sec, lines.get((sec,)))
        fields = {f.name: f for f in dataclasses.fields(cls)}
        vals = {}
        for key, value in payload.items():
            path = f"{sec}.{key}"
            if key not in fields:
                raise ConfigError(f"unknown key {key!r}", path, lines.get((sec, key)))
            try:
                vals[key] = _coerce(value, str(fields[key].type), path)
            except ConfigError as exc:
                raise ConfigError(str(exc).split(": ", 1)[-1], path, lines.get((sec, key))) from None
        kwargs[sec] = cls(**vals)
    cfg = RunConfig(**kwargs)
    validate(cfg, lines)
    return cfg


def _finite(x, path, lines):
    if x is not None and not math.isfinite(x):
        raise ConfigError("must be finite", path, lines.get(tuple(path.split("."))))


def validate(cfg: RunConfig, lines: dict | None = None) -> None:
    lines = lines or {}

    def fail(msg, path):
        raise ConfigError(msg, path, lines.get(tuple(path.split("."))))

    for sec in _SECTION_TYPES:
        obj = getattr(cfg, sec)
        for f in dataclasses.fields(obj):
            v = getattr(obj, f.name)
            if isinstance(v, float):
                _finite(v, f"{sec}.{f.name}", lines)
    p = cfg.potential
    if p.name not in ("canonical", "custom"):
        fail("name must be 'canonical' or 'custom'", "potential.name")
    if p.name == "custom":
        if not p.coefficients:
            fail("custom potential needs coefficient rows", "potential.coefficients")
        for row in p.coefficients:
            if not isinstance(row, list) or len(row) != 4:
                fail(f"coefficient rows are [m, n, re, im], got {row!r}", "potential.coefficients")
    if cfg.basis.cutoff < 1:
        fail("cutoff must be >= 1", "basis.cutoff")
    fo = cfg.forcing
    if fo.kind not in ("circular", "tabulated"):
        fail("kind must be 'circular' or 'tabulated'", "forcing.kind")
    if fo.kind == "circular":
        if fo.omega <= 0:
            fail("omega must be positive", "forcing.omega")
        if fo.T_per is not None and abs(fo.T_per * fo.omega - 2 * math.pi) > 1e-9:
            fail("T_per * omega must equal 2π", "forcing.T_per")
    else:
        if fo.T_per is None or fo.T_per <= 0:
            fail("tabulated forcing needs a positive T_per", "forcing.T_per")
        if not fo.samples or any(not isinstance(r, list) or len(r) != 2 for r in fo.samples):
            fail("tabulated forcing needs rows [A1, A2]", "forcing.samples")
    sc = cfg.supercell
    if sc.epsilon <= 0 or sc.epsilon > 1:
        fail("epsilon must lie in (0, 1]", "supercell.epsilon")
    if sc.dt <= 0:
        fail("dt must be positive", "supercell.dt")
    if sc.horizon_periods < 1:
        fail("horizon_periods must be >= 1", "supercell.horizon_periods")
    if len(sc.spinor) != 2 or len(sc.xi) != 2:
        fail("spinor and xi are 2-vectors", "supercell.spinor")
    eps = cfg.scan.eps_list
    if any(not isinstance(e, (int, float)) or e <= 0 for e in eps):
        fail("eps_list entries must be positive numbers", "scan.eps_list")
    if any(b >= a for a, b in zip(eps, eps[1:])):
        fail("eps_list must be strictly decreasing", "scan.eps_list")
    if cfg.scan.g is not None and cfg.scan.g <= 0:
        fail("g must be positive", "scan.g")


def parse_text(text: str) -> RunConfig:
    try:
        data = _load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax: {getattr(exc, 'problem', exc)}",
                          line=None if mark is None else mark.line + 1) from None
    return from_dict(data, _line_index(text))


def load(path: str | Path | None) -> RunConfig:
    if path is None:
        return RunConfig()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}") from None
    return parse_text(text)


def apply_overrides(cfg: RunConfig, overrides: list[str]) -> RunConfig:
    """Apply section.key=value strings; values are parsed as YAML scalars or lists."""
    data = cfg.to_dict()
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not section.key=value")
        lhs, rhs = item.split("=", 1)
        parts = lhs.strip().split(".")
        if len(parts) != 2:
            raise ConfigError(f"override key {lhs!r} must be section.key", lhs)
        sec, key = parts
        if sec not in data:
            raise ConfigError(f"unknown section {sec!r}", lhs)
        if key not in data[sec]:
            raise ConfigError(f"unknown key {key!r}", lhs)
        try:
            data[sec][key] = _load(rhs)
        except yaml.YAMLError:
            raise ConfigError(f"cannot parse value {rhs!r}", lhs) from None
    return from_dict(data)
