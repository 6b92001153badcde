"""
Run configuration: nested YAML sections mapped onto frozen dataclasses.

Unknown keys and out-of-range values raise :class:`ConfigurationError`
naming the offending field and, when the text came from a file, its line.
"""
import dataclasses
import warnings
from dataclasses import dataclass, field as dc_field
from typing import List, Optional, Tuple

import yaml

from randnls.errors import ConfigurationError


@dataclass(frozen=True)
class GridSection:
    n: int = 16
    L: float = 6.283185307179586
    d: int = 3


@dataclass(frozen=True)
class ProfileSection:
    kind: str = "power"  # power | gaussian | constant
    s: float = 0.5
    decay_margin: float = 0.01
    amplitude: float = 1.0
    width: float = 2.0  # gaussian only


@dataclass(frozen=True)
class RandomizationSection:
    enabled: bool = True
    seed: int = 0
    seeds: Optional[Tuple[int, int]] = None  # inclusive range for ensembles


@dataclass(frozen=True)
class IOperatorSection:
    N: Tuple[float, ...] = (4.0, 8.0)
    sigma: float = 0.9
    transition: str = "power"


@dataclass(frozen=True)
class EvolutionSection:
    dt: float = 1e-2
    t_end: float = 0.5
    checkpoint_every: int = 5
    dealias: Optional[bool] = None
    halve_on_guard: bool = False
    linear_only: bool = False


@dataclass(frozen=True)
class DiagnosticsSection:
    functionals: Tuple[str, ...] = (
        "conserved", "increments", "commutator", "morawetz", "norms", "scattering", "theta")
    pairs: Tuple[Tuple[float, float], ...] = ((float("inf"), 2.0), (2.0, 6.0), (10.0 / 3.0, 10.0 / 3.0))
    s_bundle: float = 0.5
    include_l10_3: bool = False
    scattering_sigma: float = 0.5
    scattering_tol: float = 1e-3
    scattering_window: int = 4
    scattering_horizon: str = "wrap"  # wrap | none | <float>
    M_cap: float = 10.0
    energy_unit: float = 1.0
    tail_min_samples: int = 500


@dataclass(frozen=True)
class EnsembleSection:
    mode: str = "simulate"  # simulate | gaussian-tail
    workers: int = 1


@dataclass(frozen=True)
class OutputSection:
    directory: str = "runs/default"
    save_trajectory: bool = True
    csv: bool = True


@dataclass(frozen=True)
class RunConfig:
    grid: GridSection = dc_field(default_factory=GridSection)
    profile: ProfileSection = dc_field(default_factory=ProfileSection)
    randomization: RandomizationSection = dc_field(default_factory=RandomizationSection)
    i_operator: IOperatorSection = dc_field(default_factory=IOperatorSection)
    evolution: EvolutionSection = dc_field(default_factory=EvolutionSection)
    diagnostics: DiagnosticsSection = dc_field(default_factory=DiagnosticsSection)
    ensemble: EnsembleSection = dc_field(default_factory=EnsembleSection)
    output: OutputSection = dc_field(default_factory=OutputSection)

    def replace(self, **sections):
        """Copy with some sections' fields overridden, e.g. ``replace(evolution={"dt": 1e-3})``."""
        out = {}
        for name, changes in sections.items():
            out[name] = dataclasses.replace(getattr(self, name), **changes)
        return dataclasses.replace(self, **out)


_SECTION_TYPES = {
    "grid": GridSection, "profile": ProfileSection, "randomization": RandomizationSection,
    "i_operator": IOperatorSection, "evolution": EvolutionSection,
    "diagnostics": DiagnosticsSection, "ensemble": EnsembleSection, "output": OutputSection,
}


# --------------------------------------------------------------------------
# emit


def _plain(v):
    if isinstance(v, float) and v == float("inf"):
        return "inf"
    if isinstance(v, tuple):
        return [_plain(x) for x in v]
    return v


def to_dict(cfg: RunConfig) -> dict:
    return {name: {f.name: _plain(getattr(getattr(cfg, name), f.name))
                   for f in dataclasses.fields(_SECTION_TYPES[name])}
            for name in _SECTION_TYPES}


def dumps(cfg: RunConfig) -> str:
    return yaml.safe_dump(to_dict(cfg), sort_keys=False)


def save(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(dumps(cfg))


# --------------------------------------------------------------------------
# parse


def _line_map(text):
    """``(section, key) -> 1-based line`` from the YAML node tree."""
    lines = {}
    try:
        root = yaml.compose(text)
    except yaml.YAMLError:
        return lines
    if not isinstance(root, yaml.MappingNode):
        return lines
    for knode, vnode in root.value:
        lines[(knode.value,)] = knode.start_mark.line + 1
        if isinstance(vnode, yaml.MappingNode):
            for k2, _ in vnode.value:
                lines[(knode.value, k2.value)] = k2.start_mark.line + 1
    return lines


def _where(lines, *path):
    ln = lines.get(tuple(path))
    loc = ".".join(path)
    return f"{loc} (line {ln})" if ln else loc


def _as_float(x):
    if isinstance(x, str) and x.strip().lower() in ("inf", "infinity"):
        return float("inf")
    return float(x)


def _coerce(section, key, value, default):
    if key == "N":
        vals = value if isinstance(value, (list, tuple)) else [value]
        return tuple(_as_float(v) for v in vals)
    if key == "pairs":
        return tuple((_as_float(q), _as_float(r)) for q, r in value)
    if key == "functionals":
        return tuple(str(v) for v in value)
    if key == "seeds":
        if value is None:
            return None
        if isinstance(value, str):
            return parse_seed_range(value)
        a, b = value
        return (int(a), int(b))
    if value is None:
        return None
    if isinstance(default, bool) or key in ("dealias",):
        if not isinstance(value, bool):
            raise TypeError(f"expected a boolean, got {value!r}")
        return value
    if isinstance(default, int):
        if isinstance(value, bool) or float(value) != int(value):
            raise TypeError(f"expected an integer, got {value!r}")
        return int(value)
    if isinstance(default, float):
        if isinstance(value, bool):
            raise TypeError(f"expected a number, got {value!r}")
        return _as_float(value)
    if isinstance(default, str):
        return str(value)
    return value


def from_dict(data: dict, lines=None, paper_regime: bool = False) -> RunConfig:
    lines = lines or {}
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigurationError("configuration root must be a mapping")
    sections = {}
    for name, body in data.items():
        if name not in _SECTION_TYPES:
            raise ConfigurationError(f"unknown section {_where(lines, name)}")
        typ = _SECTION_TYPES[name]
        body = body or {}
        if not isinstance(body, dict):
            raise ConfigurationError(f"section {_where(lines, name)} must be a mapping")
        defaults = typ()
        kwargs = {}
        known = {f.name for f in dataclasses.fields(typ)}
        for key, value in body.items():
            if key not in known:
                raise ConfigurationError(f"unknown field {_where(lines, name, key)}")
            try:
                kwargs[key] = _coerce(name, key, value, getattr(defaults, key))
            except (TypeError, ValueError) as exc:
                raise ConfigurationError(f"bad value for {_where(lines, name, key)}: {exc}") from None
        sections[name] = typ(**kwargs)
    cfg = RunConfig(**sections)
    validate(cfg, lines, paper_regime)
    return cfg


def loads(text: str, paper_regime: bool = False) -> RunConfig:
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigurationError(f"YAML syntax error: {exc}") from None
    return from_dict(data, _line_map(text), paper_regime)


def load(path, paper_regime: bool = False) -> RunConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigurationError(f"cannot read config {path}: {exc}") from None
    return loads(text, paper_regime)


def parse_seed_range(text: str) -> Tuple[int, int]:
    """``"A..B"`` (inclusive) or a single integer."""
    try:
        if ".." in text:
            a, b = text.split("..", 1)
            a, b = int(a), int(b)
        else:
            a = b = int(text)
    except ValueError:
        raise ConfigurationError(f"seed range must look like A..B, got {text!r}") from None
    if b < a:
        raise ConfigurationError(f"empty seed range {text!r}")
    return a, b


# --------------------------------------------------------------------------
# validation


def in_paper_regime(s: float, sigma: float) -> bool:
    return 3.0 / 7.0 < s <= 1.0 and 6.0 / 7.0 < sigma < 2.0 * s


def validate(cfg: RunConfig, lines=None, paper_regime: bool = False):
    lines = lines or {}

    def bad(msg, *path):
        raise ConfigurationError(f"{_where(lines, *path)}: {msg}")

    g = cfg.grid
    if g.n < 8 or g.n & (g.n - 1):
        bad("must be a power of two >= 8", "grid", "n")
    if not g.L > 0:
        bad("must be positive", "grid", "L")
    if g.d not in (1, 2, 3):
        bad("must be 1, 2 or 3", "grid", "d")
    p = cfg.profile
    if p.kind not in ("power", "gaussian", "constant"):
        bad("must be power, gaussian or constant", "profile", "kind")
    if p.kind == "power" and not 0.25 < p.s <= 1.0:
        bad("must lie in (1/4, 1]", "profile", "s")
    if not p.decay_margin > 0:
        bad("must be positive", "profile", "decay_margin")
    if p.kind == "gaussian" and not p.width > 0:
        bad("must be positive", "profile", "width")
    io = cfg.i_operator
    if not io.N or any(not n > 0 for n in io.N):
        bad("needs at least one positive truncation level", "i_operator", "N")
    if not 0.5 < io.sigma <= 1.0:
        bad("must lie in (1/2, 1]", "i_operator", "sigma")
    if io.transition not in ("power", "smoothstep"):
        bad("must be power or smoothstep", "i_operator", "transition")
    ev = cfg.evolution
    if not ev.dt > 0:
        bad("must be positive", "evolution", "dt")
    if not ev.t_end >= 0:
        bad("must be nonnegative", "evolution", "t_end")
    if ev.checkpoint_every < 1:
        bad("must be at least 1", "evolution", "checkpoint_every")
    dg = cfg.diagnostics
    if dg.scattering_window < 1:
        bad("must be at least 1", "diagnostics", "scattering_window")
    if dg.scattering_horizon not in ("wrap", "none"):
        try:
            float(dg.scattering_horizon)
        except ValueError:
            bad("must be wrap, none or a number", "diagnostics", "scattering_horizon")
    if cfg.ensemble.mode not in ("simulate", "gaussian-tail"):
        bad("must be simulate or gaussian-tail", "ensemble", "mode")
    if cfg.ensemble.workers < 1:
        bad("must be at least 1", "ensemble", "workers")

    if not in_paper_regime(p.s, io.sigma):
        msg = (f"(s, sigma) = ({p.s}, {io.sigma}) is outside 3/7 < s <= 1, 6/7 < sigma < 2s")
        if paper_regime:
            bad(msg, "i_operator", "sigma")
        warnings.warn(msg, UserWarning, stacklevel=2)
