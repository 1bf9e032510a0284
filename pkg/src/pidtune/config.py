"""Experiment configuration files.

INI-style ``key = value`` files with ``#`` comments, one section per concern::

    [plant]      num, den (comma separated, descending powers of s), delay, dt
    [limits]     u_low, u_high
    [reference]  kind, limit, count, n_train, seed, horizon
    [gains]      k_p, k_i, k_d, b, alpha  (k_d absent -> PI, k_d not tuned)
    [tuning]     lr, epochs, beta1, beta2, eps
    [cost]       Q, R
    [dynamic]    hidden, lr, epochs, init_scale, seed
    [output]     dir

Unknown sections or keys are rejected, and every violation found is
reported at once.
"""
from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from importlib import resources
from pathlib import Path

from .controller import GAIN_NAMES, PidController, PidGains, SaturationLimits
from .lti import DiscreteModel, TransferFunction, discretize_tf
from .simloop import REFERENCE_KINDS, CostWeights, generate_references, split_references
from .tuner import TuneConfig

SHIPPED = ("system1", "system2", "system3", "system4")


class ConfigError(Exception):
    pass


class ConfigNotFound(ConfigError):
    pass


class ConfigParseError(ConfigError):
    pass


class ConfigValidationError(ConfigError):
    def __init__(self, path, problems: list[str]):
        self.problems = problems
        super().__init__(f"{path}: invalid configuration:\n  " + "\n  ".join(problems))


@dataclass(frozen=True)
class ReferenceSpec:
    kind: str = "step"
    limit: float = 1.0
    count: int = 30
    n_train: int = 20
    seed: int = 0
    horizon: int = 500


@dataclass(frozen=True)
class DynamicSpec:
    hidden: int = 8
    lr: float = 0.005
    epochs: int = 50
    init_scale: float = 0.1
    seed: int = 0


@dataclass(frozen=True)
class ExperimentConfig:
    name: str
    tf: TransferFunction
    dt: float
    limits: SaturationLimits
    reference: ReferenceSpec
    gains: PidGains
    active: tuple[str, ...]
    tuning: TuneConfig
    weights: CostWeights
    dynamic: DynamicSpec = field(default_factory=DynamicSpec)
    out_dir: str = "runs"

    def plant(self) -> DiscreteModel:
        return discretize_tf(self.tf, self.dt)

    def references(self):
        """(train, test) reference lists."""
        rs = self.reference
        refs = generate_references(rs.kind, rs.limit, rs.count, rs.horizon, rs.seed)
        return split_references(refs, rs.n_train)

    def initial_controller(self) -> PidController:
        """Configured gains without back-calculation."""
        return PidController(replace(self.gains, b=0.0), self.active)

    def backcalc_controller(self) -> PidController:
        return PidController(self.gains, self.active)

    def with_overrides(self, seed=None, epochs=None, out_dir=None) -> ExperimentConfig:
        cfg = self
        if seed is not None:
            cfg = replace(cfg, reference=replace(cfg.reference, seed=seed))
        if epochs is not None:
            cfg = replace(cfg, tuning=replace(cfg.tuning, epochs=epochs))
        if out_dir is not None:
            cfg = replace(cfg, out_dir=str(out_dir))
        return cfg


_SCHEMA = {
    "plant": {"num": "floats", "den": "floats", "delay": float, "dt": float},
    "limits": {"u_low": float, "u_high": float},
    "reference": {"kind": str, "limit": float, "count": int, "n_train": int, "seed": int, "horizon": int},
    "gains": {"k_p": float, "k_i": float, "k_d": float, "b": float, "alpha": float},
    "tuning": {"lr": float, "epochs": int, "beta1": float, "beta2": float, "eps": float},
    "cost": {"Q": float, "R": float},
    "dynamic": {"hidden": int, "lr": float, "epochs": int, "init_scale": float, "seed": int},
    "output": {"dir": str},
}
_REQUIRED = {
    "plant": ("num", "den", "dt"),
    "limits": ("u_low", "u_high"),
    "reference": ("limit",),
    "gains": ("k_p", "k_i"),
}


def resolve_config_path(name_or_path) -> Path:
    p = Path(name_or_path)
    if p.is_file():
        return p
    if str(name_or_path) in SHIPPED:
        return Path(str(resources.files("pidtune") / "configs" / f"{name_or_path}.ini"))
    raise ConfigNotFound(f"no such config file or shipped config: {name_or_path}")


def _convert(kind, raw: str):
    if kind == "floats":
        parts = [s.strip() for s in raw.split(",") if s.strip()]
        if not parts:
            raise ValueError("empty list")
        return tuple(float(s) for s in parts)
    if kind is int:
        return int(raw)
    if kind is float:
        return float(raw)
    return raw.strip()


def load_config(name_or_path) -> ExperimentConfig:
    path = resolve_config_path(name_or_path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigNotFound(f"cannot read {path}: {exc}") from exc
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#",))
    parser.optionxform = str
    try:
        parser.read_string(text, source=str(path))
    except configparser.Error as exc:
        raise ConfigParseError(f"{path}: {exc}") from exc
    if not parser.sections():
        raise ConfigParseError(f"{path}: no sections found (empty or not an INI file)")

    problems: list[str] = []
    values: dict[str, dict] = {s: {} for s in _SCHEMA}
    for section in parser.sections():
        if section not in _SCHEMA:
            problems.append(f"unknown section [{section}]")
            continue
        for key, raw in parser.items(section):
            if key not in _SCHEMA[section]:
                problems.append(f"unknown key {section}.{key}")
                continue
            try:
                values[section][key] = _convert(_SCHEMA[section][key], raw)
            except ValueError as exc:
                problems.append(f"{section}.{key}: cannot parse {raw!r} ({exc})")
    for section, keys in _REQUIRED.items():
        for key in keys:
            if key not in values[section] and f"{section}.{key}: cannot parse" not in " ".join(problems):
                problems.append(f"missing {section}.{key}")
    if problems:
        raise ConfigValidationError(path, problems)

    pl, li, rf, ga, tu, co, dy = (values[s] for s in ("plant", "limits", "reference", "gains", "tuning", "cost", "dynamic"))

    def check(cond, msg):
        if not cond:
            problems.append(msg)

    tf = None
    try:
        tf = TransferFunction(pl["num"], pl["den"], pl.get("delay", 0.0))
    except ValueError as exc:
        problems.append(f"plant: {exc}")
    check(pl["dt"] > 0, "plant.dt must be > 0")
    if tf is not None and pl["dt"] > 0:
        ratio = tf.delay / pl["dt"]
        check(abs(ratio - round(ratio)) <= 1e-9, f"plant.delay={tf.delay} must be an integer multiple of plant.dt={pl['dt']}")
    check(li["u_low"] < li["u_high"], f"limits.u_low ({li['u_low']}) must be < limits.u_high ({li['u_high']})")
    ref = ReferenceSpec(**rf)
    check(ref.kind in REFERENCE_KINDS, f"reference.kind must be one of {REFERENCE_KINDS}, got {ref.kind!r}")
    check(ref.limit > 0, "reference.limit must be > 0")
    check(ref.count >= 1, "reference.count must be >= 1")
    check(1 <= ref.n_train <= ref.count, "reference.n_train must lie in [1, count]")
    check(ref.horizon >= 1, "reference.horizon must be >= 1")
    alpha = ga.get("alpha", 0.0)
    check(0.0 <= alpha < 1.0, f"gains.alpha must lie in [0, 1), got {alpha}")
    tuning = TuneConfig(**tu)
    check(tuning.lr >= 0, "tuning.lr must be >= 0")
    check(tuning.epochs >= 0, "tuning.epochs must be >= 0")
    check(0 <= tuning.beta1 < 1 and 0 <= tuning.beta2 < 1, "tuning.beta1/beta2 must lie in [0, 1)")
    check(co.get("Q", 1.0) >= 0 and co.get("R", 0.0) >= 0 and co.get("Q", 1.0) + co.get("R", 0.0) > 0,
          "cost weights need Q >= 0, R >= 0, Q + R > 0")
    dyn = DynamicSpec(**dy)
    check(dyn.hidden >= 1, "dynamic.hidden must be >= 1")
    check(dyn.lr >= 0 and dyn.epochs >= 0, "dynamic.lr and dynamic.epochs must be >= 0")
    if problems:
        raise ConfigValidationError(path, problems)

    active = tuple(g for g in GAIN_NAMES if g in ga)
    gains = PidGains(ga["k_p"], ga["k_i"], ga.get("k_d", 0.0), ga.get("b", 0.0), alpha)
    weights = CostWeights(co.get("Q", 1.0), co.get("R", 0.0))
    tuning = replace(tuning, weights=weights, horizon=ref.horizon)
    return ExperimentConfig(
        name=path.stem,
        tf=tf,
        dt=pl["dt"],
        limits=SaturationLimits(li["u_low"], li["u_high"]),
        reference=ref,
        gains=gains,
        active=active,
        tuning=tuning,
        weights=weights,
        dynamic=dyn,
        out_dir=values["output"].get("dir", f"runs/{path.stem}"),
    )
