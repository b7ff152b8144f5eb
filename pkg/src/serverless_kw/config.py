"""Experiment configuration files.

A config is an INI file with the sections ``[model]``, ``[cost]``,
``[policy]``, ``[schedules]``, ``[run]``, ``[sweep]`` and ``[fast]``. Every
section and key is optional; unknown ones are rejected. Lists are comma
separated; integer ranges may be written ``a-b`` (inclusive) and grids
``start:stop:step`` (inclusive of ``stop``).

Example
-------
::

    [model]
    lam = 0.15, 0.3
    N = 50

    [run]
    seeds = 0-19
    theta0 = 1, 10
"""
from __future__ import annotations

import configparser
import io
import math
from dataclasses import dataclass, field, replace

from .cost import CostWeights
from .model import ModelParams
from .optimizer import Schedules
from .policy import POLICY_KINDS, SmoothingSpec

__all__ = ["ConfigError", "ExperimentConfig", "load_config", "parse_config", "dump_config"]


class ConfigError(ValueError):
    pass


@dataclass(frozen=True)
class ExperimentConfig:
    lam: tuple[float, ...] = (0.3,)
    mu: float = 1.0
    beta: float = 0.1
    gamma_exp: float = 0.01
    N: int = 50
    handoff: str = "cancel"
    weights: CostWeights = field(default_factory=CostWeights)
    policy_kind: str = "simplified"
    epsilon: float = 0.5
    M: float | None = None
    schedules: Schedules = field(default_factory=lambda: _quiet(Schedules))
    seeds: tuple[int, ...] = (0,)
    theta0: tuple[float, ...] = (1.0,)
    theta_star: float | None = None
    out: str = "out"
    threads: int = 1
    grid: tuple[float, ...] = tuple(float(t) for t in range(16))
    bracket: tuple[float, float] | None = None
    update_every: tuple[int, ...] = (100, 1000)
    scenarios: tuple[int, ...] = (1, 2)
    gamma_scale: float | None = None

    def __post_init__(self):
        if not self.lam:
            raise ConfigError("[model] lam needs at least one value")
        for lam in self.lam:
            self.model(lam)
        if self.policy_kind not in POLICY_KINDS:
            raise ConfigError(f"[policy] kind must be one of {POLICY_KINDS}")
        try:
            self.smoothing.check_capacity(self.N)
        except ValueError as exc:
            raise ConfigError(f"[policy] {exc}") from None
        if not self.seeds or any(s < 0 or s >= 2**64 for s in self.seeds):
            raise ConfigError("[run] seeds must be nonempty unsigned 64-bit integers")
        if not self.theta0 or not all(math.isfinite(t) for t in self.theta0):
            raise ConfigError("[run] theta0 must be a nonempty list of finite numbers")
        if self.threads < 1:
            raise ConfigError("[run] threads must be >= 1")
        if self.bracket is not None and not self.bracket[0] < self.bracket[1]:
            raise ConfigError("[sweep] bracket must be 'lo, hi' with lo < hi")
        if any(u < 1 for u in self.update_every):
            raise ConfigError("[fast] update_every must be positive")
        if any(s not in (1, 2) for s in self.scenarios):
            raise ConfigError("[fast] scenarios must be 1 and/or 2")
        if self.gamma_scale is not None and not self.gamma_scale >= 0:
            raise ConfigError("[fast] gamma_scale must be >= 0")

    def model(self, lam: float | None = None) -> ModelParams:
        lam = self.lam[0] if lam is None else lam
        try:
            return ModelParams(lam, self.mu, self.beta, self.gamma_exp, self.N, self.handoff)
        except ValueError as exc:
            raise ConfigError(f"[model] {exc}") from None

    @property
    def smoothing(self) -> SmoothingSpec:
        M = self.N / 2 if self.M is None else self.M
        try:
            return SmoothingSpec(self.epsilon, M)
        except ValueError as exc:
            raise ConfigError(f"[policy] {exc}") from None

    @property
    def search_bracket(self) -> tuple[float, float]:
        if self.bracket is not None:
            return self.bracket
        return (0.0, self.smoothing.M)

    def override(self, **kw) -> "ExperimentConfig":
        return replace(self, **{k: v for k, v in kw.items() if v is not None})


def _quiet(factory, **kw):
    import warnings

    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        return factory(**kw)


def _floats(text: str) -> tuple[float, ...]:
    text = text.strip()
    if not text:
        return ()
    if ":" in text:
        parts = [float(p) for p in text.split(":")]
        if len(parts) != 3 or parts[2] <= 0:
            raise ConfigError(f"bad grid {text!r}, expected start:stop:step")
        start, stop, step = parts
        count = int(math.floor((stop - start) / step + 1e-9)) + 1
        return tuple(round(start + i * step, 12) for i in range(max(count, 0)))
    return tuple(float(p) for p in text.split(","))


def _ints(text: str) -> tuple[int, ...]:
    out: list[int] = []
    for part in text.split(","):
        part = part.strip()
        if not part:
            continue
        if "-" in part[1:]:
            a, b = part.split("-", 1)
            out.extend(range(int(a), int(b) + 1))
        else:
            out.append(int(part))
    return tuple(out)


def _fmt(values) -> str:
    return ", ".join(repr(v) for v in values)


# section -> key -> (field name, parser)
_SCHEMA = {
    "model": {
        "lam": ("lam", _floats),
        "mu": ("mu", float),
        "beta": ("beta", float),
        "gamma_exp": ("gamma_exp", float),
        "n": ("N", int),
        "handoff": ("handoff", str),
    },
    "cost": {k: (k, float) for k in ("w1", "w2", "w3", "w4", "w_rej")},
    "policy": {
        "kind": ("policy_kind", str),
        "epsilon": ("epsilon", float),
        "m": ("M", float),
    },
    "schedules": {
        "gamma0": ("gamma0", float),
        "gamma_power": ("gamma_power", float),
        "delta0": ("delta0", float),
        "delta_power": ("delta_power", float),
        "tau": ("tau", float),
        "tau_mode": ("tau_mode", str),
        "k": ("K", int),
        "t": ("T", float),
    },
    "run": {
        "seeds": ("seeds", _ints),
        "theta0": ("theta0", _floats),
        "theta_star": ("theta_star", float),
        "out": ("out", str),
        "threads": ("threads", int),
    },
    "sweep": {
        "grid": ("grid", _floats),
        "bracket": ("bracket", _floats),
    },
    "fast": {
        "update_every": ("update_every", _ints),
        "scenarios": ("scenarios", _ints),
        "gamma_scale": ("gamma_scale", float),
    },
}


def parse_config(text: str) -> ExperimentConfig:
    """Build a validated :class:`ExperimentConfig` from INI text."""
    cp = configparser.ConfigParser(interpolation=None)
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(str(exc)) from None
    top: dict = {}
    weights: dict = {}
    sched: dict = {}
    for section in cp.sections():
        if section not in _SCHEMA:
            raise ConfigError(f"unknown section [{section}]")
        for key, raw in cp.items(section):
            if key not in _SCHEMA[section]:
                raise ConfigError(f"unknown key {key!r} in [{section}]")
            name, conv = _SCHEMA[section][key]
            try:
                value = conv(raw)
            except (TypeError, ValueError) as exc:
                raise ConfigError(f"[{section}] {key} = {raw!r}: {exc}") from None
            if section == "cost":
                weights[name] = value
            elif section == "schedules":
                sched[name] = value
            else:
                top[name] = value
    if "bracket" in top:
        if len(top["bracket"]) != 2:
            raise ConfigError("[sweep] bracket must be 'lo, hi'")
        top["bracket"] = tuple(top["bracket"])
    try:
        top["weights"] = CostWeights(**weights)
        top["schedules"] = _quiet(Schedules, **sched)
        return ExperimentConfig(**top)
    except ConfigError:
        raise
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    return parse_config(text)


def dump_config(cfg: ExperimentConfig) -> str:
    """INI text that :func:`parse_config` turns back into ``cfg``."""
    s, w = cfg.schedules, cfg.weights
    cp = configparser.ConfigParser(interpolation=None)
    cp.optionxform = str
    cp["model"] = {
        "lam": _fmt(cfg.lam), "mu": repr(cfg.mu), "beta": repr(cfg.beta),
        "gamma_exp": repr(cfg.gamma_exp), "N": str(cfg.N), "handoff": cfg.handoff,
    }
    cp["cost"] = {k: repr(getattr(w, k)) for k in ("w1", "w2", "w3", "w4", "w_rej")}
    cp["policy"] = {"kind": cfg.policy_kind, "epsilon": repr(cfg.epsilon)}
    if cfg.M is not None:
        cp["policy"]["M"] = repr(cfg.M)
    cp["schedules"] = {
        "gamma0": repr(s.gamma0), "gamma_power": repr(s.gamma_power),
        "delta0": repr(s.delta0), "delta_power": repr(s.delta_power),
        "tau": repr(s.tau), "tau_mode": s.tau_mode, "K": str(s.K), "T": repr(s.T),
    }
    cp["run"] = {
        "seeds": ", ".join(map(str, cfg.seeds)), "theta0": _fmt(cfg.theta0),
        "out": cfg.out, "threads": str(cfg.threads),
    }
    if cfg.theta_star is not None:
        cp["run"]["theta_star"] = repr(cfg.theta_star)
    cp["sweep"] = {"grid": _fmt(cfg.grid)}
    if cfg.bracket is not None:
        cp["sweep"]["bracket"] = _fmt(cfg.bracket)
    cp["fast"] = {
        "update_every": ", ".join(map(str, cfg.update_every)),
        "scenarios": ", ".join(map(str, cfg.scenarios)),
    }
    if cfg.gamma_scale is not None:
        cp["fast"]["gamma_scale"] = repr(cfg.gamma_scale)
    buf = io.StringIO()
    cp.write(buf)
    return buf.getvalue()
