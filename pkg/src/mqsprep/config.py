"""Run configuration: a YAML file, validated up front."""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
import yaml

BUILTINS = ("gaussian", "bivariate-gaussian", "cos-sum", "uniform", "step")
OUT_ENV = "MQSPREP_OUT_DIR"


class ConfigError(ValueError):
    pass


def _range(name, v, lo, hi, lo_open=True, hi_open=True):
    try:
        v = float(v)
    except (TypeError, ValueError):
        raise ConfigError(f"{name} must be a number") from None
    bad = (v <= lo if lo_open else v < lo) or (v >= hi if hi_open else v > hi)
    if bad or not np.isfinite(v):
        raise ConfigError(f"{name}={v} outside {'(' if lo_open else '['}{lo}, {hi}{')' if hi_open else ']'}")
    return v


def _int(name, v, lo, hi):
    if isinstance(v, bool) or not isinstance(v, (int, np.integer)):
        raise ConfigError(f"{name} must be an integer")
    if not lo <= v <= hi:
        raise ConfigError(f"{name}={v} outside [{lo}, {hi}]")
    return int(v)


@dataclass
class Target:
    name: str
    params: dict = field(default_factory=dict)
    file: str | None = None

    def function(self, D: int) -> Callable:
        p = self.params
        if self.name == "gaussian":
            mu, sig = float(p.get("mu", 0.0)), float(p.get("sigma", 0.25))
            return lambda x: np.exp(-((x - mu) ** 2) / (2 * sig**2))
        if self.name == "bivariate-gaussian":
            m1, m2 = (float(v) for v in p.get("mu", [0.0, 0.0]))
            sig = float(p.get("sigma", 0.5))
            return lambda x1, x2: np.exp(-((x1 - m1) ** 2 + (x2 - m2) ** 2) / (2 * sig**2))
        if self.name == "cos-sum":
            k = [float(v) for v in p.get("coefficients", [1.0] * D)]
            return lambda *xs: np.cos(sum(c * x for c, x in zip(k, xs)))
        if self.name == "uniform":
            return lambda *xs: np.ones(np.broadcast(*xs).shape)
        if self.name == "step":
            l = float(p.get("threshold", 0.5))
            return lambda *xs: (sum(xs) / len(xs) <= l).astype(float)
        raise ConfigError(f"no callable form for target {self.name!r}")

    def grid(self, qubits) -> np.ndarray:
        path = Path(self.file)
        arr = np.load(path) if path.suffix == ".npy" else np.loadtxt(path, delimiter=",", ndmin=1)
        shape = tuple(1 << n for n in qubits)
        if arr.size != int(np.prod(shape)):
            raise ConfigError(f"grid file holds {arr.size} values, expected {int(np.prod(shape))}")
        return arr.reshape(shape)


@dataclass
class RunConfig:
    D: int
    qubits: tuple
    target: Target
    degree: int = 16
    degrees: tuple | None = None
    gap: float = 0.1
    theta_error: float = 0.002
    attempts: int = 8
    convention: str = "one-is-x1"
    fit_tol: float = 1e-6
    epsilon: float = 0.02
    delta: float = 0.1
    seed: int = 0
    shots: int = 100
    alpha: float = 0.6
    threshold: float | None = None
    theta: dict = field(default_factory=dict)
    distribution: Target | None = None
    coefficients: str | None = None
    out: str = "out"

    def out_dir(self, override: str | None = None) -> Path:
        d = Path(override or os.environ.get(OUT_ENV) or self.out)
        d.mkdir(parents=True, exist_ok=True)
        return d


def _target(d, where) -> Target:
    if not isinstance(d, dict) or "name" not in d:
        raise ConfigError(f"{where} needs a 'name'")
    name = d["name"]
    if name not in BUILTINS + ("grid", "coefficients"):
        raise ConfigError(f"{where}.name={name!r} is not one of {BUILTINS + ('grid', 'coefficients')}")
    if name in ("grid", "coefficients") and not d.get("file"):
        raise ConfigError(f"{where}: '{name}' needs a file")
    params = d.get("params") or {}
    if not isinstance(params, dict):
        raise ConfigError(f"{where}.params must be a mapping")
    if "sigma" in params:
        _range(f"{where}.params.sigma", params["sigma"], 0, 10)
    if "threshold" in params:
        _range(f"{where}.params.threshold", params["threshold"], 0, 1)
    return Target(name, params, d.get("file"))


def parse_config(data: dict, base: Path | None = None) -> RunConfig:
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    prob = data.get("problem") or {}
    syn = data.get("synthesis") or {}
    est = data.get("estimation") or {}
    out = data.get("output") or {}
    qubits = prob.get("qubits")
    if not isinstance(qubits, list) or not qubits:
        raise ConfigError("problem.qubits must be a nonempty list")
    qubits = tuple(_int("problem.qubits[]", n, 1, 12) for n in qubits)
    D = _int("problem.variables", prob.get("variables", len(qubits)), 1, 8)
    if D != len(qubits):
        raise ConfigError("problem.variables must match len(problem.qubits)")
    if sum(qubits) > 20:
        raise ConfigError("total variable qubits must not exceed 20")
    target = _target(prob.get("target", {"name": "uniform"}), "problem.target")
    dist = _target(prob["distribution"], "problem.distribution") if "distribution" in prob else None

    def rel(path):
        if path is None or base is None:
            return path
        p = Path(path)
        return str(p if p.is_absolute() else base / p)

    target.file = rel(target.file)
    if dist is not None:
        dist.file = rel(dist.file)
    cfg = RunConfig(D=D, qubits=qubits, target=target, distribution=dist)
    cfg.degree = _int("synthesis.degree", syn.get("degree", 16), 0, 2000)
    if syn.get("degrees") is not None:
        dg = syn["degrees"]
        if not isinstance(dg, list) or len(dg) != 2:
            raise ConfigError("synthesis.degrees must be [d1, d2]")
        cfg.degrees = tuple(_int("synthesis.degrees[]", v, 0, 24) for v in dg)
    cfg.gap = _range("synthesis.gap", syn.get("gap", 0.1), 0, 1)
    cfg.theta_error = _range("synthesis.theta_error", syn.get("theta_error", 0.002), 0, 1)
    cfg.attempts = _int("synthesis.attempts", syn.get("attempts", 8), 1, 1000)
    cfg.fit_tol = _range("synthesis.fit_tol", syn.get("fit_tol", 1e-6), 0, 1)
    cfg.convention = syn.get("convention", "one-is-x1")
    if cfg.convention not in ("one-is-x1", "one-is-x2"):
        raise ConfigError("synthesis.convention must be 'one-is-x1' or 'one-is-x2'")
    cfg.coefficients = rel(syn.get("coefficients"))
    cfg.epsilon = _range("estimation.epsilon", est.get("epsilon", 0.02), 0, 1)
    cfg.delta = _range("estimation.delta", est.get("delta", 0.1), 0, 1)
    cfg.seed = _int("estimation.seed", est.get("seed", 0), 0, 2**63 - 1)
    cfg.shots = _int("estimation.shots", est.get("shots", 100), 1, 10**7)
    cfg.alpha = _range("estimation.alpha", est.get("alpha", 0.6), 0, 1)
    if est.get("threshold") is not None:
        cfg.threshold = _range("estimation.threshold", est["threshold"], 0, 1)
    theta = est.get("theta") or {}
    if theta:
        kind = theta.get("kind")
        if kind not in ("step", "constant"):
            raise ConfigError("estimation.theta.kind must be 'step' or 'constant'")
        if kind == "step":
            _range("estimation.theta.threshold", theta.get("threshold"), 0, 1)
        else:
            _range("estimation.theta.value", theta.get("value"), 0, 1, lo_open=False, hi_open=False)
    cfg.theta = dict(theta)
    cfg.out = str(out.get("dir", "out"))
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = yaml.safe_load(path.read_text())
    except (OSError, yaml.YAMLError) as exc:
        raise ConfigError(f"cannot read {path}: {exc}") from None
    return parse_config(data, path.parent)
