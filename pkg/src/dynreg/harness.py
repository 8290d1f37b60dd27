"""Scenario generation, experiment runs and CSV/JSON reporting.

A scenario is read from an INI file.  Sections::

    [scenario]           T, d, preconditioner, learner, seed, epsilon, trials, G
    [loss]               model = zero | rademacher | tracking | adversarial-file
    [loss.target]        comparator-style spec of the tracking target
    [comparator.<name>]  model = zero | static | piecewise-constant | drift | sinusoid | file
    [ladder]             T = 64, 128, ...
    [output]             per_round, oracle_check

``--set section.key=value`` overrides any entry.
"""

from __future__ import annotations

import configparser
import csv
import dataclasses
import json
import math
import os
import re
import time
from dataclasses import dataclass, field

import numpy as np

from .haar import HaarPreconditioner, haar_comparator_norm_sq, interval_average_gap, next_power_of_two, timescale_path_length
from .learners import DenseOracleReducer, FastHaarReducer, Reducer, ZeroPlayer
from .linalg import DifferencePreconditioner, IdentityPreconditioner, weighted_norm_sq
from .reduction import Trajectory, duality_gap, dynamic_regret, regret_records, run_reduction
from .verify import CheckResult

__all__ = [
    "ConfigError",
    "ComparatorSpec",
    "LossSpec",
    "ScenarioConfig",
    "Scenario",
    "TrialResult",
    "ExperimentReport",
    "LadderReport",
    "log_plus",
    "bound_form",
    "comparator_diagnostics",
    "generate_scenario",
    "run_experiment",
    "run_ladder",
    "emit_csv",
    "read_csv",
    "CSV_COLUMNS",
]

PRECONDITIONERS = ("identity", "difference", "haar")
LEARNERS = ("reducer", "zero")
LOSS_MODELS = ("zero", "rademacher", "tracking", "adversarial-file")
COMPARATOR_MODELS = ("zero", "static", "piecewise-constant", "drift", "sinusoid", "file")
CSV_COLUMNS = ("t", "w", "g", "regret_cum", "wealth", "V", "beta", "dual_norm")
ORACLE_MAX_T = 64


class ConfigError(ValueError):
    """Malformed configuration; the message starts with the offending field path."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


def _int(section: dict, key: str, where: str, default=None, minimum: int | None = 1) -> int:
    raw = section.get(key, default)
    if raw is None:
        raise ConfigError(f"{where}.{key}", "required")
    try:
        val = int(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{where}.{key}", f"expected an integer, got {raw!r}") from None
    if minimum is not None and val < minimum:
        raise ConfigError(f"{where}.{key}", f"must be at least {minimum}")
    return val


def _float(section: dict, key: str, where: str, default=None, positive: bool = False, nonneg: bool = False) -> float:
    raw = section.get(key, default)
    if raw is None:
        raise ConfigError(f"{where}.{key}", "required")
    try:
        val = float(str(raw).strip())
    except ValueError:
        raise ConfigError(f"{where}.{key}", f"expected a number, got {raw!r}") from None
    if not math.isfinite(val):
        raise ConfigError(f"{where}.{key}", "must be finite")
    if positive and val <= 0:
        raise ConfigError(f"{where}.{key}", "must be positive")
    if nonneg and val < 0:
        raise ConfigError(f"{where}.{key}", "must be nonnegative")
    return val


def _bool(section: dict, key: str, where: str, default: bool = False) -> bool:
    raw = section.get(key)
    if raw is None:
        return default
    s = str(raw).strip().lower()
    if s in ("1", "true", "yes", "on"):
        return True
    if s in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"{where}.{key}", f"expected a boolean, got {raw!r}")


def _vector(raw: str, d: int, where: str) -> np.ndarray:
    try:
        vals = [float(x) for x in re.split(r"[,\s]+", str(raw).strip()) if x]
    except ValueError:
        raise ConfigError(where, f"expected comma-separated numbers, got {raw!r}") from None
    if len(vals) == 1:
        return np.full(d, vals[0])
    if len(vals) != d:
        raise ConfigError(where, f"expected {d} values, got {len(vals)}")
    return np.array(vals)


@dataclass(frozen=True)
class ComparatorSpec:
    name: str
    model: str
    params: dict = field(default_factory=dict)

    @classmethod
    def parse(cls, name: str, section: dict, where: str) -> "ComparatorSpec":
        model = str(section.get("model", "")).strip()
        if model not in COMPARATOR_MODELS:
            raise ConfigError(f"{where}.model", f"expected one of {', '.join(COMPARATOR_MODELS)}, got {model!r}")
        params = {k: v for k, v in section.items() if k != "model"}
        return cls(name, model, params)


@dataclass(frozen=True)
class LossSpec:
    model: str = "rademacher"
    G: float | None = None
    target: ComparatorSpec | None = None
    path: str | None = None


@dataclass(frozen=True)
class ScenarioConfig:
    T: int
    d: int = 1
    preconditioner: str = "haar"
    learner: str = "reducer"
    loss: LossSpec = LossSpec()
    comparators: tuple = (ComparatorSpec("zero", "zero"),)
    seed: int = 0
    epsilon: float = 1.0
    trials: int = 1
    G: float = 1.0
    ladder: tuple = ()
    per_round: bool = False
    oracle_check: bool = False
    base_dir: str = "."

    def __post_init__(self):
        if self.T < 1:
            raise ConfigError("scenario.T", "must be at least 1")
        if self.d < 1:
            raise ConfigError("scenario.d", "must be at least 1")
        if self.preconditioner not in PRECONDITIONERS:
            raise ConfigError("scenario.preconditioner",
                              f"expected one of {', '.join(PRECONDITIONERS)}, got {self.preconditioner!r}")
        if self.learner not in LEARNERS:
            raise ConfigError("scenario.learner", f"expected one of {', '.join(LEARNERS)}, got {self.learner!r}")
        if self.loss.model not in LOSS_MODELS:
            raise ConfigError("loss.model", f"expected one of {', '.join(LOSS_MODELS)}, got {self.loss.model!r}")
        if self.epsilon <= 0:
            raise ConfigError("scenario.epsilon", "must be positive")
        if self.G <= 0:
            raise ConfigError("scenario.G", "must be positive")
        if self.trials < 1:
            raise ConfigError("scenario.trials", "must be at least 1")
        if not 0 <= self.seed < 2 ** 64:
            raise ConfigError("scenario.seed", "must fit in an unsigned 64-bit integer")
        if not self.comparators:
            raise ConfigError("comparator", "at least one comparator is required")

    @property
    def loss_G(self) -> float:
        return self.G if self.loss.G is None else self.loss.G

    @property
    def padded_T(self) -> int:
        return next_power_of_two(self.T) if self.preconditioner == "haar" else self.T

    def replace(self, **changes) -> "ScenarioConfig":
        return dataclasses.replace(self, **changes)

    @classmethod
    def from_sections(cls, sections: dict, base_dir: str = ".") -> "ScenarioConfig":
        """Build from ``{section: {key: value}}``, as read from an INI file."""
        sc = sections.get("scenario")
        if sc is None:
            raise ConfigError("scenario", "missing section")
        T = _int(sc, "T", "scenario")
        d = _int(sc, "d", "scenario", 1)
        G = _float(sc, "G", "scenario", 1.0, positive=True)
        ls = sections.get("loss", {})
        model = str(ls.get("model", "rademacher")).strip()
        target = None
        if model == "tracking":
            tsec = sections.get("loss.target")
            if tsec is None:
                raise ConfigError("loss.target", "tracking losses need a [loss.target] section")
            target = ComparatorSpec.parse("target", tsec, "loss.target")
        path = ls.get("path")
        if model == "adversarial-file" and not path:
            raise ConfigError("loss.path", "required for adversarial-file losses")
        loss = LossSpec(model, _float(ls, "G", "loss", G, nonneg=True) if "G" in ls else None, target, path)
        comps = []
        for name, sec in sections.items():
            if name.startswith("comparator."):
                cname = name.split(".", 1)[1]
                if not cname:
                    raise ConfigError(name, "comparator sections are named [comparator.<name>]")
                comps.append(ComparatorSpec.parse(cname, sec, name))
        if target is not None and all(c.name != "target" for c in comps):
            comps.append(target)
        if not comps:
            comps.append(ComparatorSpec("zero", "zero"))
        ladder = ()
        if "ladder" in sections and "T" in sections["ladder"]:
            try:
                ladder = tuple(int(x) for x in re.split(r"[,\s]+", str(sections["ladder"]["T"]).strip()) if x)
            except ValueError:
                raise ConfigError("ladder.T", "expected integers separated by commas or spaces") from None
            if any(x < 1 for x in ladder):
                raise ConfigError("ladder.T", "horizons must be positive")
        out = sections.get("output", {})
        return cls(
            T=T,
            d=d,
            preconditioner=str(sc.get("preconditioner", "haar")).strip(),
            learner=str(sc.get("learner", "reducer")).strip(),
            loss=loss,
            comparators=tuple(comps),
            seed=_int(sc, "seed", "scenario", 0, minimum=0),
            epsilon=_float(sc, "epsilon", "scenario", 1.0, positive=True),
            trials=_int(sc, "trials", "scenario", 1),
            G=G,
            ladder=ladder,
            per_round=_bool(out, "per_round", "output"),
            oracle_check=_bool(out, "oracle_check", "output"),
            base_dir=base_dir,
        )

    @classmethod
    def from_file(cls, path, overrides=()) -> "ScenarioConfig":
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(os.fspath(path)) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(str(path), f"cannot read config: {exc.strerror or exc}") from None
        except configparser.Error as exc:
            raise ConfigError(str(path), f"malformed config: {exc}") from None
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
        apply_overrides(sections, overrides)
        return cls.from_sections(sections, os.path.dirname(os.path.abspath(os.fspath(path))))


def apply_overrides(sections: dict, overrides) -> dict:
    """Apply ``section.key=value`` strings; the key is after the last dot."""
    for item in overrides:
        if "=" not in item:
            raise ConfigError(item, "overrides look like section.key=value")
        lhs, value = item.split("=", 1)
        if "." not in lhs:
            raise ConfigError(lhs, "overrides look like section.key=value")
        sec, key = lhs.strip().rsplit(".", 1)
        sections.setdefault(sec, {})[key] = value.strip()
    return sections


def _unit(d: int) -> np.ndarray:
    return np.ones(d) / math.sqrt(d)


def _segments(T: int, K: int) -> list[np.ndarray]:
    return np.array_split(np.arange(T), K)


def _load_rows(path: str, base_dir: str, T: int, d: int, where: str) -> np.ndarray:
    full = path if os.path.isabs(path) else os.path.join(base_dir, path)
    try:
        arr = np.loadtxt(full, ndmin=2, delimiter=None)
    except OSError:
        raise ConfigError(where, f"cannot read {full}") from None
    except ValueError as exc:
        raise ConfigError(where, f"{full}: {exc}") from None
    if arr.shape != (T, d):
        raise ConfigError(where, f"{full} has shape {arr.shape}, expected ({T}, {d})")
    return arr


def build_comparator(spec: ComparatorSpec, T: int, d: int, rng: np.random.Generator | None = None,
                     losses: np.ndarray | None = None, base_dir: str = ".") -> np.ndarray | None:
    """The ``(T, d)`` comparator sequence, or ``None`` when it needs losses that are not known yet."""
    where = f"comparator.{spec.name}"
    p = spec.params
    if spec.model == "zero":
        return np.zeros((T, d))
    if spec.model == "static":
        u = _vector(p["u"], d, f"{where}.u") if "u" in p else _float(p, "magnitude", where, 1.0) * _unit(d)
        return np.tile(u, (T, 1))
    if spec.model == "piecewise-constant":
        K = _int(p, "K", where, 2)
        if K > T:
            raise ConfigError(f"{where}.K", f"{K} segments do not fit in {T} rounds")
        mag = _float(p, "magnitude", where, 1.0, nonneg=True)
        mode = str(p.get("values", "hindsight")).strip()
        U = np.zeros((T, d))
        segs = _segments(T, K)
        if mode == "hindsight":
            if losses is None:
                return None
            for seg in segs:
                U[seg] = -mag * np.sign(losses[seg].sum(axis=0)) / math.sqrt(d)
        elif mode == "random":
            if rng is None:
                raise ConfigError(f"{where}.values", "random values need a generator")
            for seg in segs:
                U[seg] = mag * rng.choice((-1.0, 1.0), size=d) / math.sqrt(d)
        else:
            parts = [x for x in mode.split(";") if x.strip()]
            if len(parts) != K:
                raise ConfigError(f"{where}.values", f"expected {K} segment values, got {len(parts)}")
            for seg, part in zip(segs, parts):
                U[seg] = _vector(part, d, f"{where}.values")
        return U
    if spec.model == "drift":
        step = _float(p, "step", where, 0.01)
        start = _float(p, "start", where, 0.0)
        return (start + step * np.arange(T))[:, None] * _unit(d)
    if spec.model == "sinusoid":
        period = _float(p, "period", where, float(T), positive=True)
        amp = _float(p, "amplitude", where, 1.0)
        phase = _float(p, "phase", where, 0.0)
        return (amp * np.sin(2 * math.pi * np.arange(T) / period + phase))[:, None] * _unit(d)
    if spec.model == "file":
        if "path" not in p:
            raise ConfigError(f"{where}.path", "required for file comparators")
        return _load_rows(p["path"], base_dir, T, d, f"{where}.path")
    raise ConfigError(f"{where}.model", f"unknown model {spec.model!r}")


@dataclass
class Scenario:
    """One trial's inputs over the real (unpadded) rounds.

    Exactly one of ``losses`` (``(T, d)``) and ``loss_fn`` is set.  Comparators
    that are chosen in hindsight stay ``None`` until :meth:`resolve`.
    """

    config: ScenarioConfig
    losses: np.ndarray | None
    loss_fn: object | None
    comparators: dict
    rng: np.random.Generator

    def __iter__(self):
        yield self.losses
        yield self.comparators

    def resolve(self, losses: np.ndarray) -> dict:
        cfg = self.config
        for spec in cfg.comparators:
            if self.comparators.get(spec.name) is None:
                self.comparators[spec.name] = build_comparator(spec, cfg.T, cfg.d, self.rng, losses, cfg.base_dir)
        return self.comparators


def trial_seeds(seed: int, trials: int) -> list[np.random.SeedSequence]:
    return np.random.SeedSequence(seed).spawn(trials)


def generate_scenario(config: ScenarioConfig, trial: int = 0) -> Scenario:
    """Deterministic losses and comparators for ``trial`` of ``config``."""
    rng = np.random.default_rng(trial_seeds(config.seed, trial + 1)[trial])
    T, d, G = config.T, config.d, config.loss_G
    model = config.loss.model
    losses = loss_fn = None
    if model == "zero":
        losses = np.zeros((T, d))
    elif model == "rademacher":
        losses = G * rng.choice((-1.0, 1.0), size=(T, d)) / math.sqrt(d)
    elif model == "adversarial-file":
        losses = _load_rows(config.loss.path, config.base_dir, T, d, "loss.path")
        norms = np.linalg.norm(losses, axis=1)
        if norms.max(initial=0.0) > config.G * (1 + 1e-9):
            raise ConfigError("loss.path", f"loss norm {norms.max():.6g} exceeds G={config.G:g}")
    else:
        target = build_comparator(config.loss.target, T, d, rng, None, config.base_dir)
        if target is None:
            raise ConfigError("loss.target.values", "a tracking target cannot be chosen in hindsight")
        scale = G / math.sqrt(d)

        def loss_fn(t, w, _target=target):
            if t > T:
                return np.zeros(d)
            return scale * np.sign(w - _target[t - 1])

    comps = {}
    for spec in config.comparators:
        if model == "tracking" and spec == config.loss.target:
            comps[spec.name] = target
        else:
            comps[spec.name] = build_comparator(spec, T, d, rng, losses, config.base_dir)
    return Scenario(config, losses, loss_fn, comps, rng)


def log_plus(x: float) -> float:
    return math.log(max(x, 1.0))


def bound_form(norm_M: float, V: float, gbound: float, eps: float) -> float:
    """``G eps + N (sqrt(V (1 + log+ r)) + G log+ r)`` with ``r = N sqrt(V) / (G eps)``."""
    base = gbound * eps
    r = norm_M * math.sqrt(V) / base
    return base + norm_M * (math.sqrt(V * (1 + log_plus(r))) + gbound * log_plus(r))


def _pad_repeat(U: np.ndarray, T_pad: int) -> np.ndarray:
    if U.shape[0] == T_pad:
        return U
    return np.vstack([U, np.repeat(U[-1:], T_pad - U.shape[0], axis=0)])


def make_preconditioner(kind: str, T: int):
    return {"identity": IdentityPreconditioner, "difference": DifferencePreconditioner, "haar": HaarPreconditioner}[kind](T)


def comparator_norm_M(U: np.ndarray, precond) -> float:
    """``||u~||_M`` for a comparator already padded to the preconditioner's order."""
    if isinstance(precond, HaarPreconditioner):
        return math.sqrt(haar_comparator_norm_sq(U))
    return math.sqrt(max(weighted_norm_sq(U, precond), 0.0))


def comparator_diagnostics(U: np.ndarray, precond, V: float) -> dict:
    """Path-length and norm diagnostics of one comparator.

    Path lengths use the real rounds; ``||u~||_M`` and the timescale
    quantities use the sequence padded by repeating its last value.
    """
    T_pad = precond.order
    padded = _pad_repeat(U, T_pad)
    diffs = np.linalg.norm(np.diff(U, axis=0), axis=1)
    norm_M = comparator_norm_M(padded, precond)
    out = {
        "norm_M": norm_M,
        "V": V,
        "sqrt_norm_sq_V": math.sqrt(norm_M * norm_M * V),
        "path_length": float(diffs.sum()),
        "path_length_sq": float(np.sum(diffs * diffs)),
    }
    if T_pad & (T_pad - 1) == 0:
        taus = [1 << i for i in range(T_pad.bit_length() - 1)]
        out["timescale_path_lengths"] = {str(tau): timescale_path_length(padded, tau) for tau in taus}
        out["interval_average_gap"] = interval_average_gap(padded) if T_pad > 1 else 0.0
    return out


@dataclass
class TrialResult:
    trial: int
    regrets: dict
    diagnostics: dict
    bound_forms: dict
    runtime_per_round: float
    checks: list
    trajectory: Trajectory | None = None
    comparators: dict = field(default_factory=dict)

    def to_dict(self, include_sequences: bool = False) -> dict:
        out = {
            "trial": self.trial,
            "regrets": self.regrets,
            "diagnostics": self.diagnostics,
            "bound_forms": self.bound_forms,
            "runtime_per_round": self.runtime_per_round,
            "checks": [c.to_dict() for c in self.checks],
        }
        if include_sequences:
            out["comparators"] = {k: v.tolist() for k, v in self.comparators.items()}
        return out


@dataclass
class ExperimentReport:
    config: dict
    T: int
    T_padded: int
    preconditioner: str
    trials: list
    checks: list
    summary: dict
    runtime_per_round: float

    @property
    def padded(self) -> bool:
        return self.T_padded != self.T

    @property
    def all_pass(self) -> bool:
        return all(c.passed for c in self.checks)

    def mean_regret(self, name: str) -> float:
        return self.summary[name]["mean_regret"]

    def to_dict(self, include_sequences: bool = False) -> dict:
        return {
            "config": self.config,
            "T": self.T,
            "T_padded": self.T_padded,
            "padded": self.padded,
            "preconditioner": self.preconditioner,
            "all_pass": self.all_pass,
            "checks": [c.to_dict() for c in self.checks],
            "summary": self.summary,
            "runtime_per_round": self.runtime_per_round,
            "trials": [t.to_dict(include_sequences) for t in self.trials],
        }

    def to_json(self, include_sequences: bool = False, **kw) -> str:
        return json.dumps(self.to_dict(include_sequences), **kw)


def _config_dict(config: ScenarioConfig) -> dict:
    d = dataclasses.asdict(config)
    d.pop("base_dir", None)
    return d


def _relative_error(a: np.ndarray, b: np.ndarray) -> float:
    scale = max(float(np.abs(b).max(initial=0.0)), 1e-300)
    return float(np.abs(a - b).max(initial=0.0)) / scale


def _drive(config: ScenarioConfig, scenario: Scenario, precond, backend):
    T_pad = precond.order
    G, eps, d = config.G, config.epsilon, config.d
    if scenario.losses is not None:
        padded = np.zeros((T_pad, d))
        padded[: config.T] = scenario.losses
    if config.learner == "zero":
        learner = ZeroPlayer(T_pad, d, G, eps)
    elif isinstance(precond, HaarPreconditioner):
        learner = FastHaarReducer(T_pad, d, G, eps, backend=backend)
        if scenario.losses is not None:
            start = time.perf_counter()
            out = learner.run(padded)
            elapsed = time.perf_counter() - start
            traj = Trajectory(out["plays"], padded, out["betas"], out["scalar_losses"], out["V"],
                              out["dual_norm_sq"], out["wealth_1d"], meta={"clipped": out["clipped"]})
            return learner, traj, elapsed
    else:
        learner = Reducer(precond, d, G, eps)
    start = time.perf_counter()
    if scenario.losses is not None:
        traj = run_reduction(learner, padded)
    else:
        traj = run_reduction(learner, loss_fn=scenario.loss_fn)
    elapsed = time.perf_counter() - start
    traj.meta["clipped"] = learner.bettor.clipped
    return learner, traj, elapsed


def _oracle_trajectory(config: ScenarioConfig, scenario: Scenario, precond) -> Trajectory:
    oracle = DenseOracleReducer.from_preconditioner(precond, config.d, config.G, config.epsilon)
    if scenario.losses is not None:
        padded = np.zeros((precond.order, config.d))
        padded[: config.T] = scenario.losses
        return run_reduction(oracle, padded)
    return run_reduction(oracle, loss_fn=scenario.loss_fn)


def run_trial(config: ScenarioConfig, trial: int, *, oracle_check: bool | None = None, backend: str | None = None,
              keep_trajectory: bool = False) -> TrialResult:
    oracle_check = config.oracle_check if oracle_check is None else oracle_check
    scenario = generate_scenario(config, trial)
    precond = make_preconditioner(config.preconditioner, config.padded_T)
    learner, traj, elapsed = _drive(config, scenario, precond, backend)
    T_pad = precond.order
    checks = []

    reducer = config.learner == "reducer"
    if reducer and T_pad <= ORACLE_MAX_T and (config.preconditioner == "haar" or oracle_check):
        ref = _oracle_trajectory(config, scenario, precond)
        err = _relative_error(traj.plays, ref.plays)
        checks.append(CheckResult("dense-oracle plays", err <= 1e-9, f"relative error {err:.3g}"))

    expected_V = float(np.sum(precond.inverse_diagonal() * np.sum(traj.losses ** 2, axis=1)))
    V = float(traj.V[-1]) if traj.rounds else 0.0
    if reducer:
        checks.append(CheckResult("V identity", abs(V - expected_V) <= 1e-9 * max(expected_V, 1.0),
                                  f"V={V:.17g} expected={expected_V:.17g}"))

    real = traj.truncated(config.T)
    comps = scenario.resolve(real.losses)
    regrets, diags, bounds = {}, {}, {}
    for name, U in comps.items():
        regrets[name] = dynamic_regret(real, U)
        diags[name] = comparator_diagnostics(U, precond, V)
        bounds[name] = bound_form(diags[name]["norm_M"], V, learner.gbound, config.epsilon)
        gap = duality_gap(real, U)
        scale = max(1.0, float(np.sum(np.abs(real.losses * (real.plays - U)))))
        checks.append(CheckResult(f"wealth duality [{name}]", abs(gap) <= 1e-10 * scale, f"gap {gap:.3g}"))
    if not np.any(real.losses):
        checks.append(CheckResult("zero losses give zero regret", all(r == 0.0 for r in regrets.values())))

    return TrialResult(
        trial=trial,
        regrets=regrets,
        diagnostics=diags,
        bound_forms=bounds,
        runtime_per_round=elapsed / max(T_pad, 1),
        checks=checks,
        trajectory=real if keep_trajectory else None,
        comparators=comps,
    )


def run_experiment(config: ScenarioConfig, *, per_round: bool | None = None, oracle_check: bool | None = None,
                   backend: str | None = None) -> ExperimentReport:
    """Run every trial of ``config`` and aggregate regrets, diagnostics and checks."""
    per_round = config.per_round if per_round is None else per_round
    results = [run_trial(config, i, oracle_check=oracle_check, backend=backend, keep_trajectory=per_round)
               for i in range(config.trials)]
    results.sort(key=lambda r: r.trial)

    checks = []
    names = []
    for r in results:
        for c in r.checks:
            if c.name not in names:
                names.append(c.name)
    for name in names:
        failing = [r.trial for r in results for c in r.checks if c.name == name and not c.passed]
        checks.append(CheckResult(name, not failing, f"failing trials {failing}" if failing else f"{len(results)} trials"))

    summary = {}
    for spec in config.comparators:
        regs = np.array([r.regrets[spec.name] for r in results])
        bnds = np.array([r.bound_forms[spec.name] for r in results])
        summary[spec.name] = {
            "mean_regret": float(regs.mean()),
            "std_regret": float(regs.std(ddof=1)) if len(regs) > 1 else 0.0,
            "mean_bound_form": float(bnds.mean()),
            "bound_constant": float(regs.mean() / bnds.mean()) if bnds.mean() > 0 else float("nan"),
            "mean_norm_M": float(np.mean([r.diagnostics[spec.name]["norm_M"] for r in results])),
            "mean_V": float(np.mean([r.diagnostics[spec.name]["V"] for r in results])),
        }
    return ExperimentReport(
        config=_config_dict(config),
        T=config.T,
        T_padded=config.padded_T,
        preconditioner=config.preconditioner,
        trials=results,
        checks=checks,
        summary=summary,
        runtime_per_round=float(np.mean([r.runtime_per_round for r in results])),
    )


@dataclass
class LadderReport:
    horizons: list
    reports: list
    exponents: dict
    constants: dict

    def constant_ratio(self, name: str) -> float:
        c = np.array(self.constants[name])
        return float(c.max() / c.min()) if np.all(c > 0) else float("inf")

    def to_dict(self) -> dict:
        return {
            "horizons": self.horizons,
            "exponents": self.exponents,
            "constants": self.constants,
            "constant_ratios": {k: self.constant_ratio(k) for k in self.constants},
            "rungs": [
                {"T": r.T, "T_padded": r.T_padded, "summary": r.summary, "all_pass": r.all_pass,
                 "runtime_per_round": r.runtime_per_round}
                for r in self.reports
            ],
        }


def growth_exponent(horizons, values) -> float:
    """Least-squares slope of ``log value`` against ``log T``; NaN if any value is not positive."""
    v = np.asarray(values, dtype=float)
    if np.any(v <= 0):
        return float("nan")
    return float(np.polyfit(np.log(np.asarray(horizons, dtype=float)), np.log(v), 1)[0])


def run_ladder(config: ScenarioConfig, horizons=None, **kw) -> LadderReport:
    horizons = list(horizons if horizons is not None else config.ladder)
    if not horizons:
        raise ConfigError("ladder.T", "no horizons given")
    reports = [run_experiment(config.replace(T=T), **kw) for T in horizons]
    names = [c.name for c in config.comparators]
    exponents = {n: growth_exponent(horizons, [r.mean_regret(n) for r in reports]) for n in names}
    constants = {n: [r.summary[n]["bound_constant"] for r in reports] for n in names}
    return LadderReport(horizons, reports, exponents, constants)


def _fmt(x: float) -> str:
    return format(float(x), ".17g")


def _vec(v) -> str:
    return ";".join(_fmt(x) for x in np.atleast_1d(v))


def emit_csv(obj, path) -> None:
    """Write RegretRecords (or an ExperimentReport summary) as CSV.

    Floats use 17 significant digits, so parsing the file gives the same
    doubles back.
    """
    path = os.fspath(path)
    try:
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            if isinstance(obj, ExperimentReport):
                writer.writerow(["trial", "comparator", "regret", "bound_form", "norm_M", "V",
                                 "path_length", "path_length_sq"])
                for r in obj.trials:
                    for name, reg in r.regrets.items():
                        dg = r.diagnostics[name]
                        writer.writerow([r.trial, name, _fmt(reg), _fmt(r.bound_forms[name]), _fmt(dg["norm_M"]),
                                         _fmt(dg["V"]), _fmt(dg["path_length"]), _fmt(dg["path_length_sq"])])
                return
            writer.writerow(CSV_COLUMNS)
            for rec in obj:
                writer.writerow([rec.t, _vec(rec.w), _vec(rec.g), _fmt(rec.regret_cum), _fmt(rec.wealth),
                                 _fmt(rec.V), _fmt(rec.beta), _fmt(rec.dual_norm)])
    except OSError as exc:
        raise OSError(exc.errno, f"cannot write {path}: {exc.strerror}") from exc


def read_csv(path) -> list[dict]:
    """Parse a RegretRecord CSV into dicts with numpy vectors for ``w`` and ``g``."""
    rows = []
    with open(os.fspath(path), newline="") as fh:
        reader = csv.DictReader(fh)
        if tuple(reader.fieldnames or ()) != CSV_COLUMNS:
            raise ValueError(f"{path}: unexpected header {reader.fieldnames}")
        for row in reader:
            rows.append({
                "t": int(row["t"]),
                "w": np.array([float(x) for x in row["w"].split(";")]),
                "g": np.array([float(x) for x in row["g"].split(";")]),
                **{k: float(row[k]) for k in CSV_COLUMNS[3:]},
            })
    return rows


def trial_records(result: TrialResult) -> list:
    """RegretRecords of a trial run with ``per_round``; regret is against the first comparator."""
    if result.trajectory is None:
        raise ValueError("trial was run without per-round records")
    return regret_records(result.trajectory, list(result.comparators.values()))
