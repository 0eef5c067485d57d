"""YAML experiment configuration: parsing, validation and fingerprints.

A config has a ``scenario`` block plus optional ``metric``, ``sweep``,
``game`` and ``output`` blocks; see ``configs/example.yaml`` for a full,
commented example. Every problem found is reported at once.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import yaml

from .distributions import DensityModel, HypothesisSet
from .errors import ConfigurationError
from .montecarlo import calibrated_h
from .scenario import (
    ATTACK_KINDS, RULE_KINDS, STOP_MODES, AttackStrategy, FusionRule, Scenario, rule_problems,
)

METRICS = ("delay", "worst_delay", "false_alarm", "isolation")
FAMILIES = ("gaussian", "bernoulli", "exponential")
_PARAMS = {"gaussian": ("mean", "variance"), "bernoulli": ("p",), "exponential": ("rate",)}

_SCENARIO_KEYS = {"N", "M", "hypotheses", "rule", "h", "gamma", "nu", "q_true", "attack",
                  "T_max", "master_seed", "trials", "mode", "stop", "workers"}
_TOP_KEYS = {"scenario", "metric", "isolation_target", "sweep", "game", "output"}


@dataclass(frozen=True)
class ExperimentConfig:
    scenario: Scenario
    metric: str = "delay"
    isolation_target: int | None = None
    gamma: float | None = None
    workers: int = 1
    sweep_axis: str | None = None
    sweep_values: tuple = ()
    game_gammas: tuple = ()
    csv_path: str | None = None
    precision: int = 6
    canonical: dict = field(default_factory=dict, compare=False)

    @property
    def fingerprint(self):
        return fingerprint(self.canonical)


def fingerprint(canonical: dict) -> str:
    """Stable 16-hex digest of a canonicalised config."""
    blob = json.dumps(canonical, sort_keys=True, separators=(",", ":"), default=str)
    return hashlib.sha256(blob.encode()).hexdigest()[:16]


def _num(v, name, problems, kind=float, allow_inf=False):
    """Coerce YAML scalars (including strings like '1e4' or 'inf')."""
    if isinstance(v, bool) or v is None:
        problems.append(f"{name}: expected a number, got {v!r}")
        return None
    try:
        x = float(v)
    except (TypeError, ValueError):
        problems.append(f"{name}: expected a number, got {v!r}")
        return None
    if math.isinf(x):
        if allow_inf:
            return x
        problems.append(f"{name}: must be finite")
        return None
    if math.isnan(x):
        problems.append(f"{name}: must not be NaN")
        return None
    if kind is int:
        if not x.is_integer():
            problems.append(f"{name}: expected an integer, got {v!r}")
            return None
        return int(x)
    return x


def _hypotheses(block, problems):
    if not isinstance(block, dict):
        problems.append("scenario.hypotheses: expected a mapping")
        return None
    if "densities" in block:
        dens = []
        for i, d in enumerate(block["densities"] or []):
            name = f"scenario.hypotheses.densities[{i}]"
            if not isinstance(d, dict):
                problems.append(f"{name}: expected a mapping")
                continue
            fam = d.get("family")
            if fam not in FAMILIES:
                problems.append(f"{name}.family: unknown family {fam!r} (valid: {', '.join(FAMILIES)})")
                continue
            params = {}
            for p in _PARAMS[fam]:
                if p not in d and not (fam == "gaussian" and p == "variance"):
                    problems.append(f"{name}.{p}: missing")
                    continue
                val = _num(d.get(p, 1.0), f"{name}.{p}", problems)
                if val is not None:
                    params[p] = val
            try:
                dens.append(DensityModel(fam, params))
            except (ValueError, TypeError) as exc:
                problems.append(f"{name}: {exc}")
        if len(dens) < 2:
            problems.append("scenario.hypotheses: need at least P_0 and one post-change density")
            return None
        return HypothesisSet(dens) if len(dens) == len(block["densities"]) else None
    fam = block.get("family", "gaussian")
    if fam != "gaussian":
        problems.append("scenario.hypotheses: 'means' shorthand is Gaussian only; use 'densities'")
        return None
    means = block.get("means")
    if not isinstance(means, list) or len(means) < 2:
        problems.append("scenario.hypotheses.means: need a list of at least two means")
        return None
    ms = [_num(m, f"scenario.hypotheses.means[{i}]", problems) for i, m in enumerate(means)]
    var = _num(block.get("variance", 1.0), "scenario.hypotheses.variance", problems)
    if None in ms or var is None:
        return None
    if not var > 0:
        problems.append("scenario.hypotheses.variance: must be > 0")
        return None
    return HypothesisSet.gaussian_means(ms, var)


def _rule(block, problems):
    if not isinstance(block, dict):
        problems.append("scenario.rule: expected a mapping with 'kind'")
        return None
    kind = block.get("kind")
    if kind not in RULE_KINDS:
        problems.append(f"scenario.rule.kind: unknown rule {kind!r} (valid: {', '.join(RULE_KINDS)})")
        return None
    d = block.get("d")
    if d is not None:
        d = _num(d, "scenario.rule.d", problems, int)
    revealed = tuple(block.get("revealed") or ())
    return FusionRule(kind, d=d, h=None, revealed=revealed)


def _attack(block, problems):
    if block is None:
        return None
    if isinstance(block, str):
        block = {"kind": block}
    if not isinstance(block, dict):
        problems.append("scenario.attack: expected a mapping or a kind name")
        return None
    kind = block.get("kind", "absent")
    if kind not in ATTACK_KINDS:
        problems.append(f"scenario.attack.kind: unknown attack {kind!r} "
                        f"(valid: {', '.join(ATTACK_KINDS)})")
        return None
    target = block.get("target")
    if target is not None:
        target = _num(target, "scenario.attack.target", problems, int)
    start = _num(block.get("start", 1), "scenario.attack.start", problems, int)
    comp = tuple(block.get("compromised") or ())
    return AttackStrategy(kind, comp, target, start if start is not None else 1)


def _yaml_load(text):
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        where = f"line {mark.line + 1}, column {mark.column + 1}: " if mark else ""
        msg = getattr(exc, "problem", None) or str(exc)
        raise ConfigurationError([f"syntax error at {where}{msg}"]) from None


def parse_config(text: str) -> ExperimentConfig:
    """Parse and validate a YAML experiment description.

    Raises :class:`ConfigurationError` listing every violated constraint.
    """
    doc = _yaml_load(text)
    if not isinstance(doc, dict):
        raise ConfigurationError(["config must be a mapping with a 'scenario' block"])
    problems = [f"unknown top-level key {k!r}" for k in sorted(set(doc) - _TOP_KEYS)]
    sc_block = doc.get("scenario")
    if not isinstance(sc_block, dict):
        raise ConfigurationError(problems + ["missing 'scenario' block"])
    problems += [f"scenario: unknown key {k!r}" for k in sorted(set(sc_block) - _SCENARIO_KEYS)]

    N = _num(sc_block.get("N"), "scenario.N", problems, int) if "N" in sc_block else None
    if "N" not in sc_block:
        problems.append("scenario.N: missing")
    M = _num(sc_block.get("M", 0), "scenario.M", problems, int)
    hs = _hypotheses(sc_block.get("hypotheses"), problems) if "hypotheses" in sc_block else None
    if "hypotheses" not in sc_block:
        problems.append("scenario.hypotheses: missing")
    rule = _rule(sc_block.get("rule"), problems)
    attack = _attack(sc_block.get("attack"), problems)
    if "master_seed" not in sc_block:
        problems.append("scenario.master_seed: missing (every experiment needs an explicit seed)")
        seed = None
    else:
        seed = _num(sc_block["master_seed"], "scenario.master_seed", problems, int)
    nu = _num(sc_block.get("nu", 0), "scenario.nu", problems, allow_inf=True)
    q_true = _num(sc_block.get("q_true", 1), "scenario.q_true", problems, int)
    T_max = sc_block.get("T_max")
    if T_max is not None:
        T_max = _num(T_max, "scenario.T_max", problems, int)
    trials = _num(sc_block.get("trials", 20_000), "scenario.trials", problems, int)
    workers = _num(sc_block.get("workers", 1), "scenario.workers", problems, int)
    mode = sc_block.get("mode", "full")
    stop = sc_block.get("stop", "single")
    if stop not in STOP_MODES:
        problems.append(f"scenario.stop: must be one of {', '.join(STOP_MODES)}")
    h = gamma = None
    if "h" in sc_block:
        h = _num(sc_block["h"], "scenario.h", problems)
    if "gamma" in sc_block:
        gamma = _num(sc_block["gamma"], "scenario.gamma", problems)
        if gamma is not None and not gamma > 1:
            problems.append("scenario.gamma: must be > 1")
            gamma = None
    if "h" not in sc_block and "gamma" not in sc_block:
        problems.append("scenario: give a threshold 'h' or a false-alarm target 'gamma'")

    metric = doc.get("metric", "delay")
    if metric not in METRICS:
        problems.append(f"metric: unknown metric {metric!r} (valid: {', '.join(METRICS)})")
    iso = doc.get("isolation_target")
    if iso is not None:
        iso = _num(iso, "isolation_target", problems, int)
    if metric == "isolation" and iso is None:
        problems.append("isolation_target: required when metric is 'isolation'")

    sweep_axis, sweep_values = None, ()
    if doc.get("sweep") is not None:
        sw = doc["sweep"]
        if not isinstance(sw, dict):
            problems.append("sweep: expected a mapping with 'axis' and 'values'")
        else:
            sweep_axis = sw.get("axis")
            if sweep_axis not in ("h", "gamma", "d", "attack"):
                problems.append("sweep.axis: must be one of h, gamma, d, attack")
            vals = sw.get("values")
            if not isinstance(vals, list) or not vals:
                problems.append("sweep.values: need a nonempty list")
            elif sweep_axis == "attack":
                bad = [v for v in vals if v not in ATTACK_KINDS]
                if bad:
                    problems.append(f"sweep.values: unknown attack kinds {bad} "
                                    f"(valid: {', '.join(ATTACK_KINDS)})")
                sweep_values = tuple(vals)
            else:
                conv = [_num(v, f"sweep.values[{i}]", problems,
                             int if sweep_axis == "d" else float) for i, v in enumerate(vals)]
                sweep_values = tuple(conv)

    game_gammas = ()
    if doc.get("game") is not None:
        g = doc["game"]
        vals = g.get("gammas") if isinstance(g, dict) else None
        if not isinstance(vals, list) or not vals:
            problems.append("game.gammas: need a nonempty list")
        else:
            game_gammas = tuple(_num(v, f"game.gammas[{i}]", problems) for i, v in enumerate(vals))

    out = doc.get("output") or {}
    csv_path = out.get("csv") if isinstance(out, dict) else None
    precision = _num(out.get("precision", 6), "output.precision", problems, int) \
        if isinstance(out, dict) else 6
    if precision is not None and not 1 <= precision <= 17:
        problems.append("output.precision: must lie in 1..17")

    sc = None
    if None not in (N, M, hs, rule, seed, nu, q_true, trials) and (h is not None or gamma is not None):
        placeholder = 1.0 if h is None else h
        if rule.kind == "genie":
            rule = FusionRule("genie", h=placeholder, revealed=rule.revealed)
        sc = Scenario(N=N, M=M, hypotheses=hs, rule=rule, h=placeholder, nu=nu, q_true=q_true,
                      attack=attack, T_max=T_max, master_seed=seed, trials=trials, mode=mode,
                      stop=stop)
        sp = sc.problems()
        problems += [f"scenario: {p}" for p in sp]
        if h is None and not sp:
            try:
                hh = calibrated_h(sc, gamma)
            except ValueError as exc:
                problems.append(f"scenario.gamma: {exc}")
            else:
                sc = sc.with_(h=hh)
                if rule.kind == "genie":
                    sc = sc.with_(rule=FusionRule("genie", h=hh, revealed=rule.revealed))
        if iso is not None and sc.Q and not (1 <= iso <= sc.Q and iso != q_true):
            problems.append("isolation_target: must be a hypothesis in 1..Q other than q_true")
    else:
        # the scenario could not be assembled; still report the structural checks
        if N is not None and M is not None:
            if not N > M:
                problems.append(f"scenario: need more honest than compromised sensors "
                                f"(N={N}, M={M})")
            if rule is not None:
                problems += [f"scenario: {p}" for p in rule_problems(rule, N, M)]
        if trials is not None and trials < 1:
            problems.append("scenario: trials must be >= 1")
    if workers is not None and workers < 1:
        problems.append("scenario.workers: must be >= 1")
    if problems:
        raise ConfigurationError(problems)
    return ExperimentConfig(sc, metric, iso, gamma, workers, sweep_axis, sweep_values,
                            game_gammas, csv_path, precision, canonical=_canonical(doc))


def _canonical(doc):
    """Normalise a parsed document so equivalent spellings hash alike."""
    def norm(v):
        if isinstance(v, dict):
            return {str(k): norm(x) for k, x in sorted(v.items(), key=lambda p: str(p[0]))}
        if isinstance(v, (list, tuple)):
            return [norm(x) for x in v]
        if isinstance(v, bool) or v is None:
            return v
        if isinstance(v, (int, float)):
            return repr(float(v))
        try:
            return repr(float(v))
        except (TypeError, ValueError):
            return str(v)
    d = dict(doc)
    d.pop("output", None)  # where results go does not change them
    return norm(d)


def load_config(path) -> ExperimentConfig:
    with open(path, encoding="utf-8") as fh:
        return parse_config(fh.read())
