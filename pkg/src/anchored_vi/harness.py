"""Multi-seed experiment runner with oracle verification and CSV output."""
from __future__ import annotations

import csv
import math
import os
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from . import average, discounted
from .generative import SAMPLERS, GenerativeModel
from .generators import gen_cycle, gen_garnet, gen_river_swim
from .mdp import (TabularMdp, apply_bellman, apply_bellman_discounted, check_gamma, inf_norm, span)
from .mdpfile import read_mdp
from .oracles import (discounted_policy_q, discounted_vi, exact_anchored_vi, policy_gain)

SCHEMA_VERSION = 1
SOLVERS = ("savia", "savia_plus", "savid", "savid_plus", "exact_anc_vi")
DISCOUNTED = ("savid", "savid_plus")
CSV_COLUMNS = ("schema_version", "trial", "seed", "algo", "epsilon", "delta", "gamma", "n_or_N",
               "loops_I", "total_samples", "empirical_residual", "true_residual", "policy_gap",
               "wall_time_ms")
SUMMARY_COLUMNS = ("schema_version", "algo", "trials", "errors", "mean_N", "median_N", "q90_N",
                   "mean_samples", "median_samples", "q90_samples", "success_threshold",
                   "success_fraction")
DEFAULT_EXACT_ITERATIONS = 1000


def load_mdp_source(source: str) -> TabularMdp:
    """Build an MDP from ``cycle:N``, ``riverswim:N``, ``garnet:S,A,B,SEED`` or a file path."""
    family, sep, args = source.partition(":")
    if sep and family in ("cycle", "riverswim", "garnet"):
        nums = [int(x) for x in args.split(",")]
        if family == "cycle" and len(nums) == 1:
            return gen_cycle(nums[0])
        if family == "riverswim" and len(nums) == 1:
            return gen_river_swim(nums[0])
        if family == "garnet" and len(nums) == 4:
            return gen_garnet(*nums)
        raise ValueError(f"bad generator spec {source!r}")
    return read_mdp(source)


@dataclass(frozen=True)
class ExperimentConfig:
    """One multi-trial experiment.

    ``scaled`` runs the accuracy-scaled entry points: SAVIA+ at
    ``epsilon / 16`` and SAVID+ at ``epsilon (1 - gamma) / 24``. SAVID without
    ``n`` always uses the fixed-horizon entry point.
    """

    solver: str
    mdp_source: str
    epsilon: float = 0.1
    delta: float = 0.1
    gamma: float | None = None
    n: int | None = None
    trials: int = 1
    master_seed: int = 0
    oracle_mode: bool = True
    output_path: str | None = None
    sampler: str = "draws"
    threads: int = 1
    workers: int = 1
    timing: bool = False
    scaled: bool = False
    max_loops: int = average.DEFAULT_MAX_LOOPS
    success_threshold: float | None = None

    def __post_init__(self):
        if self.solver not in SOLVERS:
            raise ValueError(f"solver must be one of {SOLVERS}")
        if int(self.trials) < 1:
            raise ValueError("trials must be >= 1")
        if self.sampler not in SAMPLERS:
            raise ValueError(f"sampler must be one of {SAMPLERS}")
        if self.solver != "exact_anc_vi":
            average._check_epsilon(self.epsilon)
            average._check_delta(self.delta)
        if self.solver in DISCOUNTED:
            if self.gamma is None:
                raise ValueError(f"{self.solver} needs gamma")
            check_gamma(self.gamma)
        if self.solver == "savia" and self.n is None:
            raise ValueError("savia needs n")
        if self.n is not None and int(self.n) < 0:
            raise ValueError("n must be >= 0")


@dataclass(frozen=True)
class TrialResult:
    trial: int
    seed: int
    algo: str
    epsilon: float
    delta: float
    gamma: float | None
    n_or_N: int
    loops_I: int | None
    total_samples: int
    empirical_residual: float
    true_residual: float | None
    policy_gap: float | None
    wall_time_ms: float | None
    schema_version: int = SCHEMA_VERSION


@dataclass(frozen=True)
class TrialError:
    trial: int
    seed: int
    message: str


@dataclass
class ExperimentResult:
    config: ExperimentConfig
    results: list
    errors: list
    summary: dict

    @property
    def exit_code(self) -> int:
        return 1 if self.errors else 0


@dataclass(frozen=True)
class _Reference:
    """Oracle quantities shared by all trials of an experiment."""

    Q_star: np.ndarray
    g_star: float | None


def _reference(config, mdp):
    if not config.oracle_mode:
        return None
    if config.solver in DISCOUNTED:
        return _Reference(discounted_vi(mdp, config.gamma, 1e-12), None)
    sol = exact_anchored_vi(mdp)
    return _Reference(sol.Q_star, sol.g_star)


def internal_epsilon(config: ExperimentConfig) -> float:
    """Accuracy parameter the solver actually runs at."""
    eps = float(config.epsilon)
    if config.solver == "savid" and config.n is None:
        return eps / 10.0
    if config.scaled and config.solver == "savia_plus":
        return eps / 16.0
    if config.scaled and config.solver == "savid_plus":
        return eps * (1.0 - config.gamma) / 24.0
    return eps


def _run_solver(config, mdp, seed):
    """Final output, n_or_N, loops_I and sample count of one trial."""
    Q0 = np.zeros(mdp.shape)
    eps, delta, gamma = internal_epsilon(config), config.delta, config.gamma
    if config.solver == "exact_anc_vi":
        n = DEFAULT_EXACT_ITERATIONS if config.n is None else int(config.n)
        return average.exact_savia(mdp, Q0, n), n, None, 0
    model = GenerativeModel(mdp, seed, sampler=config.sampler, threads=config.threads)
    if config.solver == "savia":
        out = average.savia(model, average.SaviaParams(Q0, config.n, eps, delta))
        return out, config.n, None, model.total_samples()
    if config.solver == "savid":
        if config.n is None:
            out = discounted.savid_fixed_horizon(model, config.epsilon, delta, gamma)
            n = discounted.fixed_horizon(config.epsilon, gamma)
        else:
            n = int(config.n)
            out = discounted.savid(model, discounted.SavidParams(Q0, n, eps, delta, gamma))
        return out, n, None, model.total_samples()
    if config.solver == "savia_plus":
        plus = average.savia_plus(model, Q0, eps, delta, max_loops=config.max_loops)
    else:
        plus = discounted.savid_plus(model, Q0, eps, delta, gamma, max_loops=config.max_loops)
    return plus.final, plus.N, plus.loop_index, plus.total_samples


def guarantee(config: ExperimentConfig, internal_eps: float, n: int, mu: float) -> float:
    """Bound on the policy gap implied by the solver's residual guarantee.

    ``mu`` is ``span(Q0 - Q*)`` (average) or ``|Q0 - Q*|_inf`` (discounted).
    Average-reward gaps are bounded by the span residual itself; discounted
    ones by ``2 residual / (1 - gamma)``.
    """
    s = config.solver
    if s == "exact_anc_vi":
        return 4.0 * mu / (n + 1)
    if s == "savia":
        return 8.0 * mu / (n + 2) + 4.0 * internal_eps
    if s == "savia_plus":
        return 16.0 * internal_eps
    if s == "savid":
        res = 8.0 * mu / (n + 2) + 2.0 * internal_eps
    else:
        res = 12.0 * internal_eps
    return 2.0 * res / (1.0 - config.gamma)


def run_trial(config: ExperimentConfig, mdp: TabularMdp, ref, trial: int):
    seed = int(config.master_seed) + trial
    try:
        t0 = time.perf_counter()
        out, n, loops, samples = _run_solver(config, mdp, seed)
        elapsed = (time.perf_counter() - t0) * 1e3
        discounted_run = config.solver in DISCOUNTED
        norm = inf_norm if discounted_run else span
        empirical = norm(out.T - out.Q)
        true_res = gap = None
        if ref is not None:
            if discounted_run:
                true_res = inf_norm(apply_bellman_discounted(mdp, out.Q, config.gamma) - out.Q)
                Q_pi = discounted_policy_q(mdp, out.policy, config.gamma)
                gap = inf_norm(ref.Q_star - Q_pi)
            else:
                true_res = span(apply_bellman(mdp, out.Q) - out.Q)
                gap = max(float((ref.g_star - policy_gain(mdp, out.policy)).max()), 0.0)
        return TrialResult(trial, seed, config.solver, float(config.epsilon), float(config.delta),
                           None if config.gamma is None else float(config.gamma), int(n), loops,
                           int(samples), empirical, true_res, gap,
                           elapsed if config.timing else None)
    except Exception as exc:  # noqa: BLE001 - reported per trial, run continues
        return TrialError(trial, seed, f"{type(exc).__name__}: {exc}")


def _run_trial_star(args):
    return run_trial(*args)


def run_experiment(config: ExperimentConfig, mdp: TabularMdp | None = None) -> ExperimentResult:
    """Run every trial, then write the per-trial CSV and summary when configured.

    Trial ``t`` uses seed ``master_seed + t``. Results are ordered by trial
    index whatever the worker count; a failing trial is recorded and the
    remaining trials still run.
    """
    if mdp is None:
        mdp = load_mdp_source(config.mdp_source)
    ref = _reference(config, mdp)
    jobs = [(config, mdp, ref, t) for t in range(int(config.trials))]
    if config.workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            outcomes = list(pool.map(_run_trial_star, jobs))
    else:
        outcomes = [_run_trial_star(job) for job in jobs]
    results = [o for o in outcomes if isinstance(o, TrialResult)]
    errors = [o for o in outcomes if isinstance(o, TrialError)]
    threshold = config.success_threshold
    if threshold is None and ref is not None:
        threshold = _default_threshold(config, mdp, ref, results)
    summary = summarize(results, threshold, algo=config.solver, errors=len(errors))
    if config.output_path:
        write_csv(results, config.output_path)
        write_summary(summary, summary_path(config.output_path))
    return ExperimentResult(config, results, errors, summary)


def _default_threshold(config, mdp, ref, results):
    Q0 = np.zeros(mdp.shape)
    mu = inf_norm(Q0 - ref.Q_star) if config.solver in DISCOUNTED else span(Q0 - ref.Q_star)
    if not results:
        return None
    # thresholds only differ across trials through N, and only fixed-n solvers use it
    r = results[0]
    return guarantee(config, internal_epsilon(config), r.n_or_N, mu)


def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, float):
        return format(value, ".17g")
    return str(value)


_INT_FIELDS = {"schema_version", "trial", "seed", "n_or_N", "loops_I", "total_samples"}


def _parse(name, text):
    if text == "":
        return None
    if name == "algo":
        return text
    if name in _INT_FIELDS:
        return int(text)
    return float(text)


def write_csv(results, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for r in results:
            w.writerow([_fmt(getattr(r, c)) for c in CSV_COLUMNS])


def read_csv(path) -> list:
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != CSV_COLUMNS:
            raise ValueError(f"unexpected CSV header {header}")
        out = []
        for row in reader:
            values = {c: _parse(c, v) for c, v in zip(CSV_COLUMNS, row)}
            if values["schema_version"] != SCHEMA_VERSION:
                raise ValueError(f"unsupported schema_version {values['schema_version']}")
            out.append(TrialResult(**values))
        return out


def summary_path(path) -> str:
    root, ext = os.path.splitext(path)
    return f"{root}.summary{ext or '.csv'}"


def summarize(results, threshold=None, *, algo="", errors=0) -> dict:
    """Mean, median and 0.9-quantile of N and samples, plus the success fraction.

    A trial succeeds when its oracle policy gap is at most ``threshold``.
    """
    N = np.array([r.n_or_N for r in results], dtype=np.float64)
    samples = np.array([r.total_samples for r in results], dtype=np.float64)

    def stats(x):
        if x.size == 0:
            return None, None, None
        return float(x.mean()), float(np.median(x)), float(np.quantile(x, 0.9))

    mean_n, med_n, q_n = stats(N)
    mean_s, med_s, q_s = stats(samples)
    gaps = [r.policy_gap for r in results if r.policy_gap is not None]
    frac = None
    if threshold is not None and gaps:
        frac = sum(g <= threshold for g in gaps) / len(gaps)
    return {"schema_version": SCHEMA_VERSION, "algo": algo, "trials": len(results),
            "errors": errors, "mean_N": mean_n, "median_N": med_n, "q90_N": q_n,
            "mean_samples": mean_s, "median_samples": med_s, "q90_samples": q_s,
            "success_threshold": None if threshold is None else float(threshold),
            "success_fraction": frac}


def write_summary(summary: dict, path) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(SUMMARY_COLUMNS)
        w.writerow([_fmt(summary[c]) for c in SUMMARY_COLUMNS])


def fit_scaling(groups, min_groups: int = 3, min_trials: int = 20) -> float:
    """Least-squares slope of log(mean total samples) against log(epsilon).

    ``groups`` maps epsilon to per-trial sample counts, or is a list of
    :class:`TrialResult` grouped here by their ``epsilon``.
    """
    if not isinstance(groups, dict):
        grouped = {}
        for r in groups:
            grouped.setdefault(r.epsilon, []).append(r.total_samples)
        groups = grouped
    if len(groups) < min_groups:
        raise ValueError(f"need at least {min_groups} epsilon levels, got {len(groups)}")
    xs, ys = [], []
    for eps, samples in sorted(groups.items()):
        if len(samples) < min_trials:
            raise ValueError(f"epsilon {eps} has {len(samples)} trials, need {min_trials}")
        xs.append(math.log(eps))
        ys.append(math.log(float(np.mean(samples))))
    slope, _ = np.polyfit(np.array(xs), np.array(ys), 1)
    return float(slope)


def statistical_band(delta: float, trials: int) -> float:
    """Largest acceptable failure count: ``delta T + 3 sqrt(delta (1 - delta) T)``."""
    return delta * trials + 3.0 * math.sqrt(delta * (1.0 - delta) * trials)


_CONFIG_KEYS = {
    "solver": str, "mdp": str, "epsilon": float, "delta": float, "gamma": float, "n": int,
    "trials": int, "master_seed": int, "oracle": "bool", "output": str, "sampler": str,
    "threads": int, "workers": int, "timing": "bool", "scaled": "bool", "max_loops": int,
    "success_threshold": float,
}
_CONFIG_RENAMES = {"mdp": "mdp_source", "oracle": "oracle_mode", "output": "output_path"}


def _parse_bool(text):
    low = text.lower()
    if low in ("1", "true", "yes", "on"):
        return True
    if low in ("0", "false", "no", "off"):
        return False
    raise ValueError(f"not a boolean: {text!r}")


def parse_config(text: str, base_dir: str | None = None) -> ExperimentConfig:
    """Parse ``key = value`` lines; ``#`` starts a comment.

    Relative ``mdp`` and ``output`` paths are resolved against ``base_dir``.
    """
    values = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, val = (p.strip() for p in line.partition("="))
        if not sep or key not in _CONFIG_KEYS:
            raise ValueError(f"line {lineno}: expected 'key = value' with a known key, got {raw!r}")
        kind = _CONFIG_KEYS[key]
        try:
            parsed = _parse_bool(val) if kind == "bool" else kind(val)
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from None
        values[_CONFIG_RENAMES.get(key, key)] = parsed
    for key in ("solver", "mdp_source"):
        if key not in values:
            raise ValueError(f"config is missing {key!r}")
    if base_dir:
        src = values["mdp_source"]
        if ":" not in src and not os.path.isabs(src):
            values["mdp_source"] = os.path.join(base_dir, src)
        out = values.get("output_path")
        if out and not os.path.isabs(out):
            values["output_path"] = os.path.join(base_dir, out)
    return ExperimentConfig(**values)


def report_errors(result: ExperimentResult, stream=None) -> None:
    stream = sys.stderr if stream is None else stream
    for e in result.errors:
        print(f"trial {e.trial} (seed {e.seed}) failed: {e.message}", file=stream)

