"""``subreg generate|run|verify``.

Exit codes: 0 success, 1 configuration error, 2 runtime failure,
3 verification failure. Progress goes to stderr; data goes to files (and
the K-sweep summary table to stdout).

Config file (YAML mapping; unknown keys are errors):

    family: coverage | nqp | dopt      (required)
    T: horizon                          (default 100)
    n, m, N, universe, degree: instance dimensions (family defaults)
    K: Meta-FW instances                (default ceil(sqrt(T)))
    eta: step size for every gradient policy, or a mapping policy -> eta
    seeds: list of master seeds         (default [0])
    policies: list of policy kinds      (family default)
    checkpoints: rounds with hindsight optima (default 20 geometric)
    stochastic: use stochastic gradients for meta_fw and oga (default false;
                meta_fw draws fresh noise for each of its K queries)
    k_off: offline Frank-Wolfe steps for hindsight optima (default 200)
    samples: property-check sample count for verify (default 200)
    instances: directory of {family}_{seed}.inst files to replay
    inject_fault: none | sign_flip_nqp (verify only; positive NQP matrix)
"""

from __future__ import annotations

import argparse
import logging
import os
import re
import sys
from dataclasses import dataclass, field

import numpy as np
import yaml

from .algorithms import POLICY_KINDS
from .core import Rng
from .harness import (
    ALPHA_FW,
    DEFAULT_DIMS,
    ExperimentSpec,
    InstanceSequence,
    build_instances,
    compute_alpha_regret,
    hindsight_table,
    make_cell_policy,
    run_cell,
    run_episode,
    run_matrix,
    theorem_bound_check,
    traces_to_csv,
)
from .objectives import FAMILIES, io
from .objectives.checks import (
    check_beta_smooth,
    check_concave_along_nonneg,
    check_dr_submodular,
    check_weak_dr_inequality,
)
from .objectives.nqp import NqpObjective

log = logging.getLogger("subreg")

EXIT_OK, EXIT_CONFIG, EXIT_RUNTIME, EXIT_VERIFY = 0, 1, 2, 3

DEFAULT_POLICIES = {
    "coverage": ["meta_fw", "oga", "random100", "surrogate_ga"],
    "nqp": ["meta_fw", "oga", "random100"],
    "dopt": ["meta_fw", "oga", "random100"],
}
DIM_KEYS = ("n", "m", "N", "universe", "degree")
CONFIG_KEYS = {"family", "T", "K", "eta", "seeds", "policies", "checkpoints", "stochastic",
               "k_off", "samples", "instances", "inject_fault", *DIM_KEYS}
FAULTS = ("none", "sign_flip_nqp")


class ConfigError(Exception):
    def __init__(self, message, line=None):
        super().__init__(f"line {line}: {message}" if line else message)


@dataclass
class Config:
    family: str
    horizon: int = 100
    dims: dict = field(default_factory=dict)
    k_meta: int | None = None
    eta: dict = field(default_factory=dict)
    seeds: list = field(default_factory=lambda: [0])
    policies: list = field(default_factory=list)
    checkpoints: list | None = None
    stochastic: bool = False
    k_off: int = 200
    samples: int = 200
    instances: str | None = None
    inject_fault: str = "none"

    def spec(self) -> ExperimentSpec:
        return ExperimentSpec(
            family=self.family, horizon_t=self.horizon, dims=self.dims,
            policies=[(k, {}) for k in self.policies], seeds=self.seeds, k_meta=self.k_meta,
            eta_overrides=self.eta, checkpoint_grid=self.checkpoints,
            stochastic_gradients=self.stochastic, k_off=self.k_off,
        )


def _int(value, key, line, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"'{key}' must be an integer", line)
    if minimum is not None and value < minimum:
        raise ConfigError(f"'{key}' must be at least {minimum}", line)
    return value


def _positive(value, key, line):
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not value > 0:
        raise ConfigError(f"'{key}' must be a positive number", line)
    return float(value)


def parse_config(text: str) -> Config:
    try:
        root = yaml.compose(text, Loader=yaml.SafeLoader)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"malformed YAML: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None) from None
    if root is None:
        raise ConfigError("config is empty")
    if not isinstance(root, yaml.MappingNode):
        raise ConfigError("config must be a mapping", root.start_mark.line + 1)
    constructor = yaml.constructor.SafeConstructor()
    entries = {}
    for key_node, value_node in root.value:
        line = key_node.start_mark.line + 1
        key = key_node.value
        if key not in CONFIG_KEYS:
            raise ConfigError(f"unknown key '{key}'", line)
        if key in entries:
            raise ConfigError(f"duplicate key '{key}'", line)
        try:
            entries[key] = (constructor.construct_object(value_node, deep=True),
                            value_node.start_mark.line + 1)
        except yaml.YAMLError as exc:
            raise ConfigError(f"bad value for '{key}': {exc}", line) from None

    if "family" not in entries:
        raise ConfigError("missing required key 'family'", 1)
    family, line = entries["family"]
    if family not in FAMILIES:
        raise ConfigError(f"'family' must be one of {', '.join(FAMILIES)}", line)
    cfg = Config(family=family, policies=list(DEFAULT_POLICIES[family]))

    for key, (value, line) in entries.items():
        if key == "T":
            cfg.horizon = _int(value, key, line, 1)
        elif key in DIM_KEYS:
            if key not in DEFAULT_DIMS[family]:
                raise ConfigError(f"'{key}' does not apply to family '{family}'", line)
            cfg.dims[key] = _int(value, key, line, 1)
        elif key == "K":
            cfg.k_meta = _int(value, key, line, 1)
        elif key == "eta":
            if isinstance(value, dict):
                for kind, v in value.items():
                    if kind not in POLICY_KINDS:
                        raise ConfigError(f"unknown policy '{kind}' under 'eta'", line)
                    cfg.eta[kind] = _positive(v, f"eta.{kind}", line)
            else:
                v = _positive(value, key, line)
                cfg.eta = {k: v for k in ("meta_fw", "oga", "stochastic_oga", "surrogate_ga")}
        elif key == "seeds":
            seeds = value if isinstance(value, list) else [value]
            if not seeds:
                raise ConfigError("'seeds' must not be empty", line)
            cfg.seeds = [_int(s, key, line, 0) for s in seeds]
        elif key == "policies":
            if not isinstance(value, list) or not value:
                raise ConfigError("'policies' must be a nonempty list", line)
            for kind in value:
                if kind not in POLICY_KINDS:
                    raise ConfigError(f"unknown policy '{kind}'", line)
                if kind == "surrogate_ga" and family != "coverage":
                    raise ConfigError("'surrogate_ga' needs the coverage family", line)
            cfg.policies = list(value)
        elif key == "checkpoints":
            if not isinstance(value, list) or not value:
                raise ConfigError("'checkpoints' must be a nonempty list", line)
            cfg.checkpoints = [_int(t, key, line, 1) for t in value]
        elif key == "stochastic":
            if not isinstance(value, bool):
                raise ConfigError("'stochastic' must be true or false", line)
            cfg.stochastic = value
        elif key == "k_off":
            cfg.k_off = _int(value, key, line, 1)
        elif key == "samples":
            cfg.samples = _int(value, key, line, 1)
        elif key == "instances":
            if not isinstance(value, str):
                raise ConfigError("'instances' must be a directory path", line)
            cfg.instances = value
        elif key == "inject_fault":
            if value not in FAULTS:
                raise ConfigError(f"'inject_fault' must be one of {', '.join(FAULTS)}", line)
            cfg.inject_fault = value

    if cfg.checkpoints and max(cfg.checkpoints) > cfg.horizon:
        raise ConfigError("checkpoints exceed the horizon T", entries["checkpoints"][1])
    return cfg


def load_config(path) -> Config:
    try:
        with open(path, encoding="utf-8") as fh:
            text = fh.read()
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None
    return parse_config(text)


def _parse_range(text):
    m = re.fullmatch(r"\s*(\d+)\s*\.\.\s*(\d+)\s*", text or "")
    if not m or int(m.group(1)) < 1 or int(m.group(1)) > int(m.group(2)):
        raise ConfigError(f"--k-sweep expects A..B with 1 <= A <= B, got {text!r}")
    return list(range(int(m.group(1)), int(m.group(2)) + 1))


def _instances_for(cfg: Config, seed: int) -> InstanceSequence:
    if cfg.instances is None:
        return build_instances(cfg.family, cfg.horizon, seed, cfg.dims)
    path = os.path.join(cfg.instances, f"{cfg.family}_{seed}.inst")
    data = io.load(path)
    if data.family != cfg.family or len(data.objectives) < cfg.horizon:
        raise ConfigError(f"{path} does not hold {cfg.horizon} {cfg.family} rounds")
    return InstanceSequence(data.family, seed, data.polytope, data.objectives[: cfg.horizon])


# --- commands ---------------------------------------------------------------


def cmd_generate(cfg: Config, out_dir: str) -> int:
    os.makedirs(out_dir, exist_ok=True)
    for seed in cfg.seeds:
        inst = build_instances(cfg.family, cfg.horizon, seed, cfg.dims)
        path = os.path.join(out_dir, f"{cfg.family}_{seed}.inst")
        io.save(path, cfg.family, seed, inst.polytope, inst.objectives)
        log.info("wrote %s", path)
    return EXIT_OK


def _write(path, text):
    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(text)


def cmd_run(cfg: Config, out_dir: str, workers: int = 1) -> int:
    spec = cfg.spec()
    os.makedirs(out_dir, exist_ok=True)
    if cfg.instances is None:
        cells = [c.traces for c in run_matrix(spec, workers)]
    else:
        cells = [run_cell(spec, s, _instances_for(cfg, s)).traces for s in spec.seeds]
    by_policy: dict[str, list] = {}
    for seed, traces in zip(spec.seeds, cells):
        for tr in traces:
            by_policy.setdefault(tr.policy, []).append(tr)
            final = [c for c in tr.checkpoints if c.t == spec.horizon_t and c.alpha == ALPHA_FW]
            log.info("seed %d %s: final (1-1/e)-regret %.6g", seed, tr.policy, final[0].alpha_regret)
    for label, traces in by_policy.items():
        path = os.path.join(out_dir, f"{cfg.family}_{label}.csv")
        _write(path, traces_to_csv(traces))
        log.info("wrote %s", path)
    return EXIT_OK


def cmd_k_sweep(cfg: Config, out_dir: str, ks) -> int:
    spec = cfg.spec()
    os.makedirs(out_dir, exist_ok=True)
    lines = ["family,seed,k,t,cum_reward,hindsight_value,alpha,alpha_regret"]
    finals = {k: [] for k in ks}
    for seed in spec.seeds:
        instances = _instances_for(cfg, seed)
        T = spec.horizon_t
        hindsight = hindsight_table(instances, [T], spec.k_off)
        for k in ks:
            label = policy_label_k(k)
            policy = make_cell_policy(spec, "meta_fw", {"k": k}, instances, label)
            trace = run_episode(instances, policy, label)
            compute_alpha_regret(trace, hindsight, ALPHA_FW, [T])
            c = trace.checkpoints[-1]
            finals[k].append(c.alpha_regret)
            lines.append(f"{cfg.family},{seed},{k},{T},{c.cum_reward!r},{c.hindsight_value!r},"
                         f"{ALPHA_FW!r},{c.alpha_regret!r}")
        log.info("seed %d swept K=%d..%d", seed, ks[0], ks[-1])
    path = os.path.join(out_dir, f"{cfg.family}_ksweep.csv")
    _write(path, "\n".join(lines) + "\n")
    log.info("wrote %s", path)
    print("K\tmedian_final_regret")
    for k in ks:
        print(f"{k}\t{float(np.median(finals[k])):.6g}")
    return EXIT_OK


def policy_label_k(k: int) -> str:
    return f"meta_fw_k{k}"


def _faulty_nqp(n: int, rng: Rng) -> NqpObjective:
    # positive entries make every mixed partial positive
    H = rng.generator.uniform(0.0, 100.0, (n, n))
    return NqpObjective(0.5 * (H + H.T), np.ones(n), validate=False)


def cmd_verify(cfg: Config, quick: bool = False) -> int:
    samples = max(10, cfg.samples // 5) if quick else cfg.samples
    horizon = min(cfg.horizon, 32) if quick else cfg.horizon
    failures = 0
    print("family\tseed\tcheck\tstatus\tdetail")
    for seed in cfg.seeds:
        instances = build_instances(cfg.family, horizon, seed, cfg.dims)
        f = instances.objectives[0]
        if cfg.inject_fault == "sign_flip_nqp":
            if cfg.family != "nqp":
                raise ConfigError("inject_fault sign_flip_nqp needs family nqp")
            f = _faulty_nqp(f.dim, Rng(seed).child("fault"))
        rng = Rng(seed).child("verify")
        reports = [
            check_dr_submodular(f, rng.child("dr"), samples),
            check_concave_along_nonneg(f, rng.child("concave"), samples),
            check_weak_dr_inequality(f, 1.0, rng.child("weak_dr"), samples),
            check_beta_smooth(f, f.smoothness, rng.child("smooth"), samples),
        ]
        for rep in reports:
            failures += not rep.passed
            print(f"{cfg.family}\t{seed}\t{rep.name}\t{'pass' if rep.passed else 'FAIL'}\t"
                  f"worst_slack={rep.worst_slack:.4g}")
        if cfg.inject_fault != "none":
            continue
        spec = ExperimentSpec(cfg.family, horizon, cfg.dims, [("meta_fw", {}), ("oga", {})],
                              [seed], k_meta=cfg.k_meta, checkpoint_grid=[horizon], k_off=cfg.k_off)
        hindsight = hindsight_table(instances, [horizon], spec.k_off)[horizon]
        consts = instances.constants()
        sum_f0 = sum(g.value(np.zeros(g.dim)) for g in instances.objectives)
        for kind in ("meta_fw", "oga"):
            policy = make_cell_policy(spec, kind, {}, instances, kind)
            trace = run_episode(instances, policy, kind)
            rep = theorem_bound_check(trace, consts, hindsight, kind,
                                      k=getattr(policy, "k", None), sum_f_zero=sum_f0)
            failures += not rep.passed
            print(f"{cfg.family}\t{seed}\tbound_{kind}\t{'pass' if rep.passed else 'FAIL'}\t"
                  f"margin={rep.margin:.4g}")
        log.info("seed %d verified", seed)
    return EXIT_VERIFY if failures else EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="subreg", description=__doc__.splitlines()[0])
    ap.add_argument("command", choices=["generate", "run", "verify"])
    ap.add_argument("--config", required=True, help="YAML experiment config")
    ap.add_argument("--out", default=".", help="output directory")
    ap.add_argument("--seed", type=int, help="run a single master seed")
    ap.add_argument("--stochastic", action="store_true", help="stochastic gradient feedback")
    ap.add_argument("--k-sweep", metavar="A..B", help="Meta-FW final regret for K = A..B")
    ap.add_argument("--workers", type=int, default=1, help="parallel seeds")
    ap.add_argument("--quick", action="store_true", help="reduced sample counts for verify")
    return ap


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(message)s", stream=sys.stderr)
    args = build_parser().parse_args(argv)
    try:
        cfg = load_config(args.config)
        if args.seed is not None:
            if args.seed < 0:
                raise ConfigError("--seed must be nonnegative")
            cfg.seeds = [args.seed]
        if args.stochastic:
            cfg.stochastic = True
        if args.workers < 1:
            raise ConfigError("--workers must be at least 1")
        ks = _parse_range(args.k_sweep) if args.k_sweep else None
        if args.command == "generate":
            return cmd_generate(cfg, args.out)
        if args.command == "run":
            if ks is not None:
                return cmd_k_sweep(cfg, args.out, ks)
            return cmd_run(cfg, args.out, args.workers)
        return cmd_verify(cfg, args.quick)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (io.InstanceFormatError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG if isinstance(exc, io.InstanceFormatError) else EXIT_RUNTIME
    except Exception as exc:  # noqa: BLE001 - any runtime failure maps to exit 2
        print(f"runtime failure: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
