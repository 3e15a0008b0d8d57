"""torus-ci command line.

Every command resolves a RunConfig (flags over an optional JSON config file),
prints it with --dry-run, and otherwise writes a JSON report to stdout or
--out.  Exit codes: 0 pass, 2 assertion failure, 3 config error, 4 resolution
exhausted.
"""

from __future__ import annotations

import argparse
import json
import sys
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from . import blocks, exponents, hardy, step
from .errors import ResolutionExhausted, TorusCIError, UnderResolved
from .io import REPORT_VERSION, atomic_write_text, csv_text, dumps_json, write_field

EXIT_OK, EXIT_FAIL, EXIT_CONFIG, EXIT_RESOLUTION = 0, 2, 3, 4

COMMANDS = ("verify-blocks", "hardy", "step", "iterate", "exponents")


class ConfigError(Exception):
    pass


@dataclass
class RunConfig:
    command: str
    grid: int | None = None
    params: dict = field(default_factory=dict)
    sweep: dict = field(default_factory=dict)
    outputs: dict = field(default_factory=dict)
    seed: int | None = None

    @staticmethod
    def from_dict(d: dict) -> "RunConfig":
        known = {f.name for f in fields(RunConfig)}
        extra = set(d) - known
        if extra:
            raise ConfigError(f"unknown config keys: {sorted(extra)}")
        if d.get("command") not in COMMANDS:
            raise ConfigError(f"command must be one of {COMMANDS}")
        cfg = RunConfig(**d)
        for name in ("params", "sweep", "outputs"):
            if not isinstance(getattr(cfg, name), dict):
                raise ConfigError(f"{name} must be an object")
        if cfg.grid is not None and (not isinstance(cfg.grid, int) or cfg.grid < 8 or cfg.grid % 2):
            raise ConfigError("grid must be an even integer >= 8")
        bad = set(cfg.outputs) - {"report", "csv", "fields"}
        if bad:
            raise ConfigError(f"unknown outputs: {sorted(bad)}")
        return cfg


# ---------------------------------------------------------------------------
# parameter resolution


def _typed(value, like, key: str):
    try:
        if isinstance(like, bool):
            return bool(value)
        if isinstance(like, int) and not isinstance(value, float):
            return int(value)
        if like is None and (type(value) is int or (isinstance(value, str) and "/" in value)):
            return value  # exact, parsed by the consumer
        if isinstance(like, (int, float)) or like is None:
            return float(value)
        if isinstance(like, tuple):
            return tuple(value)
        return value
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad value for {key}: {value!r}") from exc


def _merge(defaults: dict, given: dict, what: str) -> dict:
    extra = set(given) - set(defaults)
    if extra:
        raise ConfigError(f"unknown {what} keys: {sorted(extra)}")
    return {k: _typed(given[k], defaults[k], k) if k in given else defaults[k] for k in defaults}


def _parse_sweep(spec: str | None) -> dict:
    if not spec:
        return {}
    try:
        key, vals = spec.split("=", 1)
        return {key.strip(): [float(v) for v in vals.split(",") if v.strip()]}
    except ValueError as exc:
        raise ConfigError(f"bad --sweep {spec!r}; expected name=v1,v2,...") from exc


# ---------------------------------------------------------------------------
# commands


def _block_params(cfg: RunConfig) -> blocks.BlockParams:
    d = _merge(asdict(blocks.BlockParams()), {k: v for k, v in cfg.params.items() if k != "t"}, "block")
    try:
        return blocks.BlockParams(**d)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def cmd_verify_blocks(cfg: RunConfig) -> tuple[int, dict, str | None]:
    n = cfg.grid or 256
    params = _block_params(cfg)
    t = float(cfg.params.get("t", 0.0))
    params.check_resolution(n)
    suite = blocks.block_suite(params, n, t)
    report = {"command": cfg.command, "suite": suite}
    ok = suite["passed"]
    csv = None
    if cfg.sweep:
        if len(cfg.sweep) != 1:
            raise ConfigError("sweep one parameter at a time")
        (name, values), = cfg.sweep.items()
        if name not in ("lam", "mu1", "mu2"):
            raise ConfigError("sweep parameter must be lam, mu1 or mu2")
        rows, table = _scaling_rows(params, name, values, n)
        report["sweep"] = table
        ok = ok and table["passed"]
        csv = csv_text(["parameter", "value"] + [f"slope_{q}" for q in blocks.QUANTITIES], rows)
    return (EXIT_OK if ok else EXIT_FAIL), report, csv


def _scaling_rows(params: blocks.BlockParams, name: str, values: list, n: int):
    """One row per sweep value: local log-slopes against the previous value.

    With four or more values the global fit is also asserted to 0.05.
    """
    import math

    prof = blocks.make_phi(blocks.ProfileSpec())
    norms = []
    for v in values:
        kw = params.to_json()
        kw[name] = int(v) if name == "lam" else float(v)
        p = blocks.BlockParams(**kw)
        p.check_resolution(n)
        bb = blocks.make_blocks(p, prof, 0.0, n)
        nm = blocks.block_norms(bb, 0, 2.0)
        norms.append({q: float(max(nm[q])) for q in blocks.QUANTITIES})
    rows = []
    for i, v in enumerate(values):
        row = [name, v]
        for q in blocks.QUANTITIES:
            if i == 0:
                row.append(float("nan"))
            else:
                row.append(math.log(norms[i][q] / norms[i - 1][q]) / math.log(v / values[i - 1]))
        rows.append(row)
    table = {"parameter": name, "values": list(values), "norms": norms, "passed": True}
    if len(values) >= 4:
        fit = blocks.measure_scaling(prof, params, name, list(values), n)
        table["fit"] = fit["rows"]
        table["passed"] = all(r["error"] <= 0.05 for r in fit["rows"])
    return rows, table


def cmd_hardy(cfg: RunConfig) -> tuple[int, dict, str | None]:
    defaults = asdict(hardy.HardySuiteConfig())
    given = dict(cfg.params)
    if cfg.grid:
        given["n"] = cfg.grid
    if cfg.seed is not None:
        given["seed"] = cfg.seed
    d = _merge(defaults, given, "hardy")
    if str(d["p"]) not in hardy.CALIBRATION["atom_linf_constant"]:
        raise ConfigError(f"no calibrated atom constant for p = {d['p']}")
    suite = hardy.hardy_suite(hardy.HardySuiteConfig(**d))
    csv = None
    if cfg.sweep:
        (name, values), = cfg.sweep.items()
        if name != "eps":
            raise ConfigError("hardy sweeps eps")
        lg = hardy.log_growth_sweep(d["log_p"], values, d["n"])
        csv = csv_text(["eps", "quasinorm_p"], [[e, v] for e, v in zip(lg["radii"], lg["values"])])
        suite["sweep"] = lg
    return (EXIT_OK if suite["passed"] else EXIT_FAIL), {"command": cfg.command, "suite": suite}, csv


def _step_inputs(cfg: RunConfig):
    p = dict(cfg.params)
    scen = {k: p.pop(k) for k in ("amplitude", "kmax") if k in p}
    if cfg.seed is not None:
        scen["seed"] = cfg.seed
    sc_cfg = step.ScenarioConfig(**_merge({k: v for k, v in asdict(step.ScenarioConfig()).items() if k in ("seed", "kmax", "amplitude")}, scen, "scenario"))
    lam = int(p.pop("lam", 4))
    defaults = asdict(step.StepParams())
    for k in ("lam", "mode"):
        defaults.pop(k)
    try:
        params = step.StepParams.desk(lam, **_merge(defaults, p, "step"))
    except (ValueError, TorusCIError) as exc:
        raise ConfigError(str(exc)) from exc
    return sc_cfg, params


def cmd_step(cfg: RunConfig) -> tuple[int, dict, str | None]:
    sc_cfg, params = _step_inputs(cfg)
    n = cfg.grid or 512
    scen = step.initial_scenario(sc_cfg)
    state, rep = step.step(scen, params, step.StepConfig(n=n))
    d = rep.to_json()
    flags = rep.support_flags
    d["checks"] = {
        "cross_check": rep.cross_check_max <= 1e-4,
        "l2_bound": rep.l2_ok,
        "frozen_window": all(f["w_zero"] and f["R_zero"] for f in flags.values()),
    }
    if "fields" in cfg.outputs:
        t = 0.5
        c = state.components(t, n, pressure=False, terms=False)
        write_field(cfg.outputs["fields"], c["w"], time_index=0)
        d["fields"] = {"stem": cfg.outputs["fields"], "t": t, "quantity": "w"}
    ok = all(d["checks"].values())
    return (EXIT_OK if ok else EXIT_FAIL), {"command": cfg.command, "scenario": asdict(sc_cfg), "report": d}, None


def cmd_iterate(cfg: RunConfig) -> tuple[int, dict, str | None]:
    p = dict(cfg.params)
    n_steps = int(p.pop("steps", 2))
    n0 = int(p.pop("n0", cfg.grid or 256))
    n_max = int(p.pop("n_max", 512))
    C = p.pop("C", None)
    sc_cfg, params = _step_inputs(RunConfig(cfg.command, cfg.grid, p, {}, {}, cfg.seed))
    scen = step.initial_scenario(sc_cfg)
    sched = step.Schedules(C=None if C is None else float(C), n0=n0, n_max=n_max)
    states, reps = step.iterate(scen, n_steps, sched, params)
    r = [rep.to_json() for rep in reps]
    norms = [rep.R1_l1 for rep in reps]
    n_last = n0 * 2 ** (len(reps) - 1) if reps else n0
    frozen = step.frozen_window_defect(states, n0)
    report = {
        "command": cfg.command,
        "scenario": asdict(sc_cfg),
        "reports": r,
        "R_l1": norms,
        "monotone": all(b < a for a, b in zip(norms, norms[1:])),
        "delta_ok": [rep.R1_l1 <= rep.delta for rep in reps],
        "frozen_window_defect": frozen,
        "nonvanishing": step.nonvanishing(states[-1], scen, params.p, n_last),
    }
    report["checks"] = {
        "monotone": report["monotone"],
        "delta": all(report["delta_ok"]),
        "frozen_window": frozen <= 1e-12,
        "nonvanishing": report["nonvanishing"]["ok"],
    }
    ok = all(report["checks"].values())
    return (EXIT_OK if ok else EXIT_FAIL), report, None


def cmd_exponents(cfg: RunConfig) -> tuple[int, dict, str | None]:
    d = _merge({"p": "4/5", "sigma": "1/2", "alpha": None, "s": None, "beta": 4, "a": 5, "b": 11, "gamma": 1}, cfg.params, "exponents")
    try:
        feas = exponents.feasibility(d["p"], d["sigma"], d["beta"], d["a"], d["b"], d["gamma"])
        alpha, s = feas.pick()
        alpha = exponents.Q(d["alpha"]) if d["alpha"] is not None else alpha
        s = exponents.Q(d["s"]) if d["s"] is not None else s
        led = exponents.ledger(d["p"], d["sigma"], alpha, d["beta"], d["a"], d["b"], d["gamma"], s)
    except TorusCIError as exc:
        raise ConfigError(str(exc)) from exc
    negative, offenders = exponents.assert_all_negative(led)
    report = {
        "command": cfg.command,
        "feasibility": feas.to_json(),
        "ledger": led.to_json(),
        "table": led.table(),
        "all_negative": negative,
        "offenders": offenders,
        "simplified_dominates": exponents.simplified_dominates(led),
    }
    defaults = (d["beta"], d["a"], d["b"], d["gamma"]) == (4, 5, 11, 1)
    if defaults:
        report["closed_form_agrees"] = exponents.self_consistency(d["p"], d["sigma"], alpha, s)
    ok = negative and report["simplified_dominates"] and all(report.get("closed_form_agrees", {}).values())
    return (EXIT_OK if ok else EXIT_FAIL), report, None


HANDLERS = {
    "verify-blocks": cmd_verify_blocks,
    "hardy": cmd_hardy,
    "step": cmd_step,
    "iterate": cmd_iterate,
    "exponents": cmd_exponents,
}


# ---------------------------------------------------------------------------
# argument parsing


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_CONFIG, f"{self.prog}: config error: {message}\n")


def _kv(text: str):
    if "=" not in text:
        raise argparse.ArgumentTypeError("expected key=value")
    k, v = text.split("=", 1)
    try:
        v = json.loads(v)
    except json.JSONDecodeError:
        pass
    return k.strip(), v


def _common(ap: argparse.ArgumentParser, default) -> None:
    ap.add_argument("--config", type=Path, default=default, help="JSON RunConfig; flags override it")
    ap.add_argument("--dry-run", action="store_true", default=default or False, help="print the resolved config and exit")
    ap.add_argument("--out", type=Path, default=default, help="write the JSON report here instead of stdout")
    ap.add_argument("--csv", type=Path, default=default, help="write the sweep table here")


def build_parser() -> argparse.ArgumentParser:
    ap = _Parser(prog="torus-ci", description="Desk-scale convex integration checks on the 2-torus.")
    _common(ap, None)
    # the same flags are accepted after the subcommand; SUPPRESS keeps them from resetting
    common = _Parser(add_help=False)
    _common(common, argparse.SUPPRESS)
    sub = ap.add_subparsers(dest="command", parser_class=_Parser)
    helps = {
        "verify-blocks": "building-block identities and scaling sweeps",
        "hardy": "Hardy quasinorm suite",
        "step": "one desk-mode step from the starting scenario",
        "iterate": "several desk steps with doubling lambda and grid",
        "exponents": "exact lambda-exponent ledger",
    }
    for name in COMMANDS:
        sp = sub.add_parser(name, help=helps[name], description=helps[name], parents=[common])
        sp.add_argument("--n", type=int, dest="grid", help="grid size")
        sp.add_argument("--seed", type=int)
        sp.add_argument("--set", type=_kv, action="append", default=[], metavar="KEY=VALUE", help="set a parameter")
        if name in ("verify-blocks", "hardy"):
            sp.add_argument("--sweep", help="name=v1,v2,... (mu2=4,8,16 or eps=0.125,0.0625,...)")
        if name == "step":
            sp.add_argument("--fields", help="stem for a binary field dump of w at t = 1/2")
    return ap


def resolve(argv: list[str] | None = None) -> tuple[RunConfig, argparse.Namespace]:
    args = build_parser().parse_args(argv)
    base: dict = {}
    if args.config:
        try:
            base = json.loads(args.config.read_text())
        except (OSError, json.JSONDecodeError) as exc:
            raise ConfigError(f"cannot read config: {exc}") from exc
        if not isinstance(base, dict):
            raise ConfigError("config must be a JSON object")
    if args.command:
        if base.get("command") not in (None, args.command):
            raise ConfigError("config command differs from the subcommand")
        base["command"] = args.command
    if "command" not in base:
        raise ConfigError("no command given")
    params = dict(base.get("params", {}))
    params.update(dict(getattr(args, "set", [])))
    base["params"] = params
    if getattr(args, "grid", None) is not None:
        base["grid"] = args.grid
    if getattr(args, "seed", None) is not None:
        base["seed"] = args.seed
    sweep = _parse_sweep(getattr(args, "sweep", None))
    if sweep:
        base["sweep"] = sweep
    outputs = dict(base.get("outputs", {}))
    if args.out:
        outputs["report"] = str(args.out)
    if args.csv:
        outputs["csv"] = str(args.csv)
    if getattr(args, "fields", None):
        outputs["fields"] = args.fields
    base["outputs"] = outputs
    return RunConfig.from_dict(base), args


def main(argv: list[str] | None = None) -> int:
    try:
        cfg, args = resolve(argv)
    except SystemExit as exc:  # argparse: --help or a usage error
        return int(exc.code or 0)
    except ConfigError as exc:
        print(f"torus-ci: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    if args.dry_run:
        sys.stdout.write(dumps_json({"report_version": REPORT_VERSION, "config": asdict(cfg)}))
        return EXIT_OK
    try:
        code, report, csv = HANDLERS[cfg.command](cfg)
    except ConfigError as exc:
        print(f"torus-ci: config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except ResolutionExhausted as exc:
        print(f"torus-ci: ResolutionExhausted: {exc}", file=sys.stderr)
        return EXIT_RESOLUTION
    except UnderResolved as exc:
        print(f"torus-ci: UnderResolved: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except TorusCIError as exc:
        print(f"torus-ci: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_FAIL
    report = {"report_version": REPORT_VERSION, "config": asdict(cfg), **report}
    text = dumps_json(report)
    if "report" in cfg.outputs:
        atomic_write_text(cfg.outputs["report"], text)
    else:
        sys.stdout.write(text)
    if csv is not None:
        if "csv" in cfg.outputs:
            atomic_write_text(cfg.outputs["csv"], csv)
        else:
            sys.stderr.write(csv)
    return code


if __name__ == "__main__":
    sys.exit(main())
