"""Command-line entry point: ``dynreg {simulate,verify,lowerbound,matrices}``.

Exit status is 0 when every check passes, 1 when one fails and 2 for a bad
configuration.
"""

from __future__ import annotations

import argparse
import configparser
import json
import logging
import os
import sys

from .harness import ConfigError, ScenarioConfig, apply_overrides, emit_csv, run_experiment, run_ladder, trial_records
from .verify import run_lowerbound_suite, run_matrix_suite, run_verify_suite

EXIT_OK, EXIT_FAIL, EXIT_CONFIG = 0, 1, 2


def _print_table(title: str, results) -> bool:
    print(title)
    width = max((len(r.name) for r in results), default=0)
    for r in results:
        print(f"  {'PASS' if r.passed else 'FAIL'}  {r.name:<{width}}  {r.detail}".rstrip())
    ok = all(r.passed for r in results)
    print(f"{sum(r.passed for r in results)}/{len(results)} passed")
    return ok


def _write_json(out: str | None, name: str, payload) -> None:
    if out is None:
        return
    os.makedirs(out, exist_ok=True)
    with open(os.path.join(out, name), "w") as fh:
        json.dump(payload, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _ints(raw: str, where: str) -> tuple:
    try:
        return tuple(int(x) for x in raw.replace(" ", "").split(",") if x)
    except ValueError:
        raise ConfigError(where, "expected comma-separated integers") from None


def _suite_sections(args) -> dict:
    """Optional ``[verify]``/``[lowerbound]`` sections for the suite subcommands."""
    sections: dict = {}
    if args.config:
        parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
        parser.optionxform = str
        try:
            with open(args.config) as fh:
                parser.read_file(fh)
        except OSError as exc:
            raise ConfigError(args.config, f"cannot read config: {exc.strerror or exc}") from None
        except configparser.Error as exc:
            raise ConfigError(args.config, f"malformed config: {exc}") from None
        sections = {s: dict(parser.items(s)) for s in parser.sections()}
    return apply_overrides(sections, args.set)


def cmd_simulate(args) -> int:
    if not args.config:
        raise ConfigError("--config", "simulate needs a scenario file")
    config = ScenarioConfig.from_file(args.config, args.set)
    changes = {}
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.trials is not None:
        changes["trials"] = args.trials
    if args.per_round:
        changes["per_round"] = True
    if args.oracle_check:
        changes["oracle_check"] = True
    config = config.replace(**changes)

    report = run_experiment(config)
    ok = _print_table(f"simulate T={report.T} (padded {report.T_padded}) {report.preconditioner}, "
                      f"{config.trials} trials", report.checks)
    for name, s in report.summary.items():
        print(f"  {name}: mean regret {s['mean_regret']:.6g} +/- {s['std_regret']:.3g}, "
              f"bound constant {s['bound_constant']:.4g}")
    print(f"  runtime per round {report.runtime_per_round:.3g} s")
    if args.out:
        _write_json(args.out, "report.json", report.to_dict(include_sequences=config.per_round))
        emit_csv(report, os.path.join(args.out, "summary.csv"))
        if config.per_round:
            for r in report.trials:
                emit_csv(trial_records(r), os.path.join(args.out, f"records_trial{r.trial}.csv"))
    if config.ladder:
        ladder = run_ladder(config)
        print("ladder " + ", ".join(str(T) for T in ladder.horizons))
        for name, e in ladder.exponents.items():
            print(f"  {name}: growth exponent {e:.4g}, constant ratio {ladder.constant_ratio(name):.4g}")
        ok &= all(r.all_pass for r in ladder.reports)
        _write_json(args.out, "ladder.json", ladder.to_dict())
    return EXIT_OK if ok else EXIT_FAIL


def cmd_verify(args) -> int:
    sec = _suite_sections(args).get("verify", {})
    kw = {"seed": args.seed or 0}
    if "T" in sec:
        kw["Ts"] = _ints(sec["T"], "verify.T")
    results, reports = run_verify_suite(**kw)
    ok = _print_table("verify", results)
    _write_json(args.out, "verify.json", {"checks": [r.to_dict() for r in results],
                                          "spectral": [r.to_dict() for r in reports]})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_lowerbound(args) -> int:
    sec = _suite_sections(args).get("lowerbound", {})
    kw = {"seed": args.seed or 0}
    try:
        if "T" in sec:
            kw["Ts"] = _ints(sec["T"], "lowerbound.T")
        for key in ("G", "P"):
            if key in sec:
                kw[key] = float(sec[key])
        if "trials" in sec:
            kw["trials"] = int(sec["trials"])
    except ValueError:
        raise ConfigError("lowerbound", "G, P and trials must be numbers") from None
    if args.trials is not None:
        kw["trials"] = args.trials
    if any(T > 20 for T in kw.get("Ts", ())):
        raise ConfigError("lowerbound.T", "exhaustive search is limited to T <= 20")
    results, outcomes, tail = run_lowerbound_suite(**kw)
    ok = _print_table("lowerbound", results)
    _write_json(args.out, "lowerbound.json", {"checks": [r.to_dict() for r in results],
                                              "adversary": [o.to_dict() for o in outcomes], "tail": tail})
    return EXIT_OK if ok else EXIT_FAIL


def cmd_matrices(args) -> int:
    results = run_matrix_suite()
    ok = _print_table("matrices", results)
    _write_json(args.out, "matrices.json", {"checks": [r.to_dict() for r in results]})
    return EXIT_OK if ok else EXIT_FAIL


def _u64(raw: str) -> int:
    val = int(raw)
    if not 0 <= val < 2 ** 64:
        raise argparse.ArgumentTypeError("seed must be an unsigned 64-bit integer")
    return val


def _positive(raw: str) -> int:
    val = int(raw)
    if val < 1:
        raise argparse.ArgumentTypeError("must be positive")
    return val


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="scenario file (INI with dotted sections)")
    common.add_argument("--seed", type=_u64, help="override the seed")
    common.add_argument("--out", help="directory for JSON/CSV output")
    common.add_argument("--trials", type=_positive, help="override the number of trials")
    common.add_argument("--per-round", action="store_true", help="write per-round records")
    common.add_argument("--oracle-check", action="store_true", help="compare with the dense oracle when T <= 64")
    common.add_argument("--set", action="append", default=[], metavar="SECTION.KEY=VALUE",
                        help="override a config entry; repeatable")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="dynreg", description="Dynamic regret reduction experiments and checks.")
    sub = parser.add_subparsers(dest="command", required=True)
    for name, fn, text in (
        ("simulate", cmd_simulate, "run a scenario"),
        ("verify", cmd_verify, "eigenvalue and trace bound checks"),
        ("lowerbound", cmd_lowerbound, "adversarial sign-pattern search and Rademacher tail"),
        ("matrices", cmd_matrices, "exact matrix identities"),
    ):
        p = sub.add_parser(name, parents=[common], help=text)
        p.set_defaults(func=fn)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_CONFIG if exc.code else EXIT_OK
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
