"""Command-line front end: ``bayescp run | verify | figure``.

Configuration comes from a JSON file (``--config``) with command-line flags
taking precedence. Exit codes: 0 success, 1 runtime failure or failed
verification, 2 invalid configuration or usage.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path

from .datagen import KINDS, SequenceSpec, generate
from .predictors import ALGORITHMS, make_predictor
from .runner import DEFAULT_LEVELS, EpisodeReport, run_episodes
from .verify import discounted_ftrl_battery, ftrl_battery, sandwich_battery

logger = logging.getLogger("bayescp")

CONFIG_KEYS = {"algorithms", "sequence", "levels", "out", "workers"}
SUITES = ("theorem1", "theorem6", "sandwich")
FIGURES = ("monotonicity", "switching", "iid_quantiles")


class ConfigError(Exception):
    pass


def _load_config(path: str | None) -> dict:
    if path is None:
        return {}
    p = Path(path)
    if not p.is_file():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(p.read_text())
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a JSON object")
    unknown = set(data) - CONFIG_KEYS
    if unknown:
        raise ConfigError(f"{path}: unknown keys {sorted(unknown)}")
    return data


def _algo_block(entry) -> dict:
    if isinstance(entry, str):
        return {"algorithm": entry}
    if isinstance(entry, dict):
        return dict(entry)
    raise ConfigError(f"algorithm entry must be a name or an object, got {entry!r}")


def merge_levels(*groups) -> list[float]:
    """Default levels plus every user-supplied level, sorted and deduplicated."""
    out = set(DEFAULT_LEVELS)
    for g in groups:
        out.update(float(a) for a in g or ())
    return sorted(out)


def resolve_run(args) -> tuple[list[dict], SequenceSpec, list[float], Path, int]:
    """Merge config file and flags, then validate every piece before any work starts."""
    cfg = _load_config(args.config)
    algos = [_algo_block(a) for a in (args.algo or cfg.get("algorithms") or ["bayesian"])]
    seq = dict(cfg.get("sequence") or {})
    for key, value in (("kind", args.seq), ("T", args.T), ("seed", args.seed), ("path", args.csv)):
        if value is not None:
            seq[key] = value
    if seq.get("path") and "kind" not in seq:
        seq["kind"] = "csv"
    try:
        spec = SequenceSpec.from_dict(seq)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"sequence: {exc}") from None
    T = spec.T
    if spec.kind == "csv":
        try:
            T = len(generate(spec))
        except OSError as exc:
            raise ConfigError(f"cannot read scores: {exc}") from None
        except ValueError as exc:
            raise ConfigError(str(exc)) from None

    levels = merge_levels(cfg.get("levels"), args.alpha)
    for a in levels:
        if not 0.0 <= a <= 1.0:
            raise ConfigError(f"confidence level {a} outside [0, 1]")

    names: dict[str, int] = {}
    for block in algos:
        if args.beta is not None and block.get("algorithm") == "discounted":
            block["beta"] = args.beta
        if args.grid_size is not None and block.get("algorithm") in ("quantized", "discounted"):
            block["grid_size"] = args.grid_size
        block.setdefault("R", spec.R)
        block.setdefault("horizon", T)
        base = block.get("name", block.get("algorithm"))
        names[base] = names.get(base, 0) + 1
        if names[base] > 1:
            block["name"] = f"{base}_{names[base]}"
        try:
            make_predictor(block)
        except (TypeError, ValueError, OSError) as exc:
            raise ConfigError(f"algorithm {block.get('algorithm')!r}: {exc}") from None

    out = Path(args.out or cfg.get("out") or "results")
    workers = args.workers if args.workers is not None else int(cfg.get("workers", 1))
    if workers < 1:
        raise ConfigError("workers must be >= 1")
    return algos, spec, levels, out, workers


def cmd_run(args) -> int:
    algos, spec, levels, out, workers = resolve_run(args)
    reports = run_episodes([(block, spec.to_dict(), levels) for block in algos], workers)
    for rep in reports:
        csv_path, _ = rep.write(out)
        print(f"{rep.algorithm}: T={rep.T} levels={len(rep.levels)} -> {csv_path}")
    return 0


def _run_suite(job):
    name, instances, seed = job
    if name == "theorem1":
        return ftrl_battery(instances or 200, seed)
    if name == "theorem6":
        return discounted_ftrl_battery(instances or 200, seed)
    return sandwich_battery(instances or 50, 500, seed)


def cmd_verify(args) -> int:
    suites = SUITES if args.suite == "all" else (args.suite,)
    jobs = [(s, args.instances, args.seed if args.seed is not None else 0) for s in suites]
    workers = args.workers or 1
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_suite, jobs))
    else:
        results = [_run_suite(j) for j in jobs]
    for res in results:
        print(res.line())
    return 0 if all(r.passed for r in results) else 1


def _write_thresholds(rep: EpisodeReport, path: Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["t", "r_star"] + [f"threshold@{a!r}" for a in rep.levels])
        for t in range(rep.T):
            writer.writerow([t + 1, repr(float(rep.scores[t]))] + [repr(float(x)) for x in rep.thresholds[t]])


def figure_jobs(name: str, T: int | None, seed: int) -> tuple[list, list[tuple[float, float]]]:
    """Episode jobs for a named figure and the level pairs to scan for monotonicity."""
    if name == "monotonicity":
        T = T or 2000
        seq = {"kind": "iid_uniform", "T": T, "seed": seed}
        levels = [0.75, 0.8, 0.85, 0.9]
        algos = [
            {"algorithm": "bayesian"},
            {"algorithm": "quantized"},
            {"algorithm": "discounted"},
            {"algorithm": "erm"},
            {"algorithm": "multiogd", "router_grid_size": 21},
        ]
        pairs = [(0.75, 0.8), (0.85, 0.9)]
    elif name == "switching":
        T = T or 1000
        seq = {"kind": "alternating", "T": T, "seed": seed}
        levels = [0.5, 0.7]
        algos = [{"algorithm": "ogd"}, {"algorithm": "erm"}, {"algorithm": "quantized"}]
        pairs = []
    elif name == "iid_quantiles":
        T = T or 2000
        seq = {"kind": "iid_uniform", "T": T, "seed": seed}
        levels = list(DEFAULT_LEVELS)
        algos = [{"algorithm": "bayesian"}]
        pairs = [(0.5, 0.7), (0.7, 0.9)]
    else:
        raise ConfigError(f"unknown figure {name!r}; expected one of {FIGURES}")
    return [(a, seq, levels) for a in algos], pairs


def cmd_figure(args) -> int:
    jobs, pairs = figure_jobs(args.name, args.T, args.seed if args.seed is not None else 0)
    out = Path(args.out or "figures")
    out.mkdir(parents=True, exist_ok=True)
    reports = run_episodes(jobs, args.workers or 1)
    summary = {"figure": args.name, "sequence": reports[0].sequence, "algorithms": {}}
    for rep in reports:
        stem = f"{args.name}_{rep.algorithm}"
        _write_thresholds(rep, out / f"{stem}_thresholds.csv")
        rep.write_curves(out, stem)
        entry = {
            "final_regret": {repr(a): float(rep.regret_curves[a][-1]) for a in rep.levels},
            "final_coverage_error": {repr(a): float(rep.coverage_error_curves[a][-1]) for a in rep.levels},
        }
        if pairs:
            entry["violations"] = {f"{lo!r}<{hi!r}": rep.violations([lo, hi]) for lo, hi in pairs}
        summary["algorithms"][rep.algorithm] = entry
        print(f"{stem}: T={rep.T}")
    (out / f"{args.name}_summary.json").write_text(json.dumps(summary, indent=2, sort_keys=True) + "\n")
    return 0


def _positive_int(text: str) -> int:
    value = int(text)
    if value < 1:
        raise argparse.ArgumentTypeError("must be >= 1")
    return value


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="bayescp", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="run predictors on a score sequence and write CSV/JSON results")
    run.add_argument("--config", help="JSON config file; flags override its values")
    run.add_argument("--algo", action="append", choices=ALGORITHMS, help="algorithm (repeatable)")
    run.add_argument("--seq", choices=KINDS, help="sequence kind")
    run.add_argument("--csv", help="score file for --seq csv")
    run.add_argument("--T", type=_positive_int, help="sequence length")
    run.add_argument("--alpha", action="append", type=float, help="extra confidence level (repeatable)")
    run.add_argument("--beta", type=float, help="discount factor for the discounted predictor")
    run.add_argument("--grid-size", type=int, help="grid size for quantized and discounted predictors")
    run.add_argument("--seed", type=int, help="sequence seed")
    run.add_argument("--out", help="output directory")
    run.add_argument("--workers", type=_positive_int, help="parallel episodes")
    run.set_defaults(func=cmd_run)

    ver = sub.add_parser("verify", help="check the engines against the brute-force oracle")
    ver.add_argument("suite", choices=SUITES + ("all",))
    ver.add_argument("--instances", type=_positive_int, help="instances (sequences for sandwich)")
    ver.add_argument("--seed", type=int)
    ver.add_argument("--workers", type=_positive_int)
    ver.set_defaults(func=cmd_verify)

    fig = sub.add_parser("figure", help="write the data series behind a figure")
    fig.add_argument("name", help=f"one of {', '.join(FIGURES)}")
    fig.add_argument("--T", type=_positive_int)
    fig.add_argument("--seed", type=int)
    fig.add_argument("--out")
    fig.add_argument("--workers", type=_positive_int)
    fig.set_defaults(func=cmd_figure)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"bayescp: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - report, don't trace, at the CLI boundary
        logger.debug("failure", exc_info=True)
        print(f"bayescp: runtime error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
