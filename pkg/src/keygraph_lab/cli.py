"""Command-line front end.

Subcommands ``analytic``, ``simulate`` and ``sweep`` take the network
parameters as flags or from a flat JSON config (``--config``); flags win.
``fig1`` and ``fig2`` are ``simulate``/``sweep`` with the reference
configurations baked in.
"""

from __future__ import annotations

import argparse
import csv
import json
import os
import sys
import tempfile
import time
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Any, Callable, Sequence

from . import __version__
from .analytic import (
    ParameterError,
    SchemeParams,
    beta_of,
    lambda_nh,
    min_degree_limit_prob,
    p_eq,
    p_sq_asymptotic,
)
from .simulate import (
    DEFAULT_TRIALS,
    AggregateResult,
    ExperimentConfig,
    dump_paths,
    resolve_workers,
    run_experiment,
    sweep,
)
from .stats import poisson_distribution, total_variation

SCHEMA_VERSION = 1
SEED_ENV = "KEYGRAPH_LAB_SEED"

EMPIRICAL_COLUMNS = ["h", "M", "empirical_prob", "poisson_prob"]
ANALYTIC_COLUMNS = ["quantity", "index", "value"]
SWEEP_COLUMNS = ["K", "p_sq", "p_eq", "k", "beta", "analytic_prob", "empirical_prob", "ci_lo", "ci_hi"]

FIG1 = {"n": 2000, "keys": 36, "pool": 10000, "q": 2, "p": 0.7, "degrees": [2, 3], "min_degrees": [1]}
FIG2 = {"n": 2000, "pool": 10000, "q": 2, "p": 0.8, "keys_range": [29, 36], "degrees": [0], "min_degrees": [4, 8]}
DEFAULTS = {
    "n": 2000,
    "keys": 36,
    "pool": 10000,
    "q": 2,
    "p": 0.7,
    "trials": DEFAULT_TRIALS,
    "seed": 0,
    "degrees": [2, 3],
    "min_degrees": [1],
    "threads": "1",
    "out": "results",
}


def fmt(x: float) -> str:
    return f"{x:.10g}"


@dataclass
class RunManifest:
    command: str
    config: dict[str, Any]
    master_seed: int
    version: str = __version__
    duration_s: float = 0.0
    outputs: list[str] = field(default_factory=list)


class OutputSet:
    """Files written atomically into ``root``; on failure every file already
    produced by this run is removed again."""

    def __init__(self, root: Path):
        self.root = root
        self.written: list[Path] = []

    def __enter__(self) -> "OutputSet":
        self.root.mkdir(parents=True, exist_ok=True)
        return self

    def __exit__(self, exc_type, exc, tb) -> None:
        if exc_type is not None:
            self.discard()

    def discard(self) -> None:
        for path in self.written:
            try:
                if path.is_dir():
                    for child in path.iterdir():
                        child.unlink()
                    path.rmdir()
                else:
                    path.unlink()
            except FileNotFoundError:
                pass
        self.written.clear()

    def track(self, path: Path) -> None:
        self.written.append(path)

    def write(self, name: str, writer: Callable[[Any], None]) -> Path:
        target = self.root / name
        fd, tmp = tempfile.mkstemp(dir=self.root, prefix=f".{name}.", suffix=".tmp")
        try:
            with os.fdopen(fd, "w", newline="") as fh:
                writer(fh)
            os.replace(tmp, target)
        except BaseException:
            Path(tmp).unlink(missing_ok=True)
            raise
        self.track(target)
        return target

    def write_csv(self, name: str, header: list[str], rows: list[list[Any]]) -> Path:
        def writer(fh):
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(header)
            w.writerows(rows)

        return self.write(name, writer)

    def write_json(self, name: str, payload: dict) -> Path:
        return self.write(name, lambda fh: (json.dump(payload, fh, indent=2, sort_keys=True), fh.write("\n")))


# -- configuration -------------------------------------------------------------------


def parse_int_list(text: str | Sequence[int]) -> list[int]:
    if isinstance(text, (list, tuple)):
        return [int(v) for v in text]
    return [int(tok) for tok in str(text).split(",") if tok.strip()]


def parse_range(text: str | Sequence[int]) -> list[int]:
    """``29-36``, ``29:36`` (both inclusive) or ``29,31,33``."""
    if isinstance(text, (list, tuple)):
        if len(text) == 2:
            return list(range(int(text[0]), int(text[1]) + 1))
        return [int(v) for v in text]
    text = str(text).strip()
    for sep in ("-", ":"):
        if sep in text and not text.startswith(sep):
            lo, hi = text.split(sep, 1)
            return list(range(int(lo), int(hi) + 1))
    return parse_int_list(text)


def load_config_file(path: str | None) -> dict[str, Any]:
    if not path:
        return {}
    with open(path) as fh:
        data = json.load(fh)
    if not isinstance(data, dict) or any(isinstance(v, dict) for v in data.values()):
        raise ParameterError(f"{path}: config must be a flat JSON object")
    return {k.replace("-", "_"): v for k, v in data.items()}


def resolve(args: argparse.Namespace, preset: dict[str, Any] | None = None) -> dict[str, Any]:
    """Merge flags over config file over preset over environment over defaults."""
    merged = dict(DEFAULTS)
    env_seed = os.environ.get(SEED_ENV)
    if env_seed:
        merged["seed"] = int(env_seed)
    merged.update(preset or {})
    merged.update(load_config_file(getattr(args, "config", None)))
    for key, value in vars(args).items():
        if value is not None and key not in ("config", "func", "command"):
            merged[key] = value
    merged["degrees"] = parse_int_list(merged["degrees"])
    merged["min_degrees"] = parse_int_list(merged["min_degrees"])
    if "keys_range" in merged:
        merged["keys_range"] = parse_range(merged["keys_range"])
    merged["seed"] = int(merged["seed"])
    merged["threads"] = str(merged["threads"])
    return merged


def params_from(cfg: dict[str, Any], K: int | None = None) -> SchemeParams:
    return SchemeParams(
        n=int(cfg["n"]),
        K=int(cfg["keys"] if K is None else K),
        P=int(cfg["pool"]),
        q=int(cfg["q"]),
        p=float(cfg["p"]),
    )


def experiment_from(cfg: dict[str, Any], K: int | None = None) -> ExperimentConfig:
    return ExperimentConfig(
        params=params_from(cfg, K),
        trials=int(cfg["trials"]),
        master_seed=int(cfg["seed"]),
        degree_targets=tuple(cfg["degrees"]),
        min_degree_targets=tuple(cfg["min_degrees"]),
    )


def config_echo(cfg: dict[str, Any]) -> dict[str, Any]:
    """Configuration as recorded in the manifest; the thread count is left out
    because it has no effect on results."""
    return {k: v for k, v in sorted(cfg.items()) if k not in ("threads", "dump_graphs")}


# -- analytic report -----------------------------------------------------------------


def analytic_report(params: SchemeParams, h_list: Sequence[int], k_list: Sequence[int]) -> dict[str, Any]:
    probs = p_eq(params)
    asym = p_sq_asymptotic(params.K, params.P, params.q)
    report: dict[str, Any] = {
        "params": asdict(params),
        "p_sq_exact": probs.p_sq,
        "p_sq_asymptotic": asym,
        "lemma_ratio": probs.p_sq / asym,
        "p_eq": probs.p_eq,
        "mean_degree": params.n * probs.p_eq,
        "lambda": {str(h): lambda_nh(params.n, probs.p_eq, h).lam for h in h_list},
        "min_degree": {},
    }
    if params.n >= 3:
        for k in k_list:
            if k < 1:
                continue
            dec = beta_of(params.n, k, probs.p_eq)
            report["min_degree"][str(k)] = {
                "beta": dec.beta,
                "outside_window": dec.outside_window,
                "limit_prob": min_degree_limit_prob(k, dec.beta),
            }
    return report


def analytic_rows(report: dict[str, Any]) -> list[list[str]]:
    rows = [
        ["p_sq_exact", "", fmt(report["p_sq_exact"])],
        ["p_sq_asymptotic", "", fmt(report["p_sq_asymptotic"])],
        ["lemma_ratio", "", fmt(report["lemma_ratio"])],
        ["p_eq", "", fmt(report["p_eq"])],
    ]
    rows += [["lambda_nh", h, fmt(lam)] for h, lam in report["lambda"].items()]
    for k, entry in report["min_degree"].items():
        rows.append(["beta", k, fmt(entry["beta"])])
        rows.append(["min_degree_limit_prob", k, fmt(entry["limit_prob"])])
    return rows


def cmd_analytic(cfg: dict[str, Any], out: OutputSet | None = None) -> dict[str, Any]:
    params = params_from(cfg)
    report = analytic_report(params, cfg["degrees"], cfg["min_degrees"])
    if out is not None:
        out.write_csv("analytic.csv", ANALYTIC_COLUMNS, analytic_rows(report))
    return report


# -- simulation ----------------------------------------------------------------------


def empirical_rows(result: AggregateResult, lambdas: dict[str, float]) -> tuple[list[list[Any]], dict[str, float]]:
    rows: list[list[Any]] = []
    tv: dict[str, float] = {}
    for h in result.config.degree_targets:
        emp = result.phi_distribution(h)
        pois = poisson_distribution(lambdas[str(h)], emp.support_max)
        tv[str(h)] = total_variation(emp, pois)
        top = max(emp.support_max, pois.support_max)
        e, po = emp.padded(top + 1), pois.padded(top + 1)
        rows += [[h, M, fmt(e[M]), fmt(po[M])] for M in range(top + 1)]
    return rows, tv


def min_degree_block(result: AggregateResult, report: dict[str, Any]) -> dict[str, Any]:
    block = {}
    for k in result.config.min_degree_targets:
        prob, lo, hi = result.min_degree_at_least(k)
        entry = {"empirical": prob, "ci_lo": lo, "ci_hi": hi}
        analytic = report["min_degree"].get(str(k))
        if analytic is not None:
            entry.update(
                beta=analytic["beta"],
                analytic=analytic["limit_prob"],
                deviation=prob - analytic["limit_prob"],
                outside_window=analytic["outside_window"],
            )
        block[str(k)] = entry
    return block


def cmd_simulate(cfg: dict[str, Any], out: OutputSet, command: str = "simulate") -> RunManifest:
    start = time.perf_counter()
    config = experiment_from(cfg)
    report = cmd_analytic(cfg, out)
    dump_dir = None
    if cfg.get("dump_graphs"):
        dump_dir = out.root / "graphs"
        out.track(dump_dir)
    result = run_experiment(config, resolve_workers(cfg["threads"]), dump_dir=dump_dir)
    rows, tv = empirical_rows(result, report["lambda"])
    out.write_csv("empirical.csv", EMPIRICAL_COLUMNS, rows)
    outputs = ["analytic.csv", "empirical.csv"]
    if dump_dir is not None:
        outputs += [str(p.relative_to(out.root)) for t in range(config.trials) for p in dump_paths(dump_dir, t)]
    manifest = RunManifest(command, config_echo(cfg), config.master_seed, outputs=outputs + ["summary.json"])
    summary = {
        "schema_version": SCHEMA_VERSION,
        "config": config_echo(cfg),
        "analytic": report,
        "total_variation": tv,
        "phi": {
            str(h): {
                "mean": result.phi_mean(h),
                "std_error": result.phi_std_error(h),
                "lambda": report["lambda"][str(h)],
            }
            for h in config.degree_targets
        },
        "min_degree": min_degree_block(result, report),
        "edges": {
            "mean": result.mean_edges,
            "std_error": result.edges_std_error,
            "expected": params_from(cfg).n * (params_from(cfg).n - 1) / 2 * report["p_eq"],
        },
        "trials": result.trials,
    }
    manifest.duration_s = time.perf_counter() - start
    summary["manifest"] = asdict(manifest)
    out.write_json("summary.json", summary)
    return manifest


def check_sweep_range(cfg: dict[str, Any]) -> list[int]:
    ks = cfg.get("keys_range")
    if not ks:
        raise ParameterError("sweep needs a non-empty --keys-range")
    for K in ks:
        params_from(cfg, K)  # raises on K > P or K < 1
        if int(cfg["q"]) > K:
            raise ParameterError(f"q <= K violated at K={K} (q={cfg['q']})")
    return ks


def cmd_sweep(cfg: dict[str, Any], out: OutputSet, command: str = "sweep") -> RunManifest:
    start = time.perf_counter()
    ks = check_sweep_range(cfg)
    configs = [experiment_from(cfg, K) for K in ks]
    results = sweep(configs, resolve_workers(cfg["threads"]))
    rows = []
    points = []
    for K, config, result in zip(ks, configs, results):
        report = analytic_report(config.params, (), cfg["min_degrees"])
        block = min_degree_block(result, report)
        for k in config.min_degree_targets:
            entry = block[str(k)]
            rows.append([
                K,
                fmt(report["p_sq_exact"]),
                fmt(report["p_eq"]),
                k,
                fmt(entry.get("beta", float("nan"))),
                fmt(entry.get("analytic", float("nan"))),
                fmt(entry["empirical"]),
                fmt(entry["ci_lo"]),
                fmt(entry["ci_hi"]),
            ])
            points.append({"K": K, "k": k, **entry})
    out.write_csv("sweep.csv", SWEEP_COLUMNS, rows)
    manifest = RunManifest(command, config_echo(cfg), int(cfg["seed"]), outputs=["sweep.csv", "summary.json"])
    manifest.duration_s = time.perf_counter() - start
    out.write_json(
        "summary.json",
        {
            "schema_version": SCHEMA_VERSION,
            "config": config_echo(cfg),
            "points": points,
            "max_abs_deviation": max((abs(p["deviation"]) for p in points if "deviation" in p), default=None),
            "manifest": asdict(manifest),
        },
    )
    return manifest


# -- argument parsing ----------------------------------------------------------------


def _add_common(sp: argparse.ArgumentParser, network: bool = True, run: bool = True) -> None:
    sp.add_argument("--config", help="flat JSON file of option values (flags override it)")
    if network:
        sp.add_argument("--n", type=int, help="number of nodes")
        sp.add_argument("--keys", type=int, help="keys per node (K)")
        sp.add_argument("--pool", type=int, help="key pool size (P)")
        sp.add_argument("--q", type=int, help="minimum shared keys for a link")
        sp.add_argument("--p", type=float, help="channel-on probability")
    sp.add_argument("--degrees", help="comma-separated degree values h to track")
    sp.add_argument("--min-degrees", dest="min_degrees", help="comma-separated thresholds k for P[min degree >= k]")
    sp.add_argument("--out", help="output directory")
    if run:
        sp.add_argument("--trials", type=int, help=f"number of independent graphs (default {DEFAULT_TRIALS})")
        sp.add_argument("--seed", type=int, help=f"master seed (falls back to ${SEED_ENV}, then 0)")
        sp.add_argument("--threads", help="worker processes: 'auto' or a count")
        sp.add_argument("--dump-graphs", dest="dump_graphs", action="store_const", const=True,
                        help="write every sampled graph as an edge list")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="keygraph-lab", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("analytic", help="evaluate the closed-form quantities")
    _add_common(sp, run=False)

    sp = sub.add_parser("simulate", help="Monte Carlo degree statistics at one configuration")
    _add_common(sp)

    sp = sub.add_parser("sweep", help="P[min degree >= k] across a range of ring sizes")
    _add_common(sp)
    sp.add_argument("--keys-range", dest="keys_range", help="ring sizes, e.g. 29-36 or 29,31,33")

    sp = sub.add_parser("fig1", help="degree-count distributions at n=2000, K=36, P=10000, q=2, p=0.7")
    _add_common(sp, network=False)

    sp = sub.add_parser("fig2", help="min-degree sweep over K=29..36 at n=2000, P=10000, q=2, p=0.8")
    _add_common(sp, network=False)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    preset = {"fig1": FIG1, "fig2": FIG2}.get(args.command)
    try:
        cfg = resolve(args, preset)
        if args.command == "analytic":
            if args.out:
                with OutputSet(Path(cfg["out"])) as out:
                    report = cmd_analytic(cfg, out)
            else:
                report = cmd_analytic(cfg)
            json.dump(report, sys.stdout, indent=2, sort_keys=True)
            sys.stdout.write("\n")
            return 0
        runner = cmd_sweep if args.command in ("sweep", "fig2") else cmd_simulate
        if args.command == "sweep":
            check_sweep_range(cfg)
        with OutputSet(Path(cfg["out"])) as out:
            manifest = runner(cfg, out, args.command)
        print(json.dumps(asdict(manifest), indent=2, sort_keys=True))
        return 0
    except (ParameterError, ValueError) as exc:
        print(f"keygraph-lab: invalid parameters: {exc}", file=sys.stderr)
        return 2
    except OSError as exc:
        print(f"keygraph-lab: I/O error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
