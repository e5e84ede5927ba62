"""Command-line front end: ``rsmiso {sweep,alloc,convergence,selftest}``.

Configuration is YAML (JSON documents are accepted as well, which lets a
``run.json`` written by a previous run be fed back in).
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import re
import sys
from dataclasses import dataclass, field
from pathlib import Path

import yaml

from .channel import CovarianceModel
from .errors import SweepAborted
from .sim import METHODS, SLOPE_WINDOW_DB, AggregateResult, SweepSpec, run_sweep

__all__ = ["ConfigError", "RunConfig", "parse_config", "emit_results", "main"]

log = logging.getLogger("rsmiso")

SPEC_KEYS = {
    "M", "K", "T_dl", "alpha_c", "powers_db", "n_trials", "methods", "covariance",
    "redraw_covariance", "pilots", "seed", "tol", "max_iter",
}
RUN_KEYS = {"out", "threads", "verbose"}
COVARIANCE_KEYS = {
    "exponential": {"kind", "rho"},
    "rank-limited": {"kind", "rank", "decay"},
    "identity": {"kind"},
}

EXIT_OK, EXIT_FAILED, EXIT_CONFIG, EXIT_NUMERICAL, EXIT_IO = 0, 1, 2, 3, 4


class ConfigError(ValueError):
    """Invalid configuration; ``field`` names the offending key when known."""

    def __init__(self, message, field=None, line=None):
        super().__init__(message)
        self.field = field
        self.line = line


@dataclass(frozen=True)
class RunConfig:
    spec: SweepSpec = field(default_factory=SweepSpec)
    out: str = "results"
    threads: int = 1
    verbose: bool = False


class _Loader(yaml.SafeLoader):
    pass


# YAML 1.1 does not read "1e-05" (as written by json.dumps) as a float
_Loader.add_implicit_resolver(
    "tag:yaml.org,2002:float",
    re.compile(r"""^(?:[-+]?(?:[0-9][0-9_]*)\.[0-9_]*(?:[eE][-+]?[0-9]+)?
                   |[-+]?(?:[0-9][0-9_]*)(?:[eE][-+]?[0-9]+)
                   |\.[0-9_]+(?:[eE][-+][0-9]+)?
                   |[-+]?\.(?:inf|Inf|INF)
                   |\.(?:nan|NaN|NAN))$""", re.X),
    list("-+0123456789."),
)


def _int(value, name, minimum=None):
    if isinstance(value, bool) or not isinstance(value, int):
        raise ConfigError(f"{name} must be an integer, got {value!r}", name)
    if minimum is not None and value < minimum:
        raise ConfigError(f"{name} must be >= {minimum}, got {value}", name)
    return value


def _float(value, name):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{name} must be a number, got {value!r}", name)
    return float(value)


def _covariance(raw) -> CovarianceModel:
    if isinstance(raw, str):
        raw = {"kind": raw}
    if not isinstance(raw, dict):
        raise ConfigError("covariance must be a mapping", "covariance")
    kind = raw.get("kind", "exponential")
    if kind not in COVARIANCE_KEYS:
        raise ConfigError(f"unknown covariance kind {kind!r}", "covariance.kind")
    extra = set(raw) - COVARIANCE_KEYS[kind]
    if extra:
        raise ConfigError(f"unknown keys for {kind} covariance: {sorted(extra)}",
                          f"covariance.{sorted(extra)[0]}")
    kw = {"kind": kind}
    if "rho" in raw:
        kw["rho"] = _float(raw["rho"], "covariance.rho")
        if not 0.0 <= kw["rho"] < 1.0:
            raise ConfigError("covariance.rho must lie in [0, 1)", "covariance.rho")
    if "rank" in raw:
        kw["rank"] = _int(raw["rank"], "covariance.rank", 1)
    if "decay" in raw:
        kw["decay"] = _float(raw["decay"], "covariance.decay")
        if not 0.0 < kw["decay"] <= 1.0:
            raise ConfigError("covariance.decay must lie in (0, 1]", "covariance.decay")
    return CovarianceModel(**kw)


def spec_from_mapping(data: dict) -> SweepSpec:
    """Validate a flat mapping of sweep settings and build the spec."""
    unknown = set(data) - SPEC_KEYS
    if unknown:
        name = sorted(unknown)[0]
        raise ConfigError(f"unknown configuration key {name!r}", name)
    kw = {}
    for name in ("M", "K", "T_dl", "n_trials"):
        if name in data:
            kw[name] = _int(data[name], name, 1)
    if "max_iter" in data:
        kw["max_iter"] = _int(data["max_iter"], "max_iter", 0)
    if "seed" in data:
        kw["seed"] = _int(data["seed"], "seed", 0)
    if "alpha_c" in data:
        kw["alpha_c"] = _float(data["alpha_c"], "alpha_c")
        if not 0.0 <= kw["alpha_c"] <= 1.0:
            raise ConfigError(f"alpha_c must lie in [0, 1], got {kw['alpha_c']}", "alpha_c")
    if "tol" in data:
        kw["tol"] = _float(data["tol"], "tol")
        if not kw["tol"] > 0:
            raise ConfigError("tol must be positive", "tol")
    if "powers_db" in data:
        powers = data["powers_db"]
        if not isinstance(powers, list) or not powers:
            raise ConfigError("powers_db must be a nonempty list", "powers_db")
        kw["powers_db"] = tuple(_float(p, "powers_db") for p in powers)
        if any(b <= a for a, b in zip(kw["powers_db"], kw["powers_db"][1:])):
            raise ConfigError("powers_db must be strictly increasing", "powers_db")
    if "methods" in data:
        methods = data["methods"]
        if isinstance(methods, str):
            methods = [m.strip() for m in methods.split(",") if m.strip()]
        if not isinstance(methods, list) or not methods:
            raise ConfigError("methods must be a nonempty list", "methods")
        bad = [m for m in methods if m not in METHODS]
        if bad:
            raise ConfigError(f"unknown methods {bad}; choose from {list(METHODS)}", "methods")
        kw["methods"] = tuple(methods)
    if "covariance" in data:
        kw["covariance"] = _covariance(data["covariance"])
    if "redraw_covariance" in data:
        if not isinstance(data["redraw_covariance"], bool):
            raise ConfigError("redraw_covariance must be true or false", "redraw_covariance")
        kw["redraw_covariance"] = data["redraw_covariance"]
    if "pilots" in data:
        if data["pilots"] not in ("dft-truncated", "random-unitary"):
            raise ConfigError(f"unknown pilot kind {data['pilots']!r}", "pilots")
        kw["pilots"] = data["pilots"]
    M = kw.get("M", SweepSpec.M)
    if kw.get("T_dl", SweepSpec.T_dl) > M:
        raise ConfigError("T_dl must not exceed M", "T_dl")
    cov = kw.get("covariance")
    if cov is not None and cov.kind == "rank-limited" and cov.rank > M:
        raise ConfigError("covariance.rank must not exceed M", "covariance.rank")
    try:
        return SweepSpec(**kw)
    except ValueError as exc:
        raise ConfigError(str(exc)) from exc


def parse_config(source: str) -> RunConfig:
    """Parse YAML text into a validated :class:`RunConfig`.

    An empty document yields the default scenario: M=16, K=5, T_dl=3,
    alpha_c=0.5, 100 trials, powers -10 to 40 dB in 5 dB steps.
    """
    try:
        data = yaml.load(source, Loader=_Loader)
    except yaml.MarkedYAMLError as exc:
        mark = exc.problem_mark
        line = mark.line + 1 if mark is not None else None
        raise ConfigError(f"parse error at line {line}: {exc.problem}", line=line) from exc
    except yaml.YAMLError as exc:
        raise ConfigError(f"parse error: {exc}") from exc
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("configuration must be a mapping")
    if "config" in data and isinstance(data["config"], dict) and set(data) <= {"config", "outputs"}:
        # a run.json written by emit_results
        data = data["config"]
    run_kw = {}
    if "out" in data:
        if not isinstance(data["out"], str):
            raise ConfigError("out must be a path string", "out")
        run_kw["out"] = data["out"]
    if "threads" in data:
        run_kw["threads"] = _int(data["threads"], "threads", 1)
    if "verbose" in data:
        run_kw["verbose"] = bool(data["verbose"])
    spec = spec_from_mapping({k: v for k, v in data.items() if k not in RUN_KEYS})
    return RunConfig(spec=spec, **run_kw)


def _fmt(x) -> str:
    return repr(float(x))


def _write_csv(path: Path, header, rows):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        w.writerows(rows)


def emit_results(agg: AggregateResult, out_dir, kinds=("sweep", "alloc", "convergence")) -> list:
    """Write the requested CSV files plus ``run.json`` into ``out_dir``.

    Returns the written paths. IO failures propagate as ``OSError`` with
    the offending path attached.
    """
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    spec = agg.spec
    written = []
    if "sweep" in kinds:
        rows = [(m, _fmt(p), _fmt(agg.mean_sum_rate[m][i]))
                for m in spec.methods for i, p in enumerate(spec.powers_db)]
        _write_csv(out / "sweep.csv", ["method", "p_dl_db", "mean_sum_rate_bpcu"], rows)
        rows = [(m, _fmt(p), _fmt(agg.mean_genie_rate[m][i]))
                for m in spec.methods for i, p in enumerate(spec.powers_db)]
        _write_csv(out / "sweep_genie.csv", ["method", "p_dl_db", "mean_genie_sum_rate_bpcu"], rows)
        rows = [(m, "" if agg.slopes[m] is None else _fmt(agg.slopes[m]), _fmt(SLOPE_WINDOW_DB))
                for m in spec.methods]
        _write_csv(out / "slopes.csv", ["method", "slope_bpcu_per_log2_pdl", "window_start_db"], rows)
        written += [out / "sweep.csv", out / "sweep_genie.csv", out / "slopes.csv"]
    if "alloc" in kinds:
        labels = ["Com"] + [f"UE{k + 1}" for k in range(spec.K)]
        rows = [(m, _fmt(p), labels[s], _fmt(agg.mean_power_alloc[m][i][s]))
                for m in spec.methods for i, p in enumerate(spec.powers_db)
                for s in range(spec.K + 1)]
        _write_csv(out / "alloc.csv", ["method", "p_dl_db", "stream", "mean_power_fraction"], rows)
        written.append(out / "alloc.csv")
    if "convergence" in kinds:
        rows = [(r.method, _fmt(r.p_dl_db), r.trial, r.iterations, r.converged_by,
                 _fmt(r.wall_time_s)) for r in agg.trials]
        _write_csv(out / "convergence.csv",
                   ["method", "p_dl_db", "trial", "iterations", "converged_by", "wall_time_s"], rows)
        written.append(out / "convergence.csv")
    run = {"config": spec.to_dict(), "outputs": sorted(p.name for p in written)}
    with open(out / "run.json", "w") as fh:
        json.dump(run, fh, indent=2, sort_keys=True)
        fh.write("\n")
    written.append(out / "run.json")
    return written


def _fail(category: str, message: str, code: int, **extra) -> int:
    print(json.dumps({"error": category, "message": message, **extra}), file=sys.stderr)
    return code


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="rsmiso", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    helps = {
        "sweep": "mean sum rate versus transmit power and high-SNR slopes",
        "alloc": "mean power allocation over the common and private streams",
        "convergence": "iteration counts and run times per trial",
        "selftest": "run the built-in oracle and invariant checks",
    }
    for name, text in helps.items():
        p = sub.add_parser(name, help=text)
        p.add_argument("--config", type=Path, help="YAML configuration file")
        p.add_argument("--out", help="output directory (default: results)")
        p.add_argument("--seed", type=int, help="override the configured seed")
        p.add_argument("--methods", help="comma-separated methods, e.g. awamse_rs,mmse")
        p.add_argument("--threads", type=int, help="worker processes for the trials")
        p.add_argument("-v", "--verbose", action="store_true")
    return parser


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")

    if args.command == "selftest":
        from .selftest import run_checks

        results = run_checks()
        for name, ok, detail in results:
            print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        if all(ok for _, ok, _ in results):
            return EXIT_OK
        return _fail("selftest", "one or more checks failed", EXIT_FAILED)

    try:
        text = args.config.read_text() if args.config else ""
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO, path=str(args.config))
    try:
        cfg = parse_config(text)
        overrides = {}
        if args.seed is not None:
            overrides["seed"] = args.seed
        if args.methods:
            overrides["methods"] = args.methods
        if overrides:
            data = cfg.spec.to_dict()
            data.update(overrides)
            cfg = RunConfig(spec=spec_from_mapping(data), out=cfg.out,
                            threads=cfg.threads, verbose=cfg.verbose)
        threads = args.threads if args.threads is not None else cfg.threads
        if threads < 1:
            raise ConfigError("threads must be >= 1", "threads")
    except ConfigError as exc:
        return _fail("config", str(exc), EXIT_CONFIG, field=exc.field, line=exc.line)

    log.info("running %s with %d trials", args.command, cfg.spec.n_trials)
    try:
        agg = run_sweep(cfg.spec, threads=threads)
    except SweepAborted as exc:
        return _fail("numerical", str(exc), EXIT_NUMERICAL, failures=len(exc.failures))

    out = args.out or cfg.out
    try:
        paths = emit_results(agg, out, kinds=(args.command,))
    except OSError as exc:
        return _fail("io", str(exc), EXIT_IO, path=getattr(exc, "filename", None) or out)
    for p in paths:
        print(p)
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
