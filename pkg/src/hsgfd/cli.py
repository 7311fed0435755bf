"""Command-line front end: ``hsgfd heat|hjb|verify``.

Configuration is resolved in three layers: per-experiment defaults, then an
optional ``key=value`` file (``--config``), then command-line flags.
"""

from __future__ import annotations

import argparse
import csv
import logging
import math
import sys
import time
from dataclasses import asdict, dataclass, fields
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence

import numpy as np

from .directions import PreconditionSchedule, law_from_name
from .errors import ConfigurationError, NumericalRankError
from .function_space import evaluate
from .matern import MaternParams, PreBasis, load_gram, save_gram
from .optimizer import GfdConfig, StepSchedule, run
from .risks import HeatRisk, HjbParams, HjbRisk, heat_exact, optimal_control

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_USAGE = 1
EXIT_DIVERGED = 2
EXIT_CHECK_FAILED = 3

EXPERIMENTS = ("heat", "hjb", "verify")


@dataclass
class ExperimentConfig:
    experiment: str = "heat"
    seed: int = 0
    iterations: int = 200
    alpha: float = 0.6
    law: str = "shifted_poisson"
    law_param: float = 100.0
    c: float = 2.0
    lambda_kind: str = "tail"
    nu: float = 2.5
    eta: float = 20.0
    centers: int = 150
    interior_nodes: int = 2**14
    boundary_nodes: int = 2**11
    out: str = "out"
    grid: int = 101
    cadence: int = 1
    replications: int = 100_000
    gram_cache: str = ""

    def validate(self) -> "ExperimentConfig":
        if self.experiment not in EXPERIMENTS:
            raise ConfigurationError(f"experiment must be one of {EXPERIMENTS}")
        if self.lambda_kind not in ("tail", "unit"):
            raise ConfigurationError("lambda must be 'tail' or 'unit'")
        for name in ("iterations", "alpha", "law_param", "c", "nu", "eta", "centers", "interior_nodes",
                     "boundary_nodes", "grid", "cadence", "replications"):
            value = getattr(self, name)
            if not (isinstance(value, (int, float)) and math.isfinite(value) and value > 0):
                raise ConfigurationError(f"{name.replace('_', '-')} must be positive, got {value!r}")
        if self.grid < 2:
            raise ConfigurationError("grid must be at least 2")
        return self


DEFAULTS: Dict[str, Dict[str, object]] = {
    "heat": {},
    "hjb": {"iterations": 1000, "alpha": 0.2, "c": 1.5, "nu": 1.5},
    "verify": {},
}

# config keys use kebab or snake case; "lambda" is the user-facing name of lambda_kind
_ALIASES = {"lambda": "lambda_kind"}
_FIELDS = {f.name: f for f in fields(ExperimentConfig)}


def _key(raw: str) -> str:
    key = raw.strip().replace("-", "_")
    return _ALIASES.get(key, key)


def _coerce(name: str, raw) -> object:
    typ = _FIELDS[name].type
    try:
        if typ == "int":
            as_float = float(raw)
            if as_float != int(as_float):
                raise ValueError
            return int(as_float)
        if typ == "float":
            return float(raw)
    except ValueError:
        raise ConfigurationError(f"{name.replace('_', '-')}: cannot parse {raw!r}") from None
    return str(raw)


def read_config_file(path) -> Dict[str, object]:
    """Parse ``key=value`` lines; blank lines and ``#`` comments are ignored."""
    out: Dict[str, object] = {}
    try:
        text = Path(path).read_text()
    except OSError as err:
        raise ConfigurationError(f"cannot read config file {path}: {err}") from None
    for lineno, line in enumerate(text.splitlines(), 1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigurationError(f"{path}:{lineno}: expected key=value")
        key, value = line.split("=", 1)
        name = _key(key)
        if name not in _FIELDS or name == "experiment":
            raise ConfigurationError(f"{path}:{lineno}: unknown key {key.strip()!r}")
        out[name] = _coerce(name, value.strip())
    return out


def resolve_config(experiment: str, file_values: Dict[str, object], flag_values: Dict[str, object]) -> ExperimentConfig:
    values: Dict[str, object] = {"experiment": experiment}
    values.update(DEFAULTS[experiment])
    values.update(file_values)
    values.update({k: v for k, v in flag_values.items() if v is not None})
    return ExperimentConfig(**values).validate()


def format_meta(cfg: ExperimentConfig, extra: Dict[str, object]) -> str:
    """``key=value`` lines using the same keys the config file accepts."""
    lines = []
    for name, value in asdict(cfg).items():
        key = "lambda" if name == "lambda_kind" else name.replace("_", "-")
        lines.append(f"{key}={value!r}" if isinstance(value, float) else f"{key}={value}")
    lines += [f"{k}={v}" for k, v in extra.items()]
    return "\n".join(lines) + "\n"


def _fmt(x) -> str:
    if x is None:
        return ""
    if isinstance(x, (bool, np.bool_)):
        return "true" if x else "false"
    if isinstance(x, (int, np.integer)):
        return str(int(x))
    return repr(float(x))


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence[object]]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) if not isinstance(v, str) else v for v in row])


def grid_points(lower, upper, n: int) -> np.ndarray:
    """``n x n`` uniform grid including the edges, ``t`` varying slowest."""
    t = np.linspace(lower[0], upper[0], n)
    x = np.linspace(lower[1], upper[1], n)
    tt, xx = np.meshgrid(t, x, indexing="ij")
    return np.column_stack([tt.ravel(), xx.ravel()])


def _basis(cfg: ExperimentConfig, risk) -> PreBasis:
    pb = PreBasis(MaternParams(cfg.nu, cfg.eta), risk.domain, risk.sobolev_order)
    if cfg.gram_cache and Path(cfg.gram_cache).exists():
        load_gram(pb, cfg.gram_cache)
    pb.ensure(cfg.centers)
    if cfg.gram_cache:
        save_gram(pb, cfg.gram_cache)
    return pb


def _gfd_config(cfg: ExperimentConfig) -> GfdConfig:
    return GfdConfig(
        iterations=cfg.iterations,
        step=StepSchedule.constant(cfg.alpha),
        law=law_from_name(cfg.law, cfg.law_param),
        sched=PreconditionSchedule(cfg.lambda_kind, "ceil", cfg.c),
        seed=cfg.seed,
        cadence=cfg.cadence,
    )


def _finish(out: Path, cfg: ExperimentConfig, record, started: float) -> int:
    extra = {
        "runtime_seconds": f"{time.perf_counter() - started:.3f}",
        "diverged": "true" if record.diverged else "false",
        "abort_iteration": "" if record.abort_iteration is None else record.abort_iteration,
        "max_k": record.max_k,
    }
    (out / "meta.txt").write_text(format_meta(cfg, extra))
    if record.diverged:
        logger.error("divergence abort at iteration %d", record.abort_iteration)
        return EXIT_DIVERGED
    return EXIT_OK


def cmd_heat(cfg: ExperimentConfig) -> int:
    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    risk = HeatRisk(n_interior=cfg.interior_nodes, n_boundary=cfg.boundary_nodes)
    pb = _basis(cfg, risk)
    record = run(risk, pb, _gfd_config(cfg), reference=heat_exact)
    write_csv(
        out / "curve.csv",
        ("n", "risk", "l2_error_to_exact", "k_sampled", "grad_norm"),
        ((r.n, r.risk, r.l2_error, r.k, r.grad_norm) for r in record.rows),
    )
    if not record.diverged:
        pts = grid_points(risk.domain.lower, risk.domain.upper, cfg.grid)
        u = evaluate(record.final, pts)
        write_csv(out / "solution.csv", ("t", "x", "u"), ((p[0], p[1], v) for p, v in zip(pts, u)))
    return _finish(out, cfg, record, started)


def cmd_hjb(cfg: ExperimentConfig) -> int:
    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    params = HjbParams()
    risk = HjbRisk(params, n_interior=cfg.interior_nodes, n_boundary=cfg.boundary_nodes)
    pb = _basis(cfg, risk)
    record = run(risk, pb, _gfd_config(cfg), metric=risk.terminal_error)
    write_csv(
        out / "curve.csv",
        ("n", "risk", "terminal_error", "k_sampled"),
        ((r.n, r.risk, r.l2_error, r.k) for r in record.rows),
    )
    if not record.diverged:
        pts = grid_points(risk.domain.lower, risk.domain.upper, cfg.grid)
        u = evaluate(record.final, pts)
        ctrl = optimal_control(record.final, pts[:, 0], pts[:, 1], params)
        write_csv(out / "solution.csv", ("t", "x", "u"), ((p[0], p[1], v) for p, v in zip(pts, u)))
        write_csv(out / "control.csv", ("t", "x", "c_star"), ((p[0], p[1], v) for p, v in zip(pts, ctrl)))
    return _finish(out, cfg, record, started)


def cmd_verify(cfg: ExperimentConfig) -> int:
    from .oracles import verification_suite

    started = time.perf_counter()
    out = Path(cfg.out)
    out.mkdir(parents=True, exist_ok=True)
    results = verification_suite(seed=cfg.seed, lambda_kind=cfg.lambda_kind, replications=cfg.replications)
    write_csv(
        out / "checks.csv",
        ("check", "statistic", "threshold", "passed"),
        ((r.name, r.statistic, r.threshold, r.passed) for r in results),
    )
    failed = [r.name for r in results if not r.passed]
    extra = {"runtime_seconds": f"{time.perf_counter() - started:.3f}", "failed_checks": len(failed)}
    (out / "meta.txt").write_text(format_meta(cfg, extra))
    for name in failed:
        logger.error("check failed: %s", name)
    return EXIT_CHECK_FAILED if failed else EXIT_OK


COMMANDS = {"heat": cmd_heat, "hjb": cmd_hjb, "verify": cmd_verify}


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="hsgfd", description="Random gradient-free descent for PDE residual risks.")
    sub = parser.add_subparsers(dest="experiment", required=True, parser_class=_Parser)
    for name in EXPERIMENTS:
        p = sub.add_parser(name)
        p.add_argument("--config", help="key=value file; flags override it")
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--lambda", dest="lambda_kind", choices=("tail", "unit"))
        p.add_argument("-v", "--verbose", action="store_true")
        if name == "verify":
            p.add_argument("--replications", type=int)
            continue
        p.add_argument("--iterations", type=int)
        p.add_argument("--alpha", type=float)
        p.add_argument("--law", choices=("shifted_poisson", "geometric", "harmonic"))
        p.add_argument("--law-param", type=float)
        p.add_argument("--c", type=float)
        p.add_argument("--nu", type=float)
        p.add_argument("--eta", type=float)
        p.add_argument("--centers", type=int, help="pre-basis elements prepared before the first step")
        p.add_argument("--interior-nodes", type=int)
        p.add_argument("--boundary-nodes", type=int)
        p.add_argument("--grid", type=int, help="solution grid resolution per axis")
        p.add_argument("--cadence", type=int, help="log every n-th iteration")
        p.add_argument("--gram-cache", help="file to load/store the Gram matrix")
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    flags = {k: v for k, v in vars(args).items() if k in _FIELDS and k != "experiment"}
    try:
        file_values = read_config_file(args.config) if args.config else {}
        cfg = resolve_config(args.experiment, file_values, flags)
        return COMMANDS[cfg.experiment](cfg)
    except ConfigurationError as err:
        print(f"hsgfd: configuration error: {err}", file=sys.stderr)
        return EXIT_USAGE
    except NumericalRankError as err:
        print(f"hsgfd: pre-basis lost numerical rank: {err}", file=sys.stderr)
        return EXIT_USAGE
