"""Command line: ``fockcrit <subcommand> ...``.

Exit codes: 0 ok, 1 I/O error, 2 usage, 3 state-file schema, 4 convergence,
5 verification failure.  Tables go to ``--out`` (written atomically) or to
stdout; with no ``--out`` and ``FOCKCRIT_OUTDIR`` set, they are written to
``$FOCKCRIT_OUTDIR/<subcommand>.<ext>``.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import sys
import tempfile
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

from . import bounds
from .criteria import DEFAULT_WS, DETECTION_TOL, evaluate_all, evaluate_moments
from .errors import ConvergenceError, DomainError, NonNormalizableError, SchemaError
from .fock import ensemble_moments

EXIT_OK, EXIT_IO, EXIT_USAGE, EXIT_SCHEMA, EXIT_CONVERGENCE, EXIT_VERIFY = 0, 1, 2, 3, 4, 5
FORMATS = ("text", "csv", "jsonl")
EXTENSIONS = {"text": "txt", "csv": "csv", "jsonl": "jsonl"}
OUTDIR_ENV = "FOCKCRIT_OUTDIR"
VERIFY_SEED = 20240601


class UsageError(Exception):
    pass


# ---------------------------------------------------------------------------
# argument values
# ---------------------------------------------------------------------------

def _num(tok: str) -> float:
    try:
        v = float(tok)
    except ValueError:
        raise UsageError(f"not a number: {tok!r}") from None
    if not math.isfinite(v):
        raise UsageError(f"not a finite number: {tok!r}")
    return v


def parse_n_values(spec: str) -> list[float]:
    """``"0..400"``, ``"1..20:0.5"``, ``"1,5,20"`` or any comma mix of these."""
    out: list[float] = []
    for part in spec.split(","):
        part = part.strip()
        if not part:
            raise UsageError(f"empty item in N list {spec!r}")
        if ".." in part:
            rng, _, step_s = part.partition(":")
            a_s, _, b_s = rng.partition("..")
            a, b = _num(a_s), _num(b_s)
            step = _num(step_s) if step_s else 1.0
            if step <= 0 or b < a:
                raise UsageError(f"bad range {part!r}: need a <= b and step > 0")
            k = int(math.floor((b - a) / step + 1e-9))
            out.extend(a + i * step for i in range(k + 1))
        else:
            out.append(_num(part))
    return out


def parse_ws(values: Sequence[str] | None) -> list[float]:
    ws = []
    for v in values or ():
        ws.extend(_num(t) for t in v.split(",") if t.strip())
    for w in ws:
        if not 0.0 < w < 1.0:
            raise UsageError(f"--w values must lie in (0, 1), got {w:g}")
    return ws


@dataclass
class RunConfig:
    subcommand: str
    state_path: str | None = None
    out: str | None = None
    fmt: str = "text"
    ws: list[float] = field(default_factory=list)
    tolerance: float = DETECTION_TOL
    seed: int = 0
    cutoff: int | None = None
    n_values: list[float] = field(default_factory=list)
    method: str = "recurrence"
    count: int = 1000
    family: str = "mixture"
    n_max: float = 50.0
    threads: int = 1
    quick: bool = False
    amplitudes: str | None = None

    def validate(self) -> None:
        if self.tolerance < 0:
            raise UsageError("--tolerance must be non-negative")
        if self.count < 1:
            raise UsageError("--count must be at least 1")
        if self.threads < 1:
            raise UsageError("--threads must be at least 1")
        if self.cutoff is not None and self.cutoff < 10:
            raise UsageError("--cutoff must be at least 10")
        if self.n_max <= 0:
            raise UsageError("--n-max must be positive")
        if any(n < 0 for n in self.n_values):
            raise UsageError("--n values must be non-negative")
        if self.subcommand in ("minimize", "fig2") and any(n <= 0 for n in self.n_values):
            raise UsageError("minimization targets must be positive")
        if self.subcommand == "fig1" and (len(self.n_values) != 1 or self.n_values[0] <= 0):
            raise UsageError("fig1 takes a single positive --n")
        if self.subcommand == "minimize" and self.ws and self.method != "direct":
            raise UsageError("weighted minimization needs --method direct")


# ---------------------------------------------------------------------------
# output
# ---------------------------------------------------------------------------

def fmt_value(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return "%.15g" % v
    return str(v)


def _json_value(v):
    if isinstance(v, float) and not math.isfinite(v):
        return None if math.isnan(v) else ("inf" if v > 0 else "-inf")
    if isinstance(v, float):
        return float("%.15g" % v)
    return v


def render(columns: Sequence[str], rows, fmt: str) -> str:
    rows = [tuple(r) for r in rows]
    if fmt == "csv":
        buf = io.StringIO()
        wr = csv.writer(buf, lineterminator="\n")
        wr.writerow(columns)
        wr.writerows([fmt_value(v) for v in r] for r in rows)
        return buf.getvalue()
    if fmt == "jsonl":
        return "".join(json.dumps({c: _json_value(v) for c, v in zip(columns, r)}) + "\n" for r in rows)
    cells = [list(columns)] + [[fmt_value(v) for v in r] for r in rows]
    widths = [max(len(row[i]) for row in cells) for i in range(len(columns))]
    return "".join("  ".join(c.ljust(w) for c, w in zip(row, widths)).rstrip() + "\n" for row in cells)


def atomic_write(path: Path, text: str) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def output_path(cfg: RunConfig) -> Path | None:
    if cfg.out:
        return Path(cfg.out)
    outdir = os.environ.get(OUTDIR_ENV)
    if outdir:
        return Path(outdir) / f"{cfg.subcommand}.{EXTENSIONS[cfg.fmt]}"
    return None


def emit(cfg: RunConfig, columns, rows, path: Path | None = None) -> None:
    text = render(columns, rows, cfg.fmt)
    path = path if path is not None else output_path(cfg)
    if path is None:
        sys.stdout.write(text)
    else:
        atomic_write(path, text)


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_evaluate(cfg: RunConfig) -> int:
    from .statefile import load_state
    obj = load_state(cfg.state_path)
    verdicts = evaluate_all(obj, cfg.ws or DEFAULT_WS, cfg.tolerance)
    rows = [(v.criterion_id, v.w, v.lhs, v.rhs, v.margin, v.detected) for v in verdicts]
    emit(cfg, ("criterion", "w", "lhs", "rhs", "margin", "detected"), rows)
    return EXIT_OK


BOUNDS_COLUMNS = ("N", "w", "L", "f", "L_w", "f_w", "f_tilde_w", "hyperbola_rhs")


def cmd_bounds(cfg: RunConfig) -> int:
    ns = cfg.n_values or [float(n) for n in range(0, 401)]
    rows = []
    for N in ns:
        for w in cfg.ws or [0.5]:
            rows.append((N, w, bounds.bound_L(N), bounds.bound_f(N), bounds.bound_Lw(N, w),
                         bounds.bound_fw(N, w), bounds.bound_f_tilde(N, w), bounds.hyperbola_rhs(N)))
    emit(cfg, BOUNDS_COLUMNS, rows)
    return EXIT_OK


MINIMIZE_COLUMNS = ("target_n", "w", "method", "value", "bound", "gap", "constraint_residual", "status")


def cmd_minimize(cfg: RunConfig) -> int:
    from .minimizer import solve_min_direct, solve_min_recurrence
    rows, failed = [], False
    for T in cfg.n_values or [20.0]:
        for w in cfg.ws or [None]:
            methods = ("recurrence", "direct") if cfg.method == "both" else (cfg.method,)
            for meth in methods:
                try:
                    if meth == "recurrence":
                        res = solve_min_recurrence(T, cutoff=cfg.cutoff)
                    else:
                        res = solve_min_direct(T, w=w, cutoff=cfg.cutoff, seed=cfg.seed)
                    rows.append((T, w, meth, res.value, res.bound, res.gap,
                                 res.residuals.get("constraint", math.nan), "ok"))
                except (ConvergenceError, NonNormalizableError) as exc:
                    failed = True
                    rows.append((T, w, meth, math.nan, math.nan, math.nan, math.nan, f"error: {exc}"))
    emit(cfg, MINIMIZE_COLUMNS, rows)
    if failed:
        print("fockcrit: one or more minimizations did not converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


SAMPLE_COLUMNS = ("index", "family", "components", "mean_n", "var_n", "var_diff", "counting_diff", "detected")


def cmd_sample(cfg: RunConfig) -> int:
    from .sampler import sample_separable
    ens = sample_separable(cfg.seed, cfg.count, cfg.n_max, cfg.family, workers=cfg.threads)
    rows = []
    for i, e in enumerate(ens):
        m = ensemble_moments(e)
        det = any(v.detected for v in evaluate_moments(m, cfg.ws or DEFAULT_WS, cfg.tolerance))
        rows.append((i, cfg.family, len(e.components), m.mean_n, m.var_n, m.var_diff, m.counting_diff, det))
    emit(cfg, SAMPLE_COLUMNS, rows)
    return EXIT_OK


def cmd_fig1(cfg: RunConfig) -> int:
    from .sampler import FIG1_COLUMNS, fig1_dataset
    data = fig1_dataset(cfg.n_values[0], seed=cfg.seed, count=cfg.count, w_grid=tuple(cfg.ws or (0.3, 0.7)))
    emit(cfg, FIG1_COLUMNS, data.rows())
    print(f"fig1: {data.violations} separable violations; min gap to hyperbola {data.min_hyperbola_gap:.6g}, "
          f"to simple-sum line {data.min_simple_gap:.6g}", file=sys.stderr)
    return EXIT_OK


def cmd_fig2(cfg: RunConfig) -> int:
    from .sampler import AMPLITUDE_COLUMNS, FIG2_COLUMNS, fig2_amplitudes, fig2_dataset
    grid = cfg.n_values or [0.25, 0.5, 1, 2, 5, 10, 20, 50, 100, 200]
    rows = fig2_dataset(grid, cfg.method, workers=cfg.threads)
    emit(cfg, FIG2_COLUMNS, [r.as_tuple() for r in rows])
    amp_path = Path(cfg.amplitudes) if cfg.amplitudes else None
    main = output_path(cfg)
    if amp_path is None and main is not None:
        amp_path = main.with_name(f"{main.stem}_amplitudes{main.suffix}")
    if amp_path is not None:
        amps, fit = fig2_amplitudes(20.0, "direct" if cfg.method == "direct" else "recurrence")
        emit(cfg, AMPLITUDE_COLUMNS, amps, amp_path)
        print(f"fig2: N=20 Gaussian fit centre {fit.centre:.6g}, width {fit.width:.6g}, R^2 {fit.r2:.6g}",
              file=sys.stderr)
    bad = sum(r.status != "ok" for r in rows)
    if bad:
        print(f"fig2: {bad} row(s) failed to converge", file=sys.stderr)
        return EXIT_CONVERGENCE
    return EXIT_OK


def cmd_verify(cfg: RunConfig) -> int:
    from .verify import VerifyConfig, run_verify

    def report(res):
        print(f"{'PASS' if res.passed else 'FAIL'}  {res.name:<22} {res.seconds:7.2f}s  {res.detail}", flush=True)

    results = run_verify(VerifyConfig(quick=cfg.quick, seed=cfg.seed,
                                      workers=cfg.threads), report)
    failed = [r.name for r in results if not r.passed]
    print(f"{len(results) - len(failed)}/{len(results)} checks passed")
    return EXIT_VERIFY if failed else EXIT_OK


COMMANDS = {
    "evaluate": cmd_evaluate, "bounds": cmd_bounds, "minimize": cmd_minimize, "sample": cmd_sample,
    "fig1": cmd_fig1, "fig2": cmd_fig2, "verify": cmd_verify,
}


# ---------------------------------------------------------------------------
# parser
# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="fockcrit", description="Entanglement criteria for two-mode states.")
    sub = p.add_subparsers(dest="subcommand", required=True)

    def common(sp, n=False, w=True):
        sp.add_argument("--out", help="output file (atomic write)")
        sp.add_argument("--format", dest="fmt", choices=FORMATS, default="text")
        if w:
            sp.add_argument("--w", action="append", help="weight(s) in (0,1); repeat or comma-separate")
        if n:
            sp.add_argument("--n", help="N values: list '1,5,20' or range 'a..b[:step]'")
        return sp

    sp = common(sub.add_parser("evaluate", help="run every criterion on a state file"))
    sp.add_argument("state", help="JSON state file")
    sp.add_argument("--tolerance", type=float, default=DETECTION_TOL)

    common(sub.add_parser("bounds", help="tabulate the analytic bounds"), n=True)

    sp = common(sub.add_parser("minimize", help="constrained minimum of var(N_A) + var(a)"), n=True)
    sp.add_argument("--method", choices=("recurrence", "direct", "both"), default="recurrence")
    sp.add_argument("--cutoff", type=int)
    sp.add_argument("--seed", type=int, default=0)

    sp = common(sub.add_parser("sample", help="random separable ensembles and their moments"))
    sp.add_argument("--family", choices=("vacuum_product", "product", "mixture", "fock_mixture",
                                         "coherent_mixture"), default="mixture")
    sp.add_argument("--count", type=int, default=1000)
    sp.add_argument("--n-max", dest="n_max", type=float, default=50.0)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--tolerance", type=float, default=DETECTION_TOL)
    sp.add_argument("--threads", type=int)

    sp = common(sub.add_parser("fig1", help="var(N) vs var(a-b) plane data at fixed <N>"), n=True)
    sp.add_argument("--seed", type=int, default=0)
    sp.add_argument("--count", type=int, default=400)

    sp = common(sub.add_parser("fig2", help="minimum of R versus <N_A> next to L(N)"), n=True, w=False)
    sp.add_argument("--method", choices=("recurrence", "direct", "both"), default="recurrence")
    sp.add_argument("--amplitudes", help="where to write the N=20 amplitude table")
    sp.add_argument("--threads", type=int)

    sp = sub.add_parser("verify", help="run the self-verification suite")
    sp.add_argument("--quick", action="store_true")
    sp.add_argument("--seed", type=int, default=VERIFY_SEED)
    sp.add_argument("--threads", type=int)
    return p


def config_from_args(ns: argparse.Namespace) -> RunConfig:
    cfg = RunConfig(subcommand=ns.subcommand)
    for name in ("out", "fmt", "tolerance", "seed", "cutoff", "method", "count", "family", "n_max",
                 "quick", "amplitudes"):
        if getattr(ns, name, None) is not None:
            setattr(cfg, name, getattr(ns, name))
    cfg.state_path = getattr(ns, "state", None)
    cfg.ws = parse_ws(getattr(ns, "w", None))
    n = getattr(ns, "n", None)
    if n is not None:
        cfg.n_values = parse_n_values(n)
    elif cfg.subcommand == "fig1":
        cfg.n_values = [200.0]
    threads = getattr(ns, "threads", None)
    cfg.threads = threads if threads is not None else (os.cpu_count() or 1)
    cfg.validate()
    return cfg


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    try:
        cfg = config_from_args(ns)
    except UsageError as exc:
        print(f"fockcrit {ns.subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    try:
        return COMMANDS[cfg.subcommand](cfg)
    except SchemaError as exc:
        print(f"fockcrit: invalid state file: {exc}", file=sys.stderr)
        return EXIT_SCHEMA
    except (ConvergenceError, NonNormalizableError) as exc:
        print(f"fockcrit: did not converge: {exc}", file=sys.stderr)
        return EXIT_CONVERGENCE
    except DomainError as exc:
        print(f"fockcrit {cfg.subcommand}: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except OSError as exc:
        print(f"fockcrit: I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
