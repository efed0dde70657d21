"""Command-line interface: ``partialcoin {coin,twocoins,biased,coeffs,verify}``.

Exit codes: 0 success, 1 verification failure, 2 usage error,
3 domain or numerical error.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import secrets
import sys
from dataclasses import dataclass, field
from importlib import resources

import numpy as np

from . import __version__
from .coefficients import partial_coin_pmf, sibuya_weights, signed_sums
from .coupling import TAIL, TailPolicy, cdf_from_pmf, interlacing_check
from .decomposition import (
    BiasedCoinSpec,
    Decomposition,
    biased_coin_pmf,
    build_biased_g,
    build_biased_h,
    build_g,
    build_h,
    decompose,
    decompose_biased,
    defect_mass,
    product_residual,
)
from .errors import PartialCoinError
from .sibuya import cdf_closed_form
from .simulation import (
    DEFAULT_SHIFT,
    DEFAULT_TERMS,
    CoinSpec,
    FlipTrace,
    RunSummary,
    run_biased,
    run_pair,
    run_single,
)

EXIT_OK = 0
EXIT_VERIFY_FAILED = 1
EXIT_USAGE = 2
EXIT_DOMAIN = 3

SEED_ENV = "PARTIALCOIN_SEED"
SUM_TOLERANCE = 1e-9
PRODUCT_TOLERANCE = 1e-12
TRACE_COLUMNS = ("flip_index", "u", "g_val", "h_val", "f", "tail")
HIST_WIDTH = 50
DEFAULT_GRID = tuple(round(0.1 * i, 1) for i in range(1, 10))


def load_schema() -> dict:
    return json.loads(resources.files(__package__).joinpath("summary.schema.json").read_text())


@dataclass(frozen=True)
class OutputSummary:
    """Machine-readable run report; see ``summary.schema.json``."""

    command: str
    params: dict[str, float]
    terms: int
    shift: int
    flips: int
    seed: int
    counts: dict[int, int]
    expectation: float
    exact_probability: float
    tail_events: int
    tail_policy: str = TailPolicy.ZERO_DIFFERENCE.value
    version: str = __version__

    @classmethod
    def from_run(cls, command: str, params: dict, args: argparse.Namespace, summary: RunSummary) -> OutputSummary:
        return cls(
            command=command,
            params=params,
            terms=args.terms,
            shift=args.shift,
            flips=summary.n_flips,
            seed=summary.seed,
            counts=dict(summary.counts),
            expectation=summary.expectation,
            exact_probability=summary.exact_probability,
            tail_events=summary.tail_events,
            tail_policy=args.tail_policy,
        )

    def to_dict(self) -> dict:
        return {
            "command": self.command,
            **self.params,
            "terms": self.terms,
            "shift": self.shift,
            "flips": self.flips,
            "seed": self.seed,
            "counts": {str(k): v for k, v in sorted(self.counts.items())},
            "expectation": self.expectation,
            "exact_probability": self.exact_probability,
            "tail_events": self.tail_events,
            "tail_policy": self.tail_policy,
            "version": self.version,
        }

    @classmethod
    def from_dict(cls, data: dict) -> OutputSummary:
        data = dict(data)
        params = {k: data.pop(k) for k in ("mu", "mu1", "mu2", "a", "b") if k in data}
        data["counts"] = {int(k): v for k, v in data["counts"].items()}
        return cls(params=params, **data)

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2) + "\n"

    def to_csv(self) -> str:
        row = self.to_dict()
        counts = row.pop("counts")
        row.update({f"count_{k}": v for k, v in counts.items()})
        buf = io.StringIO()
        writer = csv.DictWriter(buf, fieldnames=list(row), lineterminator="\n")
        writer.writeheader()
        writer.writerow({k: repr(v) if isinstance(v, float) else v for k, v in row.items()})
        return buf.getvalue()

    def to_text(self, hist: bool = False) -> str:
        params = " ".join(f"{k}={v!r}" for k, v in self.params.items())
        lines = [
            f"{self.command}: {params} terms={self.terms} shift={self.shift} "
            f"seed={self.seed} tail_policy={self.tail_policy}",
        ]
        c = self.counts
        if self.command == "twocoins":
            lines.append(
                f"Flips: {self.flips}; ones on both partial coins: {c.get(2, 0)}; "
                f"ones on one partial coin: {c.get(1, 0)}; zeros on both partial coins: {c.get(0, 0)}; "
                f"expectation: {self.expectation:.4f}"
            )
        else:
            lines.append(
                f"Flips: {self.flips}; ones: {c.get(1, 0)}; zeros: {c.get(0, 0)}; "
                f"expectation: {self.expectation:.4f}"
            )
        lines.append(f"Exact expectation: {self.exact_probability:.6f}; tail events: {self.tail_events}")
        if hist:
            lines.extend(text_histogram(c))
        return "\n".join(lines) + "\n"


def text_histogram(counts: dict[int, int], width: int = HIST_WIDTH) -> list[str]:
    top = max(counts.values()) or 1
    return [f"{k:>3} | {'#' * round(width * v / top):<{width}} {v}" for k, v in sorted(counts.items())]


def trace_csv(trace: FlipTrace) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(TRACE_COLUMNS)
    for i, u, g, h, f, t in zip(
        trace.index.tolist(), trace.u.tolist(), trace.g_val.tolist(),
        trace.h_val.tolist(), trace.f.tolist(), trace.tail.tolist(),
    ):
        writer.writerow([i, f"{u:.17g}", "" if g == TAIL else g, "" if h == TAIL else h, f, int(t)])
    return buf.getvalue()


# -- argument parsing ---------------------------------------------------------


def exponent(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if not 0.0 < value <= 1.0:
        raise argparse.ArgumentTypeError("mu must be in (0,1]")
    return value


def probability(text: str) -> float:
    try:
        value = float(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid number: {text!r}")
    if not 0.0 < value < 1.0:
        raise argparse.ArgumentTypeError("a and b must be in (0,1)")
    return value


def positive_int(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}")
    if value < 1:
        raise argparse.ArgumentTypeError("must be a positive integer")
    return value


def shift_value(text: str) -> int:
    try:
        value = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid integer: {text!r}")
    if value < -1:
        raise argparse.ArgumentTypeError("shift must be >= -1")
    return value


def seed_value(text: str) -> int:
    try:
        value = int(text, 0)
    except ValueError:
        raise argparse.ArgumentTypeError(f"invalid seed: {text!r}")
    if not 0 <= value < 2**64:
        raise argparse.ArgumentTypeError("seed must be in [0, 2**64)")
    return value


def exponent_list(text: str) -> list[float]:
    """Comma list of exponents; ``0.1,0.2,...,0.9`` expands an arithmetic run."""
    items = [s.strip() for s in text.split(",") if s.strip()]
    values: list[float] = []
    for i, item in enumerate(items):
        if item == "...":
            if len(values) < 2 or i + 1 >= len(items):
                raise argparse.ArgumentTypeError("'...' needs two values before it and one after")
            step = values[-1] - values[-2]
            stop = exponent(items[i + 1])
            if step <= 0:
                raise argparse.ArgumentTypeError("'...' needs an increasing run")
            start = values[-1]
            n = round((stop - start) / step)
            values.extend([round(start + step * j, 12) for j in range(1, n)])
        else:
            values.append(exponent(item))
    return values


def _add_run_options(p: argparse.ArgumentParser, trace: bool = False) -> None:
    p.add_argument("--terms", type=positive_int, default=DEFAULT_TERMS, help="expansion length N")
    p.add_argument("--flips", type=positive_int, default=10_000, help="number of flips")
    p.add_argument("--shift", type=shift_value, default=DEFAULT_SHIFT, help="power k of the factor x**k")
    p.add_argument("--seed", type=seed_value, default=None, help=f"64-bit seed (fallback: ${SEED_ENV})")
    p.add_argument(
        "--tail-policy",
        choices=[t.value for t in TailPolicy],
        default=TailPolicy.ZERO_DIFFERENCE.value,
        help="tail draws give a zero difference (zero) or are drawn again (redraw)",
    )
    p.add_argument("--format", choices=("text", "json", "csv"), default="text")
    p.add_argument("--output", "-o", default=None, help="write the summary here instead of stdout")
    p.add_argument("--hist", action="store_true", help="append a text histogram (text format)")
    p.add_argument("--threads", type=positive_int, default=1, help="worker threads; output does not depend on it")
    if trace:
        p.add_argument("--trace", default=None, metavar="FILE", help="write per-flip CSV trace")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="partialcoin", description="Simulate partial coins.")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("coin", help="flip one partial coin")
    p.add_argument("--mu", type=exponent, required=True, help="exponent in (0,1]")
    _add_run_options(p, trace=True)
    p.set_defaults(handler=cmd_coin)

    p = sub.add_parser("twocoins", help="flip a pair of independent partial coins")
    p.add_argument("--mu1", type=exponent, required=True)
    p.add_argument("--mu2", type=exponent, required=True)
    _add_run_options(p)
    p.set_defaults(handler=cmd_twocoins)

    p = sub.add_parser("biased", help="flip a biased partial coin (a + b x)**mu")
    p.add_argument("--a", type=probability, required=True)
    p.add_argument("--b", type=probability, required=True)
    p.add_argument("--mu", type=exponent, required=True, help="exponent in (0,1]")
    _add_run_options(p, trace=True)
    p.set_defaults(handler=cmd_biased)

    p = sub.add_parser("coeffs", help="print f, g or h coefficients as CSV")
    p.add_argument("--mu", type=exponent, required=True, help="exponent in (0,1]")
    p.add_argument("--terms", type=positive_int, default=20, help="number of rows")
    p.add_argument("--which", choices=("f", "g", "h"), default="f")
    p.add_argument("--shift", type=shift_value, default=DEFAULT_SHIFT)
    p.add_argument("--a", type=probability, default=None, help="biased coin weight on 0")
    p.add_argument("--b", type=probability, default=None, help="biased coin weight on 1")
    p.set_defaults(handler=cmd_coeffs)

    p = sub.add_parser("verify", help="check the decomposition identities")
    p.add_argument("--mu", type=exponent_list, default=list(DEFAULT_GRID), help="exponent or comma list")
    p.add_argument("--terms", type=positive_int, default=DEFAULT_TERMS)
    p.add_argument("--shift", type=shift_value, default=DEFAULT_SHIFT)
    p.add_argument("--a", type=probability, default=None, help="biased coin weight on 0")
    p.add_argument("--b", type=probability, default=None, help="biased coin weight on 1")
    p.add_argument("--inject-fault", action="store_true", help=argparse.SUPPRESS)
    p.set_defaults(handler=cmd_verify)
    return parser


# -- commands -------------------------------------------------------------------


class UsageError(Exception):
    pass


def _resolve_seed(args: argparse.Namespace) -> int:
    if args.seed is not None:
        return args.seed
    env = os.environ.get(SEED_ENV)
    if env:
        try:
            return seed_value(env)
        except argparse.ArgumentTypeError as exc:
            raise UsageError(f"${SEED_ENV}: {exc}")
    return secrets.randbits(64)


def _biased_spec(args: argparse.Namespace, mu: float) -> BiasedCoinSpec | None:
    if args.a is None and args.b is None:
        return None
    if args.a is None or args.b is None:
        raise UsageError("--a and --b must be given together")
    if abs(args.a + args.b - 1.0) > SUM_TOLERANCE:
        raise UsageError("a + b must equal 1")
    # b is re-derived so the pair sums to one exactly.
    if args.a >= args.b:
        return BiasedCoinSpec.normalized(args.a, 1.0 - args.a, mu)
    return BiasedCoinSpec.normalized(1.0 - args.b, args.b, mu)


def _write(text: str, path: str | None) -> None:
    if path is None:
        sys.stdout.write(text)
    else:
        with open(path, "w", newline="") as fh:
            fh.write(text)


def _emit(out: OutputSummary, args: argparse.Namespace, trace: FlipTrace | None = None) -> int:
    if args.format == "json":
        text = out.to_json()
    elif args.format == "csv":
        text = out.to_csv()
    else:
        text = out.to_text(hist=args.hist)
    _write(text, args.output)
    if trace is not None:
        _write(trace_csv(trace), args.trace)
    return EXIT_OK


def cmd_coin(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    spec = CoinSpec(args.mu, args.terms, args.shift, TailPolicy(args.tail_policy))
    summary, trace = run_single(spec, args.flips, seed, trace=args.trace is not None, threads=args.threads)
    return _emit(OutputSummary.from_run("coin", {"mu": args.mu}, args, summary), args, trace)


def cmd_twocoins(args: argparse.Namespace) -> int:
    seed = _resolve_seed(args)
    policy = TailPolicy(args.tail_policy)
    spec1 = CoinSpec(args.mu1, args.terms, args.shift, policy)
    spec2 = CoinSpec(args.mu2, args.terms, args.shift, policy)
    summary = run_pair(spec1, spec2, args.flips, seed, threads=args.threads)
    return _emit(OutputSummary.from_run("twocoins", {"mu1": args.mu1, "mu2": args.mu2}, args, summary), args)


def cmd_biased(args: argparse.Namespace) -> int:
    spec = _biased_spec(args, args.mu)
    seed = _resolve_seed(args)
    summary, trace = run_biased(
        spec, args.flips, seed,
        n_terms=args.terms, shift=args.shift, tail_policy=TailPolicy(args.tail_policy),
        trace=args.trace is not None, threads=args.threads,
    )
    params = {"a": args.a, "b": args.b, "mu": args.mu}
    return _emit(OutputSummary.from_run("biased", params, args, summary), args, trace)


def coefficient_table(
    mu: float, which: str, terms: int, shift: int = DEFAULT_SHIFT, spec: BiasedCoinSpec | None = None
) -> list[tuple[int, float]]:
    """``(index, value)`` rows: powers of ``x`` for ``f``, support values for ``g``/``h``."""
    biased = spec is not None and not spec.is_fair
    if which == "f":
        n = max(terms - 1, 1)
        pmf = biased_coin_pmf(spec, n) if biased else partial_coin_pmf(mu, n)
        return list(enumerate(pmf.p[:terms].tolist()))
    if which == "g":
        pmf = build_biased_g(spec, shift, terms) if biased else build_g(mu, shift, terms)
    else:
        pmf = build_biased_h(spec, shift, terms) if biased else build_h(mu, shift, terms)
    return list(zip(pmf.support.tolist(), pmf.probs.tolist()))


def cmd_coeffs(args: argparse.Namespace) -> int:
    spec = _biased_spec(args, args.mu)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(("index", "value"))
    for index, value in coefficient_table(args.mu, args.which, args.terms, args.shift, spec):
        writer.writerow((index, repr(value)))
    _write(buf.getvalue(), None)
    return EXIT_OK


@dataclass
class CheckReport:
    lines: list[str] = field(default_factory=list)
    first_failure: str | None = None

    def record(self, label: str, ok: bool, detail: str = "") -> None:
        self.lines.append(f"{'PASS' if ok else 'FAIL'}  {label}" + (f"  ({detail})" if detail else ""))
        if not ok and self.first_failure is None:
            self.first_failure = label


def _check_decomposition(report: CheckReport, label: str, d: Decomposition, strict_positive: bool) -> None:
    if strict_positive:
        ok = bool(np.all(d.g.probs > 0) and np.all(d.h.probs > 0))
    else:
        ok = bool(np.all(d.g.probs >= 0) and np.all(d.h.probs >= 0))
    report.record(f"{label} positivity of g and h", ok)
    err = float(np.max(np.abs(product_residual(d))))
    report.record(f"{label} product identity f*g = h", err <= PRODUCT_TOLERANCE, f"max error {err:.3e}")
    ok = interlacing_check(cdf_from_pmf(d.g), cdf_from_pmf(d.h))
    report.record(f"{label} interlacing H <= G <= H(+1)", ok)


def _check_signed_sums(report: CheckReport, mu: float, terms: int) -> None:
    total, abs_total = signed_sums(partial_coin_pmf(mu, terms))
    scale = 2.0**-mu
    if mu == 1.0:
        report.record(f"mu={mu} signed sums", total == 1.0 and abs_total == 1.0)
        return
    # Alternating series with decreasing terms: the remainder is below the next term.
    next_term = scale * sibuya_weights(mu, terms + 1).w[-1]
    ok = abs(total - 1.0) <= next_term + 1e-12
    report.record(f"mu={mu} sum p_n -> 1", ok, f"error {abs(total - 1.0):.3e}, bound {next_term:.3e}")
    # The absolute remainder is exactly the Sibuya tail, evaluated here in closed form.
    expected = 2.0 ** (1.0 - mu) - scale * (1.0 - cdf_closed_form(mu, terms))
    err = abs(abs_total - expected)
    report.record(f"mu={mu} sum |p_n| -> 2**(1-mu)", err <= 1e-9, f"tail-corrected error {err:.3e}")


def _inject_fault(d: Decomposition) -> Decomposition:
    p = np.array(d.f.p)
    p[3] += 1e-6
    return Decomposition(type(d.f)(d.f.mu, d.f.n_terms, p), d.g, d.h, d.shift)


def cmd_verify(args: argparse.Namespace) -> int:
    report = CheckReport()
    spec = None
    if args.a is not None or args.b is not None:
        spec = _biased_spec(args, 0.5)
    for mu in args.mu:
        d = decompose(mu, args.shift, args.terms)
        if args.inject_fault:
            d = _inject_fault(d)
        _check_decomposition(report, f"mu={mu}", d, strict_positive=mu < 1.0)
        _check_signed_sums(report, mu, args.terms)
        if spec is not None and not spec.is_fair:
            biased = BiasedCoinSpec(spec.a, spec.b, mu, spec.swapped)
            db = decompose_biased(biased, args.shift, args.terms)
            label = f"a={spec.a} b={spec.b} mu={mu}"
            _check_decomposition(report, label, db, strict_positive=False)
            c = defect_mass(biased)
            ok = all(math.isclose(x.total_mass, c) and x.probs.sum() <= c + 1e-12 for x in (db.g, db.h))
            report.record(f"{label} defect mass c={c:.7f}", ok)
    sys.stdout.write("\n".join(report.lines) + "\n")
    if report.first_failure is not None:
        sys.stdout.write(f"verification failed: {report.first_failure}\n")
        return EXIT_VERIFY_FAILED
    sys.stdout.write(f"all {len(report.lines)} checks passed\n")
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.handler(args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        sys.stderr.write(f"{parser.prog} {args.command}: error: {exc}\n")
        return EXIT_USAGE
    except (PartialCoinError, FloatingPointError, OverflowError, MemoryError) as exc:
        sys.stderr.write(f"{parser.prog} {args.command}: {exc}\n")
        return EXIT_DOMAIN


if __name__ == "__main__":
    sys.exit(main())
