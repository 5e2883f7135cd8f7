"""Command-line front end: ``kaonoqs run | figures | verify``.

Exit codes: 0 success, 1 usage error, 2 verification failure, 3 numerical
failure.
"""
from __future__ import annotations

import argparse
import hashlib
import io
import json
import os
import sys
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from . import fock, heisenberg
from .checks import run_checks
from .integrate import IntegrationError
from .observables import (
    FlavorCount, KLongState, KShortState, MixedSingle, ObservableKind, State,
    make_initial, mean_value, mean_value_occupations, one_body_matrix,
)
from .params import PDG_MASS_MEAN, DomainError, PhysParams, from_raw, pdg_defaults

EXIT_OK, EXIT_USAGE, EXIT_VERIFY, EXIT_NUMERIC = 0, 1, 2, 3
MODES = ("closed-form", "ode", "fock", "compare")
PARAM_KEYS = ("tau_S_ns", "tau_L_ns", "delta_m_per_ns", "A_L", "phase_pq_rad")
DEFAULT_CUTOFF = 4


class UsageError(ValueError):
    pass


# Parameter files

def parse_params_text(text: str) -> PhysParams:
    """Parse ``key = value`` lines; ``#`` starts a comment."""
    values: Dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise UsageError(f"params line {lineno}: expected 'key = value', got {raw!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if key not in PARAM_KEYS:
            raise UsageError(f"params line {lineno}: unknown key {key!r}")
        if key in values:
            raise UsageError(f"params line {lineno}: duplicate key {key!r}")
        try:
            values[key] = float(value)
        except ValueError:
            raise UsageError(f"params line {lineno}: {key} is not a number: {value!r}") from None
    missing = [k for k in PARAM_KEYS[:4] if k not in values]
    if missing:
        raise UsageError("params file missing keys: " + ", ".join(missing))
    return from_raw(values["tau_S_ns"], values["tau_L_ns"], values["delta_m_per_ns"],
                    values["A_L"], values.get("phase_pq_rad", 0.0), PDG_MASS_MEAN)


def format_params_text(params: PhysParams) -> str:
    return "".join(f"{k} = {v!r}\n" for k, v in params.raw().items())


def load_params(path: Optional[str]) -> PhysParams:
    path = path or os.environ.get("KAON_PARAMS")
    if not path:
        return pdg_defaults()
    try:
        text = Path(path).read_text()
    except OSError as exc:
        raise UsageError(f"cannot read params file {path!r}: {exc}") from None
    return parse_params_text(text)


def params_hash(params: PhysParams) -> str:
    blob = json.dumps(params.raw(), sort_keys=True).encode()
    return hashlib.sha256(blob).hexdigest()


# Run specs and time series

def parse_state(text: str) -> State:
    text = text.strip().lower()
    try:
        if text.startswith("ns:"):
            return KShortState(int(text[3:]))
        if text.startswith("nl:"):
            return KLongState(int(text[3:]))
        if text.startswith("mixed:"):
            p1, p2, re_w, im_w = (float(x) for x in text[6:].split(","))
            return MixedSingle(p1, p2, complex(re_w, im_w))
        n, n_bar = (int(x) for x in text.split(","))
        return FlavorCount(n, n_bar)
    except DomainError as exc:
        raise UsageError(f"invalid state {text!r}: {exc}") from None
    except ValueError:
        raise UsageError(f"cannot parse state {text!r}; expected n,nbar | ns:<n> | nl:<n> "
                         "| mixed:p1,p2,re_w,im_w") from None


def describe_state(state: State) -> str:
    if isinstance(state, FlavorCount):
        return f"{state.n},{state.n_bar}"
    if isinstance(state, KShortState):
        return f"ns:{state.n}"
    if isinstance(state, KLongState):
        return f"nl:{state.n}"
    w = complex(state.w)
    return f"mixed:{state.p1!r},{state.p2!r},{w.real!r},{w.imag!r}"


@dataclass
class RunSpec:
    observable: ObservableKind = ObservableKind.TotalNumber
    state: State = field(default_factory=lambda: FlavorCount(1, 0))
    t_start: float = 0.0
    t_end: float = 9.0
    samples: int = 901
    mode: str = "closed-form"
    fmt: str = "csv"
    cutoff: int = DEFAULT_CUTOFF
    tol: float = 1e-8
    params_source: str = "pdg-default"

    def validate(self) -> None:
        problems = []
        if not self.t_start >= 0:
            problems.append(f"t_start: must be >= 0, got {self.t_start!r}")
        if not self.t_end > self.t_start:
            problems.append(f"t_end: must exceed t_start, got {self.t_end!r}")
        if self.samples < 2:
            problems.append(f"samples: must be >= 2, got {self.samples!r}")
        if self.mode not in MODES:
            problems.append(f"mode: must be one of {', '.join(MODES)}, got {self.mode!r}")
        if self.fmt not in ("csv", "json"):
            problems.append(f"format: must be csv or json, got {self.fmt!r}")
        if self.cutoff < 0:
            problems.append(f"cutoff: must be >= 0, got {self.cutoff!r}")
        if self.mode in ("fock", "compare") and self.state.total > self.cutoff:
            problems.append(f"state: {self.state.total} particles exceed cutoff {self.cutoff}")
        if not self.tol > 0:
            problems.append(f"tol: must be positive, got {self.tol!r}")
        if problems:
            raise UsageError("invalid run spec: " + "; ".join(problems))

    def times(self) -> np.ndarray:
        return np.linspace(self.t_start, self.t_end, self.samples)

    def echo(self) -> dict:
        return {
            "observable": self.observable.value,
            "state": describe_state(self.state),
            "t_start_ns": self.t_start,
            "t_end_ns": self.t_end,
            "samples": self.samples,
            "mode": self.mode,
            "cutoff": self.cutoff,
            "tol": self.tol,
            "params_source": self.params_source,
        }


@dataclass
class TimeSeries:
    metadata: dict
    columns: List[str]
    rows: np.ndarray  # shape (samples, len(columns)); first column is t_ns

    def _data_csv(self) -> str:
        buf = io.StringIO()
        buf.write(",".join(self.columns) + "\n")
        for row in self.rows:
            buf.write(",".join(repr(float(x)) for x in row) + "\n")
        return buf.getvalue()

    def content_hash(self) -> str:
        return hashlib.sha256(self._data_csv().encode()).hexdigest()

    def full_metadata(self) -> dict:
        meta = dict(self.metadata)
        meta["content_sha256"] = self.content_hash()
        return meta

    def to_csv(self) -> str:
        head = "".join(f"# {k}: {json.dumps(v, sort_keys=True)}\n"
                       for k, v in sorted(self.full_metadata().items()))
        return head + self._data_csv()

    def to_json(self) -> str:
        doc = {"metadata": self.full_metadata(), "columns": self.columns,
               "rows": [[float(x) for x in row] for row in self.rows]}
        return json.dumps(doc, sort_keys=True, indent=1) + "\n"

    def render(self, fmt: str) -> str:
        return self.to_json() if fmt == "json" else self.to_csv()


def _base_metadata(params: PhysParams) -> dict:
    return {"params": params.to_dict(), "params_raw": params.raw(),
            "params_sha256": params_hash(params),
            "units": {"t": "ns", "rates": "1/ns", "mass_mean": "MeV/c^2"}}


def _closed_form_values(spec: RunSpec, params: PhysParams, times) -> np.ndarray:
    return np.asarray(mean_value(spec.observable, params, spec.state, times), dtype=float)


def _ode_values(spec: RunSpec, params: PhysParams, times) -> np.ndarray:
    obs0 = make_initial(spec.observable, params)
    w = heisenberg.propagate_ode_series(params, obs0, times)
    return (w @ one_body_matrix(spec.state, params).reshape(4)).real


def _fock_values(spec: RunSpec, params: PhysParams, times) -> np.ndarray:
    basis = fock.build_basis(spec.cutoff)
    ops = fock.build_lindblad_set(params, basis)
    m = fock.observable_matrix(basis, make_initial(spec.observable, params))
    rhos = fock.evolve_density_series(ops, fock.make_state(basis, params, spec.state), times)
    return np.array([r.expectation(m).real for r in rhos])


def run(spec: RunSpec, params: PhysParams) -> TimeSeries:
    spec.validate()
    times = spec.times()
    meta = _base_metadata(params)
    meta["run"] = spec.echo()
    if spec.mode == "compare":
        cf = _closed_form_values(spec, params, times)
        ode = _ode_values(spec, params, times)
        fk = _fock_values(spec, params, times)
        dev = np.max(np.abs(np.stack([cf - ode, cf - fk, ode - fk])), axis=0)
        meta["max_deviation"] = float(dev.max())
        meta["passed"] = bool(dev.max() <= spec.tol)
        return TimeSeries(meta, ["t_ns", "closed_form", "ode", "fock", "max_deviation"],
                          np.column_stack([times, cf, ode, fk, dev]))
    compute = {"closed-form": _closed_form_values, "ode": _ode_values,
               "fock": _fock_values}[spec.mode]
    column = spec.mode.replace("-", "_")
    return TimeSeries(meta, ["t_ns", column], np.column_stack([times, compute(spec, params, times)]))


# Figures

def figure_datasets(params: PhysParams, t_end: float = 9.0,
                    samples: int = 901) -> Dict[str, TimeSeries]:
    """Curve families for the four standard plots (number, strangeness, K0, anti-K0)."""
    times = np.linspace(0.0, t_end, samples)
    N, S = ObservableKind.TotalNumber, ObservableKind.Strangeness
    K0, K0bar = ObservableKind.NumberK0, ObservableKind.NumberK0bar

    def mean(kind, n, nb):
        return mean_value_occupations(kind, params, n, nb, times)

    def diff(kind, n, nb):
        return mean(kind, n, nb) - mean_value_occupations(kind, params, n, nb, times, cp=True)

    curves: Dict[str, Dict[str, np.ndarray]] = {
        "fig1_total_number": {}, "fig2_strangeness": {},
        "fig3_number_k0": {}, "fig4_number_k0bar": {},
    }
    for total in range(1, 6):
        curves["fig1_total_number"][f"N_sum{total}"] = mean(N, total, 0)
    for d in range(5):
        curves["fig1_total_number"][f"dN_sum4_diff{d}"] = diff(N, (4 + d) / 2, (4 - d) / 2)
    for d in range(5):
        curves["fig2_strangeness"][f"S_sum4_diff{d}"] = mean(S, (4 + d) / 2, (4 - d) / 2)
    for total in range(1, 6):
        curves["fig2_strangeness"][f"dS_sum{total}_diff0"] = diff(S, total / 2, total / 2)
    for n in (1, 2, 3):
        for nb in (0, 1, 2):
            curves["fig3_number_k0"][f"NK0_n{n}_nbar{nb}"] = mean(K0, n, nb)
            curves["fig4_number_k0bar"][f"NK0bar_n{n}_nbar{nb}"] = mean(K0bar, n, nb)

    out = {}
    for name, cols in curves.items():
        meta = _base_metadata(params)
        meta["figure"] = name
        meta["grid"] = {"t_start_ns": 0.0, "t_end_ns": t_end, "samples": samples}
        out[name] = TimeSeries(meta, ["t_ns"] + list(cols),
                               np.column_stack([times] + list(cols.values())))
    return out


def figures(out_dir, params: PhysParams, fmt: str = "csv", t_end: float = 9.0,
            samples: int = 901) -> List[Path]:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, series in figure_datasets(params, t_end, samples).items():
        path = out_dir / f"{name}.{fmt}"
        path.write_text(series.render(fmt))
        paths.append(path)
    return paths


# Argument handling

class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def build_parser() -> argparse.ArgumentParser:
    parser = _Parser(prog="kaonoqs", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True, parser_class=_Parser)

    def common(p):
        p.add_argument("--params", help="parameter file (default: $KAON_PARAMS or PDG values)")
        p.add_argument("--out", help="output path (default: stdout)")

    p_run = sub.add_parser("run", help="evaluate one observable on a time grid")
    common(p_run)
    p_run.add_argument("--observable", default="total-number",
                       help="total-number | strangeness | number-k0 | number-k0bar | "
                            "number-ks | number-kl")
    p_run.add_argument("--state", default="1,0",
                       help="n,nbar | ns:<n> | nl:<n> | mixed:p1,p2,re_w,im_w")
    p_run.add_argument("--t-start", type=float, default=0.0)
    p_run.add_argument("--t-end", type=float, default=9.0)
    p_run.add_argument("--samples", type=int, default=901)
    p_run.add_argument("--mode", default="closed-form", choices=MODES)
    p_run.add_argument("--format", dest="fmt", default="csv", choices=("csv", "json"))
    p_run.add_argument("--cutoff", type=int, default=DEFAULT_CUTOFF)
    p_run.add_argument("--tol", type=float, default=1e-8,
                       help="compare mode: maximum allowed pairwise deviation")

    p_fig = sub.add_parser("figures", help="write the datasets behind figures 1-4")
    p_fig.add_argument("--params")
    p_fig.add_argument("--out", default="figures", help="output directory")
    p_fig.add_argument("--format", dest="fmt", default="csv", choices=("csv", "json"))
    p_fig.add_argument("--t-end", type=float, default=9.0)
    p_fig.add_argument("--samples", type=int, default=901)

    p_ver = sub.add_parser("verify", help="run the consistency suites")
    common(p_ver)
    p_ver.add_argument("suite", nargs="?", default="all", choices=("oracle", "invariants", "all"))
    p_ver.add_argument("--tol", type=float, default=None,
                       help="override every per-check tolerance")
    return parser


def _write(text: str, out: Optional[str]) -> None:
    if out:
        Path(out).write_text(text)
    else:
        sys.stdout.write(text)


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        params = load_params(args.params)
        if args.command == "run":
            spec = RunSpec(
                observable=ObservableKind.parse(args.observable),
                state=parse_state(args.state),
                t_start=args.t_start, t_end=args.t_end, samples=args.samples,
                mode=args.mode, fmt=args.fmt, cutoff=args.cutoff, tol=args.tol,
                params_source=args.params or os.environ.get("KAON_PARAMS") or "pdg-default",
            )
            series = run(spec, params)
            _write(series.render(spec.fmt), args.out)
            if spec.mode == "compare" and not series.metadata["passed"]:
                print(f"kaonoqs: max deviation {series.metadata['max_deviation']:.3e} "
                      f"exceeds tol {spec.tol:.1e}", file=sys.stderr)
                return EXIT_VERIFY
            return EXIT_OK
        if args.command == "figures":
            if args.samples < 2 or not args.t_end > 0:
                raise UsageError("figures: need samples >= 2 and t_end > 0")
            for path in figures(args.out, params, args.fmt, args.t_end, args.samples):
                print(path)
            return EXIT_OK
        results = run_checks(args.suite, params, args.tol)
        report = {"suite": args.suite, "params_sha256": params_hash(params),
                  "passed": all(r.passed for r in results),
                  "checks": [r.to_dict() for r in results]}
        _write(json.dumps(report, indent=1, sort_keys=True) + "\n", args.out)
        return EXIT_OK if report["passed"] else EXIT_VERIFY
    except (UsageError, DomainError) as exc:
        print(f"kaonoqs: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationError as exc:
        print(f"kaonoqs: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except ValueError as exc:
        print(f"kaonoqs: {exc}", file=sys.stderr)
        return EXIT_USAGE


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
