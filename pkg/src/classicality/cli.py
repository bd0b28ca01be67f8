"""Command-line front end.

Every run writes a data file, a ``<out>.config.json`` echo of the effective
parameters (re-runnable with ``--config``) and prints a one-line summary.

Exit codes: 0 success, 2 usage error, 3 validation error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import math
import os
import re
import sys
import tempfile
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import criteria, qbm
from .gaussian import GaussianShape, moments, overlap, purity
from .numerics import Axis, GridSpec, NewtonFailure, StepUnderflow
from .outcome import Outcome

EXIT_OK, EXIT_USAGE, EXIT_VALIDATION, EXIT_NUMERICAL = 0, 2, 3, 4
WORKERS_ENV = "CLASSICALITY_WORKERS"

TABLE_PHI = {"0": 0.0, "1.35p2": 1.35 * math.pi / 2}
# (alpha, beta, gamma, dx, dp, cxp) as printed for eta = 1, r = 1
PRINTED_TABLES = {
    "0": {
        1e6: (2826, 0.0007, -0.999, 0.018, 37.968, 0.509),
        1e4: (280, 0.0070, -0.992, 0.059, 11.977, 0.508),
        1e2: (26.4, 0.0707, -0.931, 0.188, 3.633, 0.466),
        1.0: (1.53, 0.8002, -0.480, 0.632, 0.877, 0.241),
    },
    "1.35p2": {
        1e6: (1500, 0.0007, -0.281, 0.018, 27.792, 0.144),
        1e4: (149, 0.0072, -0.280, 0.060, 8.656, 0.141),
        1e2: (14, 0.0741, -0.270, 0.192, 2.694, 0.140),
        1.0: (1.05, 0.9561, -0.112, 0.694, 0.728, 0.056),
    },
}
TABLE_COLUMNS = ("alpha", "beta", "gamma", "dx", "dp", "cxp")


class ValidationError(ValueError):
    pass


# -- parsing helpers ----------------------------------------------------------

_ANGLE = re.compile(r"^\s*([-+]?(?:\d+\.?\d*|\.\d+)(?:[eE][-+]?\d+)?)?\s*(p2|pi)?\s*$")


def parse_angle(text) -> float:
    """Radians, or multiples of pi/2 (``1.35p2``) or pi (``0.5pi``, ``pi``)."""
    if isinstance(text, (int, float)):
        return float(text)
    m = _ANGLE.match(str(text))
    if not m or (m.group(1) is None and m.group(2) is None):
        raise ValidationError(f"cannot parse angle {text!r}")
    number = float(m.group(1)) if m.group(1) is not None else 1.0
    unit = {"p2": math.pi / 2, "pi": math.pi, None: 1.0}[m.group(2)]
    return number * unit


def parse_axis(name: str, text: str, angle: bool = False) -> Axis:
    parts = str(text).split(":")
    if len(parts) != 3:
        raise ValidationError(f"--{name} expects lo:hi:count, got {text!r}")
    conv = parse_angle if angle else float
    try:
        lo, hi, count = conv(parts[0]), conv(parts[1]), int(parts[2])
        return Axis(name, lo, hi, count)
    except ValueError as exc:
        raise ValidationError(f"--{name}: {exc}") from exc


def parse_floats(text) -> list[float]:
    if isinstance(text, (list, tuple)):
        return [float(v) for v in text]
    try:
        return [float(v) for v in str(text).split(",") if v.strip()]
    except ValueError as exc:
        raise ValidationError(f"cannot parse number list {text!r}") from exc


def parse_shape(text) -> GaussianShape:
    values = parse_floats(text)
    if len(values) != 3:
        raise ValidationError(f"a shape needs alpha,beta,gamma, got {text!r}")
    return GaussianShape(*values)


def fmt(x) -> str:
    return f"{float(x):.12g}"


# -- output -------------------------------------------------------------------


def atomic_write(path: Path, text: str) -> None:
    path = Path(path)
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


def csv_text(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows(rows)
    return buf.getvalue()


def json_text(payload) -> str:
    return json.dumps(payload, indent=2, sort_keys=True) + "\n"


def outcome_cells(outcome) -> list[str]:
    if isinstance(outcome, Outcome):
        value = "" if outcome.value is None else fmt(outcome.value)
        return [value, outcome.status.value]
    return [fmt(outcome), "finite"]


@dataclass
class RunConfig:
    """Every effective parameter of a run; serialisable to JSON."""

    command: str
    params: dict = field(default_factory=dict)

    def to_json(self) -> str:
        return json_text({"command": self.command, "params": self.params})

    @classmethod
    def from_file(cls, path) -> RunConfig:
        data = json.loads(Path(path).read_text())
        return cls(data["command"], data["params"])


# -- models -------------------------------------------------------------------


def build_model(p: dict):
    kind = p.get("model")
    if kind == "osc0":
        return criteria.OscillatorModel(0.0)
    if kind == "oscT":
        if p.get("n") is None:
            raise ValidationError("--model oscT needs --n")
        if float(p["n"]) < 0:
            raise ValidationError("--n must be non-negative")
        return criteria.OscillatorModel(float(p["n"]))
    if kind == "qbm":
        if p.get("T") is None:
            raise ValidationError("--model qbm needs --T")
        if not float(p["T"]) > 0:
            raise ValidationError("--T must be positive")
        scale = qbm.SieveScale(p.get("scale") or "4T")
        return criteria.QbmModel(float(p["T"]), sieve_scale=scale)
    raise ValidationError(f"unknown model {kind!r}")


def _scheme_axis(p: dict, model) -> tuple[Axis, dict]:
    if isinstance(model, criteria.OscillatorModel):
        if p.get("phi_grid"):
            raise ValidationError("--phi-grid applies to --model qbm only")
        axis = parse_axis("s", p.get("s_grid") or "0:1:101")
        if not (0 <= axis.lo and axis.hi <= 1):
            raise ValidationError("--s-grid must lie in [0, 1]")
        return axis, {"eta": float(p.get("eta", 1.0))}
    if p.get("s_grid"):
        raise ValidationError("--s-grid applies to oscillator models only")
    axis = parse_axis("phi", p.get("phi_grid") or "0:pi:65", angle=True)
    if not (0 <= axis.lo and axis.hi <= 2 * math.pi + 1e-12):
        raise ValidationError("--phi-grid must lie in [0, 2pi]")
    return axis, {"eta": float(p.get("eta", 1.0)), "r": float(p.get("r", 1.0))}


def _workers(p: dict) -> int:
    cap = int(os.environ.get(WORKERS_ENV) or os.cpu_count() or 1)
    return max(1, min(int(p.get("workers") or 1), cap))


# -- commands -----------------------------------------------------------------


def cmd_sieve(p: dict):
    model = build_model(p)
    times = parse_floats(p.get("t") or "1")
    if not times or min(times) <= 0:
        raise ValidationError("--t needs positive times")
    refine = int(p.get("refine") or 0)
    if isinstance(model, criteria.OscillatorModel):
        spec = GridSpec((parse_axis("xi", p.get("xi") or "-2:2:81"),), refine_levels=refine)
    else:
        # default windows bracket the short-time and half-purity optima respectively
        a_default, c_default = ("0.5:1.5:41", "-0.5:0.5:41") if model.sieve_scale is qbm.SieveScale.FOUR_T else ("0.5:3:41", "0:3:41")
        spec = GridSpec(
            (parse_axis("A", p.get("A") or a_default), parse_axis("C", p.get("C") or c_default)),
            refine_levels=refine,
        )
        if spec.axes[0].lo <= 0:
            raise ValidationError("--A must be positive")
    workers = _workers(p)
    results = []
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            for t in times:
                results.append(criteria.predictability_sieve(model, spec, t, map_fn=pool.map))
    else:
        results = [criteria.predictability_sieve(model, spec, t) for t in times]

    names = results[0].names
    rows = []
    for t, res in zip(times, results):
        for point, value in res.rows():
            rows.append([fmt(x) for x in point] + [fmt(t), fmt(value)])
    data = csv_text(list(names) + ["t", "purity"], rows)

    argmaxes = [res.argopt for res in results]
    spread = max(max(a[i] for a in argmaxes) - min(a[i] for a in argmaxes) for i in range(len(names)))
    drift_tol = float(p.get("drift_tol") or 0.05)
    parts = [f"t={fmt(t)}: argmax {','.join(f'{n}={fmt(x)}' for n, x in zip(names, a))}" for t, a in zip(times, argmaxes)]
    flag = " [argmax drifts with t]" if spread > drift_tol else ""
    return data, "sieve " + "; ".join(parts) + flag


def _sweep(p: dict, criterion: str, options: dict):
    model = build_model(p)
    axis, fixed = _scheme_axis(p, model)
    res = criteria.scheme_sweep(criterion, model, axis, fixed, options, workers=_workers(p))
    rows = [[fmt(point[0])] + outcome_cells(value) for point, value in res.rows()]
    data = csv_text([axis.name, "value", "status"], rows)
    summary = f"{criterion} arg{res.sense} {axis.name}={fmt(res.argopt[0])} value={res.optimum}"
    return data, summary


def cmd_purification_time(p: dict):
    options = {}
    if p.get("target") is not None:
        options["target"] = float(p["target"])
    return _sweep(p, "purification_time", options)


def cmd_efficiency_threshold(p: dict):
    fixed_time, asymptotic = p.get("fixed_time"), bool(p.get("asymptotic"))
    if (fixed_time is None) == (not asymptotic):
        raise ValidationError("choose exactly one of --fixed-time T and --asymptotic")
    p_thr = float(p.get("p_thr") if p.get("p_thr") is not None else 0.5)
    if asymptotic:
        if p.get("model") != "qbm":
            raise ValidationError("--asymptotic applies to --model qbm only")
        return _sweep(p, "efficiency_threshold_asymptotic", {"p_thr": p_thr})
    if float(fixed_time) <= 0:
        raise ValidationError("--fixed-time must be positive")
    return _sweep(p, "efficiency_threshold_fixed_time", {"p_thr": p_thr, "t_thr": float(fixed_time)})


def cmd_purity_loss(p: dict):
    target = float(p.get("target") if p.get("target") is not None else 0.5)
    return _sweep(p, "purity_loss_time", {"target": target})


def _stationary_record(model: criteria.QbmModel, scheme: qbm.QbmScheme) -> dict:
    shape = model.stationary(scheme)
    m = moments(shape)
    record = {
        "T": model.T, "eta": scheme.eta, "r": scheme.r, "phi": scheme.phi,
        "alpha_ss": shape.alpha, "beta_ss": shape.beta, "gamma_ss": shape.gamma,
        "dx": m.dx, "dp": m.dp, "cxp": m.cxp, "purity": purity(shape),
    }
    try:
        high_t = qbm.stationary_high_T(scheme.r, scheme.phi)
        record.update(A_ss=high_t.A_ss, B_ss=high_t.B_ss, C_ss=high_t.C_ss)
    except qbm.SingularSchemeError:
        pass
    return record


def _qbm_scheme(p: dict, key: str = "phi") -> qbm.QbmScheme:
    try:
        return qbm.QbmScheme(float(p.get("eta", 1.0)), float(p.get("r", 1.0)), parse_angle(p.get(key) or 0))
    except ValueError as exc:
        raise ValidationError(str(exc)) from exc


def cmd_stationary(p: dict):
    model = build_model(p)
    if not isinstance(model, criteria.QbmModel):
        raise ValidationError("stationary applies to --model qbm only")
    record = _stationary_record(model, _qbm_scheme(p))
    summary = "stationary " + " ".join(f"{k}={fmt(record[k])}" for k in ("alpha_ss", "beta_ss", "gamma_ss"))
    return json_text(record), summary


def cmd_overlap(p: dict):
    if p.get("a") and p.get("b"):
        a, b = parse_shape(p["a"]), parse_shape(p["b"])
        source = {"a": list(a.as_tuple()), "b": list(b.as_tuple())}
    else:
        model = build_model(p)
        if not isinstance(model, criteria.QbmModel):
            raise ValidationError("overlap needs --a/--b shapes or --model qbm")
        a = model.stationary(_qbm_scheme(p, "phi_a"))
        b = model.stationary(_qbm_scheme(p, "phi_b"))
        source = {"T": model.T, "phi_a": parse_angle(p.get("phi_a") or 0), "phi_b": parse_angle(p.get("phi_b") or 0)}
    coherent = GaussianShape(1.0, 1.0, 0.0)
    record = dict(
        source,
        overlap=overlap(a, b),
        overlap_squared=overlap(a, b) ** 2,
        mixed_overlap=overlap(a, b, purified=False),
        overlap_a_coherent=overlap(a, coherent),
        overlap_b_coherent=overlap(b, coherent),
    )
    return json_text(record), f"overlap {fmt(record['overlap'])}"


def cmd_tables(p: dict):
    temps = parse_floats(p.get("T_list") or "1e6,1e4,1e2,1")
    rows, worst = [], 0.0
    for label, phi in TABLE_PHI.items():
        for T in temps:
            model = criteria.QbmModel(T)
            rec = _stationary_record(model, qbm.QbmScheme(1.0, 1.0, phi))
            computed = [rec[k] for k in ("alpha_ss", "beta_ss", "gamma_ss", "dx", "dp", "cxp")]
            printed = PRINTED_TABLES[label].get(T)
            row = [label, fmt(phi), fmt(T)] + [fmt(v) for v in computed]
            if printed is None:
                row += [""] * 12
            else:
                errs = [abs(c - q) / abs(q) for c, q in zip(computed, printed)]
                worst = max(worst, *errs)
                row += [fmt(v) for v in printed] + [fmt(e) for e in errs]
            rows.append(row)
    header = (
        ["table_phi", "phi", "T"]
        + list(TABLE_COLUMNS)
        + [f"printed_{c}" for c in TABLE_COLUMNS]
        + [f"relerr_{c}" for c in TABLE_COLUMNS]
    )
    return csv_text(header, rows), f"tables {len(rows)} rows, max relative error vs printed {fmt(worst)}"


COMMANDS = {
    "sieve": cmd_sieve,
    "purification-time": cmd_purification_time,
    "efficiency-threshold": cmd_efficiency_threshold,
    "purity-loss": cmd_purity_loss,
    "stationary": cmd_stationary,
    "overlap": cmd_overlap,
    "tables": cmd_tables,
}


# -- argument parsing ---------------------------------------------------------


def _common(sp, model=True):
    if model:
        sp.add_argument("--model", choices=["osc0", "oscT", "qbm"], required=True)
        sp.add_argument("--n", type=float, help="Bose occupation (oscT)")
        sp.add_argument("--T", type=float, help="temperature in rescaled units (qbm)")
    sp.add_argument("--out", required=True, help="data file to write")
    sp.add_argument("--workers", type=int, default=1, help=f"worker processes (capped by ${WORKERS_ENV})")


def _scheme_grid(sp):
    sp.add_argument("--eta", type=float, default=1.0)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--s-grid", help="oscillator scheme grid lo:hi:count")
    sp.add_argument("--phi-grid", help="QBM angle grid lo:hi:count; angles accept p2/pi suffixes")


def make_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="classicality", description=__doc__.splitlines()[0])
    parser.add_argument("--config", help="re-run from a config echo file")
    sub = parser.add_subparsers(dest="command")

    sp = sub.add_parser("sieve", help="predictability sieve over initial pure states")
    _common(sp)
    sp.add_argument("--xi", help="oscillator squeezing grid lo:hi:count")
    sp.add_argument("--A", help="QBM squeezing grid lo:hi:count")
    sp.add_argument("--C", help="QBM tilt grid lo:hi:count")
    sp.add_argument("--scale", choices=["4T", "sqrt4T"], default="4T")
    sp.add_argument("--t", default="1", help="comma-separated evolution times")
    sp.add_argument("--refine", type=int, default=0)
    sp.add_argument("--drift-tol", type=float, default=0.05)

    sp = sub.add_parser("purification-time")
    _common(sp)
    _scheme_grid(sp)
    sp.add_argument("--target", type=float)

    sp = sub.add_parser("efficiency-threshold")
    _common(sp)
    _scheme_grid(sp)
    sp.add_argument("--fixed-time", type=float)
    sp.add_argument("--asymptotic", action="store_true")
    sp.add_argument("--p-thr", type=float, default=0.5)

    sp = sub.add_parser("purity-loss")
    _common(sp)
    _scheme_grid(sp)
    sp.add_argument("--target", type=float, default=0.5)

    sp = sub.add_parser("stationary")
    _common(sp)
    sp.add_argument("--eta", type=float, default=1.0)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--phi", default="0")

    sp = sub.add_parser("overlap")
    _common(sp)
    sp.set_defaults(model=None)
    for action in sp._actions:
        if action.dest == "model":
            action.required = False
    sp.add_argument("--eta", type=float, default=1.0)
    sp.add_argument("--r", type=float, default=1.0)
    sp.add_argument("--phi-a", default="0")
    sp.add_argument("--phi-b", default="1.35p2")
    sp.add_argument("--a", help="explicit shape alpha,beta,gamma")
    sp.add_argument("--b", help="explicit shape alpha,beta,gamma")

    sp = sub.add_parser("tables", help="stationary-state tables for phi in {0, 1.35 pi/2}")
    _common(sp, model=False)
    sp.add_argument("--T-list", default="1e6,1e4,1e2,1")
    return parser


def run(config: RunConfig) -> str:
    """Execute a run, write its artifacts, and return the summary line."""
    if config.command not in COMMANDS:
        raise ValidationError(f"unknown command {config.command!r}")
    out = Path(config.params["out"])
    data, summary = COMMANDS[config.command](config.params)
    atomic_write(out, data)
    atomic_write(out.with_name(out.name + ".config.json"), config.to_json())
    return summary


_NEGATIVE = re.compile(r"^-[\d.]")


def _glue_negative_values(argv: list[str]) -> list[str]:
    # argparse reads "-2:2:81" as an option; glue such values to their flag
    out = []
    for tok in argv:
        if out and out[-1].startswith("--") and "=" not in out[-1] and _NEGATIVE.match(tok):
            out[-1] = f"{out[-1]}={tok}"
        else:
            out.append(tok)
    return out


def main(argv=None) -> int:
    parser = make_parser()
    argv = _glue_negative_values(list(sys.argv[1:] if argv is None else argv))
    replay = argparse.ArgumentParser(prog="classicality", add_help=False)
    replay.add_argument("--config")
    replay.add_argument("--out")
    known, rest = replay.parse_known_args(argv)
    if known.config:
        if rest:
            parser.error(f"only --out may accompany --config, got: {' '.join(rest)}")
        try:
            config = RunConfig.from_file(known.config)
        except (OSError, ValueError, KeyError) as exc:
            print(f"error: cannot read config {known.config}: {exc}", file=sys.stderr)
            return EXIT_VALIDATION
        if known.out:
            config.params["out"] = known.out
    else:
        args = parser.parse_args(argv)
        if not args.command:
            parser.error("a subcommand is required")
        params = {k: v for k, v in vars(args).items() if k not in ("config", "command")}
        config = RunConfig(args.command, params)

    try:
        summary = run(config)
    except (ValidationError, TypeError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ValueError as exc:
        # constructor checks (scheme ranges, grid bounds) surface as ValueError
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except (StepUnderflow, NewtonFailure, qbm.NotAttainableError, qbm.SingularSchemeError, ArithmeticError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    print(summary)
    return EXIT_OK


def main_exit() -> None:
    sys.exit(main())


if __name__ == "__main__":
    main_exit()
