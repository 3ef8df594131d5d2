"""Command-line interface: ``ldpcdo {price,sweep,simulate,verify,calibrate}``.

Exit codes: 0 success, 2 configuration error, 3 violated assumption (or an
undefined result such as a zero premium leg), 4 verification failure.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import math
import sys
from dataclasses import dataclass
from typing import Iterable, Optional, Sequence

import jsonschema

from .errors import (
    AssumptionViolated,
    CombinatorialBlowup,
    DegenerateCurve,
    InvalidParameter,
    NonUniqueMinimizer,
    NoRoot,
    UndefinedSpread,
)
from .models import DefaultCurve, calibrate_flat_hazard, curve_from_json, validate_assumptions
from .pricer import (
    MixtureStates,
    TrancheSpec,
    dominant_state,
    gaussian_copula_states,
    granularity,
    log_theoretical_price_star,
    protection_leg_asymptotic,
    quarterly_dates,
    spread_asymptotic,
)
from .ldp import hbar
from .sim import diagnostics_from_paths, is_estimate, price_from_paths, simulate_paths, _tilted_checks

EXIT_OK, EXIT_CONFIG, EXIT_ASSUMPTION, EXIT_VERIFY = 0, 2, 3, 4

SWEEP_COLUMNS = ("N", "alpha", "beta", "f_t_minus", "granularity", "exponent_nats", "value", "log10_value")
SIMULATE_COLUMNS = ("path", "defaults_before_T", "prot", "prem", "weight")

_NUMBER = {"type": "number"}
_PROB_OPEN = {"type": "number", "exclusiveMinimum": 0, "exclusiveMaximum": 1}

CONFIG_SCHEMA = {
    "type": "object",
    "required": ["curve", "tranche", "pool"],
    "additionalProperties": False,
    "properties": {
        "curve": {
            "type": "object",
            "required": ["kind"],
            "oneOf": [
                {
                    "properties": {
                        "kind": {"const": "reduced_form"},
                        "hazard": {
                            "type": "array",
                            "minItems": 1,
                            "items": {
                                "type": "object",
                                "required": ["until", "lambda"],
                                "additionalProperties": False,
                                "properties": {
                                    "until": {"type": "number", "exclusiveMinimum": 0},
                                    "lambda": {"type": "number", "exclusiveMinimum": 0},
                                },
                            },
                        },
                    },
                    "required": ["hazard"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "kind": {"const": "merton"},
                        "sigma": {"type": "number", "exclusiveMinimum": 0},
                        "theta": _NUMBER,
                        "barrier": _PROB_OPEN,
                    },
                    "required": ["sigma", "theta", "barrier"],
                    "additionalProperties": False,
                },
                {
                    "properties": {
                        "kind": {"const": "tabulated"},
                        "times": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0}},
                        "cdf": {"type": "array", "minItems": 1, "items": {"type": "number", "minimum": 0, "maximum": 1}},
                        "interp": {"enum": ["step", "linear"]},
                        "mass_at_infinity": {"type": "number", "minimum": 0, "maximum": 1},
                    },
                    "required": ["times", "cdf"],
                    "additionalProperties": False,
                },
            ],
        },
        "tranche": {
            "type": "object",
            "required": ["alpha", "beta", "t_expiry", "payment_dates"],
            "additionalProperties": False,
            "properties": {
                "alpha": _PROB_OPEN,
                "beta": {"type": "number", "exclusiveMinimum": 0, "maximum": 1},
                "t_expiry": {"type": "number", "exclusiveMinimum": 0},
                "payment_dates": {
                    "oneOf": [
                        {"const": "quarterly"},
                        {"type": "array", "minItems": 1, "items": {"type": "number", "exclusiveMinimum": 0}},
                    ]
                },
                "riskless_rate": {"type": "number", "minimum": 0},
            },
        },
        "pool": {
            "type": "object",
            "required": ["n"],
            "additionalProperties": False,
            "properties": {"n": {"type": "integer", "minimum": 1}},
        },
        "simulation": {
            "type": "object",
            "additionalProperties": False,
            "properties": {
                "n_paths": {"type": "integer", "minimum": 2},
                "seed": {"type": "integer", "minimum": 0, "maximum": 2**64 - 1},
                "mode": {"enum": ["plain", "tilted"]},
            },
        },
        "mixture": {
            "type": "object",
            "additionalProperties": False,
            "oneOf": [{"required": ["states"]}, {"required": ["copula"]}],
            "properties": {
                "states": {
                    "type": "array",
                    "minItems": 1,
                    "items": {
                        "type": "object",
                        "required": ["p", "f"],
                        "additionalProperties": False,
                        "properties": {
                            "p": {"type": "number", "minimum": 0, "maximum": 1},
                            "f": {"type": "number", "minimum": 0, "maximum": 1},
                        },
                    },
                },
                "copula": {
                    "type": "object",
                    "required": ["p", "rho", "m"],
                    "additionalProperties": False,
                    "properties": {"p": _PROB_OPEN, "rho": _PROB_OPEN, "m": {"type": "integer", "minimum": 1}},
                },
            },
        },
    },
}


class ConfigError(Exception):
    """Schema or semantic problem with the configuration."""


@dataclass(frozen=True)
class RunConfig:
    curve: DefaultCurve
    tranche: TrancheSpec
    n: int
    n_paths: int = 100_000
    seed: int = 0
    mode: str = "plain"
    mixture: Optional[MixtureStates] = None
    raw: Optional[dict] = None

    @property
    def f_t_minus(self) -> float:
        return float(self.curve.left_limit(self.tranche.t_expiry))


def _json_path(error: jsonschema.ValidationError) -> str:
    path = "$"
    for part in error.absolute_path:
        path += f"[{part}]" if isinstance(part, int) else f".{part}"
    return path


def validate_config(raw: dict) -> None:
    validator = jsonschema.Draft202012Validator(CONFIG_SCHEMA)
    err = jsonschema.exceptions.best_match(validator.iter_errors(raw))
    if err is not None:
        raise ConfigError(f"config error at {_json_path(err)}: {err.message}")


def build_config(raw: dict, n=None, seed=None, paths=None) -> RunConfig:
    raw = json.loads(json.dumps(raw))
    if n is not None:
        raw.setdefault("pool", {})["n"] = n
    if seed is not None or paths is not None:
        sim = raw.setdefault("simulation", {})
        if seed is not None:
            sim["seed"] = seed
        if paths is not None:
            sim["n_paths"] = paths
    validate_config(raw)
    tr = raw["tranche"]
    dates = tr["payment_dates"]
    T = float(tr["t_expiry"])
    try:
        curve = curve_from_json(raw["curve"])
        tranche = TrancheSpec(
            tr["alpha"],
            tr["beta"],
            T,
            quarterly_dates(T) if dates == "quarterly" else tuple(dates),
            tr.get("riskless_rate", 0.0),
        )
        mixture = None
        if "mixture" in raw:
            block = raw["mixture"]
            if "states" in block:
                mixture = MixtureStates.from_pairs([(s["p"], s["f"]) for s in block["states"]])
            else:
                c = block["copula"]
                mixture = gaussian_copula_states(c["p"], c["rho"], c["m"])
    except InvalidParameter as exc:
        raise ConfigError(f"config error: {exc}") from None
    sim = raw.get("simulation", {})
    return RunConfig(
        curve,
        tranche,
        raw["pool"]["n"],
        sim.get("n_paths", 100_000),
        sim.get("seed", 0),
        sim.get("mode", "plain"),
        mixture,
        raw,
    )


def load_config(path: str, **overrides) -> RunConfig:
    try:
        with open(path, encoding="utf-8") as fh:
            raw = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path!r} is not valid JSON: {exc}") from None
    return build_config(raw, **overrides)


# --- price ----------------------------------------------------------------------


def _log10(x: float) -> float:
    return math.log10(x) if x > 0 else -math.inf


def price_report(cfg: RunConfig) -> dict:
    tranche, n = cfg.tranche, cfg.n
    if cfg.mixture is not None:
        states = cfg.mixture
        states.check_investment_grade(tranche.alpha)
        contributions = []
        for i, (p, f) in enumerate(zip(states.weights, states.levels)):
            if p == 0 or f == 0:
                contributions.append({"state": i, "p": float(p), "f": float(f), "value": 0.0, "exponent_nats": None})
                continue
            a = protection_leg_asymptotic(n, tranche, float(f))
            contributions.append(
                {"state": i, "p": float(p), "f": float(f), "value": float(p) * a.value, "exponent_nats": a.exponent}
            )
        total = math.fsum(c["value"] for c in contributions)
        dom = dominant_state(states, tranche.alpha, n, tranche)
        return {
            "mode": "mixture",
            "n": n,
            "protection_value": total,
            "protection_log10": _log10(total),
            "spread": total / tranche.annuity,
            "spread_log10": _log10(total / tranche.annuity),
            "dominant_state": dom.index,
            "dominant_rate_nats": dom.rate,
            "dominant_approximation": dom.approximation,
            "states": contributions,
        }
    f = cfg.f_t_minus
    report = validate_assumptions(cfg.curve, tranche.alpha, tranche.t_expiry, n)
    prot = protection_leg_asymptotic(n, tranche, f)
    spread = spread_asymptotic(n, tranche, f)
    return {
        "mode": "homogeneous",
        "n": n,
        "f_t_minus": f,
        "protection_value": prot.value,
        "protection_log10": prot.log10_value,
        "spread": spread.value,
        "spread_log10": spread.log10_value,
        "exponent_nats": prot.exponent,
        "granularity": prot.granularity,
        "kappa": prot.kappa,
        "prefactor": prot.prefactor,
        "bracket": prot.bracket,
        "density_ok": report.density_ok,
        "chebychev_bound": report.chebychev_bound,
    }


# --- sweep ----------------------------------------------------------------------------


def sweep_rows(tranche: TrancheSpec, alphas: Sequence[float], f_t_minus: float, sizes: Iterable[int], quantity: str = "spread"):
    """One row per (alpha, N) in the sweep CSV layout."""
    if quantity not in ("spread", "star"):
        raise InvalidParameter(f"unknown sweep quantity {quantity!r}")
    sizes = list(sizes)
    rows = []
    for a in alphas:
        if not a < tranche.beta:
            raise InvalidParameter(f"sweep attachment {a!r} must lie below the detachment {tranche.beta!r}")
        tr = TrancheSpec(a, tranche.beta, tranche.t_expiry, tranche.payment_dates, tranche.riskless_rate)
        for n in sizes:
            if quantity == "spread":
                price = spread_asymptotic(n, tr, f_t_minus)
                log_value = price.log_value
            else:
                log_value = log_theoretical_price_star(n, a, f_t_minus)
            rows.append(
                {
                    "N": n,
                    "alpha": a,
                    "beta": tr.beta,
                    "f_t_minus": f_t_minus,
                    "granularity": granularity(n, a),
                    "exponent_nats": n * hbar(a, f_t_minus),
                    "value": math.exp(log_value),
                    "log10_value": log_value / math.log(10),
                }
            )
    return rows


def write_csv(rows, columns, stream) -> None:
    writer = csv.DictWriter(stream, fieldnames=columns, lineterminator="\n", extrasaction="ignore")
    writer.writeheader()
    for r in rows:
        writer.writerow({k: (repr(float(v)) if isinstance(v, float) else v) for k, v in r.items()})


# --- simulate -------------------------------------------------------------------------------


def simulate_report(cfg: RunConfig):
    """Per-path rows and a summary for the configured simulation."""
    tranche, n = cfg.tranche, cfg.n
    if cfg.mode == "tilted":
        _tilted_checks(cfg.curve, tranche, n)
    paths = simulate_paths(cfg.curve, tranche, n, cfg.n_paths, cfg.seed, cfg.mode)
    rows = [
        {"path": i, "defaults_before_T": int(k), "prot": float(p), "prem": float(q), "weight": float(w)}
        for i, (k, p, q, w) in enumerate(zip(paths.defaults_before_T, paths.prot, paths.prem, paths.weight))
    ]
    summary = {"mode": cfg.mode, "n": n, "n_paths": cfg.n_paths, "seed": cfg.seed, "f_t_minus": cfg.f_t_minus}
    if cfg.mode == "plain":
        price = price_from_paths(paths, cfg.seed)
        summary.update(
            protection=price.prot.to_json(),
            premium=price.prem.to_json(),
            spread=price.spread,
            spread_std_error=price.spread_std_error,
        )
    else:
        est = is_estimate(paths, cfg.seed)
        summary.update(
            protection=est.to_json(),
            tilted_fraction_before_T=float(paths.defaults_before_T.mean()) / n,
            diagnostics=diagnostics_from_paths(paths, tranche, n),
        )
    return rows, summary


# --- argument handling --------------------------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", required=True, help="JSON run configuration")
    p.add_argument("--n", type=int, help="override pool size")
    p.add_argument("--seed", type=int, help="override simulation seed")
    p.add_argument("--paths", type=int, help="override simulation path count")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="ldpcdo", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("price", help="asymptotic protection value and spread")
    _add_config_args(p)
    p.add_argument("--json", action="store_true", help="print the report as JSON")

    p = sub.add_parser("sweep", help="asymptotic prices over a range of pool sizes (CSV)")
    _add_config_args(p)
    p.add_argument("--n-from", type=int, required=True)
    p.add_argument("--n-to", type=int, required=True)
    p.add_argument("--n-step", type=int, default=1)
    p.add_argument("--alpha", type=float, action="append", help="attachment point; repeat for several")
    p.add_argument("--quantity", choices=["spread", "star"], default="spread",
                   help="full spread, or the normalized price without its rate-independent factor")
    p.add_argument("--output", help="CSV path (default stdout)")

    p = sub.add_parser("simulate", help="Monte Carlo run with per-path CSV and JSON summary")
    _add_config_args(p)
    p.add_argument("--csv", help="per-path CSV path (default: none)")
    p.add_argument("--summary", help="summary JSON path (default stdout)")

    p = sub.add_parser("verify", help="run the acceptance suite")
    p.add_argument("--level", choices=["quick", "full"], default="quick")
    p.add_argument("--json", help="write results as JSON to this path")

    p = sub.add_parser("calibrate", help="flat hazard from a CDS spread")
    p.add_argument("--spread", type=float, required=True)
    p.add_argument("--dates", default="quarterly", help="comma-separated payment dates or 'quarterly'")
    p.add_argument("--rate", type=float, default=0.0)
    p.add_argument("--t-expiry", type=float, required=True)
    p.add_argument("--output", help="write the curve block JSON to this path")
    return parser


def _print_price(report: dict, out) -> None:
    for key, value in report.items():
        if key == "states":
            for s in value:
                print(f"  state {s['state']}: p={s['p']:.6g} f={s['f']:.6g} contribution={s['value']:.6e}", file=out)
            continue
        if isinstance(value, float):
            print(f"{key}: {value:.10g}", file=out)
        else:
            print(f"{key}: {value}", file=out)


def _cmd_price(args, out) -> int:
    cfg = load_config(args.config, n=args.n, seed=args.seed, paths=args.paths)
    report = price_report(cfg)
    if args.json:
        json.dump(report, out, indent=2)
        out.write("\n")
    else:
        _print_price(report, out)
    return EXIT_OK


def _cmd_sweep(args, out) -> int:
    cfg = load_config(args.config, n=args.n, seed=args.seed, paths=args.paths)
    if args.n_from < 1 or args.n_to < args.n_from or args.n_step < 1:
        raise ConfigError("sweep range needs 1 ≤ --n-from ≤ --n-to and --n-step ≥ 1")
    alphas = args.alpha or [cfg.tranche.alpha]
    rows = sweep_rows(cfg.tranche, alphas, cfg.f_t_minus, range(args.n_from, args.n_to + 1, args.n_step), args.quantity)
    if args.output:
        with open(args.output, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, SWEEP_COLUMNS, fh)
    else:
        write_csv(rows, SWEEP_COLUMNS, out)
    return EXIT_OK


def _cmd_simulate(args, out) -> int:
    cfg = load_config(args.config, n=args.n, seed=args.seed, paths=args.paths)
    rows, summary = simulate_report(cfg)
    if args.csv:
        with open(args.csv, "w", encoding="utf-8", newline="") as fh:
            write_csv(rows, SIMULATE_COLUMNS, fh)
    text = json.dumps(summary, indent=2)
    if args.summary:
        with open(args.summary, "w", encoding="utf-8") as fh:
            fh.write(text + "\n")
    else:
        out.write(text + "\n")
    return EXIT_OK


def _cmd_verify(args, out) -> int:
    from . import acceptance

    results = []
    for number in acceptance.QUICK if args.level == "quick" else tuple(acceptance.CRITERIA):
        res = acceptance.run_criterion(number)
        results.append(res)
        print(res.line(), file=out, flush=True)
    payload = {"level": args.level, "criteria": [{"number": r.number, "title": r.title, "passed": r.passed,
                                                   "summary": r.summary, "seconds": r.seconds} for r in results]}
    if args.level == "full":
        table = acceptance.local_clt_report()
        print("local CLT scan (pmf·√(2πnα(1−α)) in the window 0 ≤ k−nα ≤ n^{1/4}):", file=out)
        for row in table:
            print(f"  n={row['n']:6d} k={row['k']:5d} s={row['s']:6.2f} ratio={row['ratio']:.6f}", file=out)
        payload["local_clt_scan"] = table
    failed = [r for r in results if not r.passed]
    if args.json:
        with open(args.json, "w", encoding="utf-8") as fh:
            json.dump(payload, fh, indent=2, default=float)
    if failed:
        names = ", ".join(f"{r.number} ({r.title})" for r in failed)
        print(f"verification failed: criterion {names}", file=out)
        return EXIT_VERIFY
    print(f"all {len(results)} criteria passed", file=out)
    return EXIT_OK


def _parse_dates(text: str, t_expiry: float) -> tuple:
    if text.strip() == "quarterly":
        return quarterly_dates(t_expiry)
    try:
        return tuple(float(x) for x in text.split(",") if x.strip())
    except ValueError:
        raise InvalidParameter(f"cannot parse payment dates {text!r}") from None


def _cmd_calibrate(args, out) -> int:
    dates = _parse_dates(args.dates, args.t_expiry)
    curve = calibrate_flat_hazard(args.spread, dates, args.rate, args.t_expiry)
    block = curve.to_json()
    # the flat rate is valid to expiry and beyond
    block["hazard"][0]["until"] = args.t_expiry
    result = {"lambda": curve.rates[0], "f_t_minus": float(curve.left_limit(args.t_expiry)), "curve": block}
    if args.output:
        with open(args.output, "w", encoding="utf-8") as fh:
            json.dump(block, fh, indent=2)
            fh.write("\n")
    json.dump(result, out, indent=2)
    out.write("\n")
    return EXIT_OK


COMMANDS = {
    "price": _cmd_price,
    "sweep": _cmd_sweep,
    "simulate": _cmd_simulate,
    "verify": _cmd_verify,
    "calibrate": _cmd_calibrate,
}


def main(argv: Optional[Sequence[str]] = None, out=None, err=None) -> int:
    out = sys.stdout if out is None else out
    err = sys.stderr if err is None else err
    args = build_parser().parse_args(argv)
    try:
        return COMMANDS[args.command](args, out)
    except (ConfigError, InvalidParameter, NoRoot, CombinatorialBlowup) as exc:
        print(f"error: {exc}", file=err)
        return EXIT_CONFIG
    except (AssumptionViolated, DegenerateCurve, UndefinedSpread, NonUniqueMinimizer) as exc:
        print(f"assumption violated: {exc}", file=err)
        return EXIT_ASSUMPTION


def run(argv: Sequence[str]) -> tuple[int, str, str]:
    """Call ``main`` and capture its output; convenient for tests."""
    out, err = io.StringIO(), io.StringIO()
    code = main(list(argv), out, err)
    return code, out.getvalue(), err.getvalue()


if __name__ == "__main__":
    sys.exit(main())
