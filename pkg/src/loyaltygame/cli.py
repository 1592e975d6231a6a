"""Command-line entry point: ``sweep``, ``verify`` and ``regions``."""

from __future__ import annotations

import argparse
import sys

from .errors import UnsupportedDistribution
from .experiment import ScenarioError, Setting, emit_outputs, load_scenario, run_sweep, verify_scenario
from .loyalty import Family, LoyaltyModel, MarketParams
from .single_stage import closed_form_equilibrium

EXIT_OK = 0
EXIT_VALIDATION = 1
EXIT_SOLVER = 2
EXIT_IO = 3


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="loyaltygame", description="Duopoly pricing under customer loyalty.")
    sub = parser.add_subparsers(dest="command", required=True)

    sweep = sub.add_parser("sweep", help="run a scenario sweep and write CSV + SVG charts")
    sweep.add_argument("scenario", help="scenario YAML file, or the name of a shipped scenario (e.g. fig2)")
    sweep.add_argument("--out", required=True, help="output directory")
    sweep.add_argument("--setting", help="override the setting, e.g. SingleStage or MyopicHorizon(20)")
    sweep.add_argument("--steps", type=int, help="override the number of sweep points")
    sweep.add_argument("--workers", type=int, default=1, help="worker processes (default 1)")

    verify = sub.add_parser("verify", help="run certificate checks for every point of a scenario")
    verify.add_argument("scenario")
    verify.add_argument("--steps", type=int, help="override the number of sweep points")

    regions = sub.add_parser("regions", help="classify one parameter point, e.g. c_A=1.4 c_B=0.4 l_alpha=1 ...")
    regions.add_argument("params", nargs="+", metavar="key=value")
    return parser


_REGION_KEYS = {"c_A", "c_B", "cost_gap", "l_alpha", "s_alpha", "l_beta", "s_beta", "theta0", "family"}


def params_from_pairs(pairs) -> MarketParams:
    """Build market parameters from ``key=value`` strings."""
    kv = {}
    for pair in pairs:
        key, sep, value = pair.partition("=")
        if not sep or key not in _REGION_KEYS:
            raise ScenarioError(f"expected key=value with key in {sorted(_REGION_KEYS)}, got {pair!r}")
        kv[key] = value
    family = Family(kv.pop("family", "linear"))
    num = {k: float(v) for k, v in kv.items()}
    defaults = {Family.MULTIPLICATIVE: {"s_alpha": 0.0, "s_beta": 0.0},
                Family.ADDITIVE: {"l_alpha": 1.0, "l_beta": 1.0}}.get(family, {})
    for k, v in defaults.items():
        num.setdefault(k, v)
    try:
        model = LoyaltyModel(num.pop("l_alpha"), num.pop("s_alpha"), num.pop("l_beta"), num.pop("s_beta"), family)
    except KeyError as exc:
        raise ScenarioError(f"missing parameter {exc}") from exc
    c_B = num.pop("c_B", 0.0)
    if "c_A" in num and "cost_gap" in num:
        raise ScenarioError("give either c_A or cost_gap, not both")
    c_A = num.pop("c_A", c_B + num.pop("cost_gap", 0.0))
    return MarketParams(c_A, c_B, model, num.pop("theta0", 0.5))


def _cmd_sweep(args) -> int:
    spec = load_scenario(args.scenario)
    setting = Setting.parse(args.setting, spec.setting.horizon) if args.setting else None
    spec = spec.with_overrides(setting=setting, steps=args.steps)
    result = run_sweep(spec, workers=args.workers)
    for path in emit_outputs(result, args.out):
        print(path)
    failed = result.failed
    for row in failed:
        print(f"point {row['sweep_value']:.6g}: {row['error']}", file=sys.stderr)
    return EXIT_SOLVER if failed else EXIT_OK


def _cmd_verify(args) -> int:
    spec = load_scenario(args.scenario).with_overrides(steps=args.steps)
    checks = verify_scenario(spec)
    for check in checks:
        print(check.line())
    passed = sum(c.passed for c in checks)
    print(f"{passed}/{len(checks)} checks passed")
    return EXIT_OK if passed == len(checks) else EXIT_SOLVER


def _cmd_regions(args) -> int:
    params = params_from_pairs(args.params)
    out = closed_form_equilibrium(params)
    p = out.prices
    print(f"region {out.region.label} (linear-loyalty region {out.region.canonical})")
    print(f"prices p_A_alpha={p.p_A_alpha:.12g} p_A_beta={p.p_A_beta:.12g} "
          f"p_B_beta={p.p_B_beta:.12g} p_B_alpha={p.p_B_alpha:.12g}")
    print(f"thresholds xi_alpha={out.xi_alpha:.12g} xi_beta={out.xi_beta:.12g}")
    print(f"profits A={out.profit_A:.12g} B={out.profit_B:.12g}")
    return EXIT_OK


def main(argv=None) -> int:
    args = _parser().parse_args(argv)
    handlers = {"sweep": _cmd_sweep, "verify": _cmd_verify, "regions": _cmd_regions}
    try:
        return handlers[args.command](args)
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_IO
    except (ScenarioError, UnsupportedDistribution, ValueError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except RuntimeError as exc:
        print(f"solver error: {exc}", file=sys.stderr)
        return EXIT_SOLVER


if __name__ == "__main__":
    sys.exit(main())
