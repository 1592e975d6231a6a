"""Scenario files, parameter sweeps, CSV tables and line charts."""

from __future__ import annotations

import csv
import io
import math
import re
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np
import yaml

from .errors import AssumptionViolated, NoConvergence
from .loyalty import Family, LoyaltyModel, MarketParams
from .markov import solve_markov
from .myopic import profit_series, trajectory_closed_form
from .qre import (build_discretized_game, default_schedule, markov_gap, modal_prices, stage_rewards,
                  trace_homotopy)
from .single_stage import closed_form_equilibrium

SCHEMA = "loyaltygame/scenario-v1"
SCENARIO_DIR = Path(__file__).with_name("scenarios")

COLUMNS = ("sweep_value", "region", "p_A_alpha", "p_A_beta", "p_B_beta", "p_B_alpha",
           "xi_alpha", "xi_beta", "prob_stay_alpha", "prob_stay_beta", "share_A",
           "profit_A", "profit_B", "error")
NUMERIC = tuple(c for c in COLUMNS if c not in ("region", "error"))

SWEEP_VARIABLES = ("cost_gap", "s_alpha", "s_beta", "l_alpha", "l_beta", "delta")
OUTPUT_GROUPS = ("prices", "shares", "profits", "probabilities", "region_labels")
SETTINGS = ("SingleStage", "MyopicHorizon", "MarkovUnconstrained", "MarkovQRE")


class ScenarioError(ValueError):
    """A scenario file or override does not validate."""


@dataclass(frozen=True)
class Setting:
    kind: str
    horizon: int | None = None

    def __post_init__(self) -> None:
        if self.kind not in SETTINGS:
            raise ScenarioError(f"unknown setting {self.kind!r}; expected one of {SETTINGS}")
        if self.kind == "MyopicHorizon" and (self.horizon is None or self.horizon < 1):
            raise ScenarioError("MyopicHorizon needs a positive horizon")

    @classmethod
    def parse(cls, text: str, horizon: int | None = None) -> "Setting":
        """Accepts ``"SingleStage"``, ``"MyopicHorizon(20)"`` and the like."""
        match = re.fullmatch(r"\s*(\w+)\s*(?:\(\s*(\d+)\s*\))?\s*", str(text))
        if not match:
            raise ScenarioError(f"cannot parse setting {text!r}")
        kind, t = match.groups()
        return cls(kind, int(t) if t is not None else horizon)

    def __str__(self) -> str:
        return f"{self.kind}({self.horizon})" if self.kind == "MyopicHorizon" else self.kind


@dataclass(frozen=True)
class QreOptions:
    grid_points: int = 101
    schedule_lo: float = 1e-2
    schedule_hi: float = 1e4
    schedule_steps: int = 80

    def schedule(self) -> np.ndarray:
        return default_schedule(self.schedule_lo, self.schedule_hi, self.schedule_steps)


@dataclass(frozen=True)
class SweepSpec:
    name: str
    base: MarketParams
    sweep_variable: str
    lo: float
    hi: float
    steps: int
    setting: Setting
    outputs: frozenset = frozenset(OUTPUT_GROUPS)
    qre: QreOptions = field(default_factory=QreOptions)
    description: str = ""

    def __post_init__(self) -> None:
        if self.sweep_variable not in SWEEP_VARIABLES:
            raise ScenarioError(f"sweep variable must be one of {SWEEP_VARIABLES}")
        if not self.lo < self.hi:
            raise ScenarioError("sweep range needs lo < hi")
        if self.steps < 2:
            raise ScenarioError("sweep needs at least 2 steps")
        unknown = set(self.outputs) - set(OUTPUT_GROUPS)
        if unknown:
            raise ScenarioError(f"unknown output groups {sorted(unknown)}")
        if self.sweep_variable == "cost_gap" and self.lo < 0:
            raise ScenarioError("a swept cost gap must keep c_A >= c_B")
        if self.setting.kind == "SingleStage" and not self.base.shock.is_uniform01:
            raise ScenarioError("SingleStage needs the uniform loyalty shock")
        # validates every point up front
        for v in self.values():
            point_params(self, float(v))

    def values(self) -> np.ndarray:
        return np.linspace(self.lo, self.hi, self.steps)

    def with_overrides(self, setting: Setting | None = None, steps: int | None = None) -> "SweepSpec":
        changes = {}
        if setting is not None:
            changes["setting"] = setting
        if steps is not None:
            changes["steps"] = int(steps)
        return replace(self, **changes) if changes else self


def point_params(spec: SweepSpec, value: float) -> MarketParams:
    base = spec.base
    var = spec.sweep_variable
    try:
        if var == "cost_gap":
            return base.with_cost_gap(value)
        if var == "delta":
            return base.replace(delta_A=value, delta_B=value)
        m = base.loyalty
        fields = {"l_alpha": m.l_alpha, "s_alpha": m.s_alpha, "l_beta": m.l_beta, "s_beta": m.s_beta}
        fields[var] = value
        return base.replace(loyalty=LoyaltyModel(**fields, family=m.family))
    except ValueError as exc:
        raise ScenarioError(f"{var}={value!r}: {exc}") from exc


# --------------------------------------------------------------------------- scenarios

def _model_from(doc: dict) -> LoyaltyModel:
    doc = dict(doc)
    family = Family(doc.pop("family", "linear"))
    if family is Family.MULTIPLICATIVE:
        model = LoyaltyModel.multiplicative(doc.pop("l_alpha"), doc.pop("l_beta"))
    elif family is Family.ADDITIVE:
        model = LoyaltyModel.additive(doc.pop("s_alpha"), doc.pop("s_beta"))
    else:
        model = LoyaltyModel.linear(doc.pop("l_alpha"), doc.pop("s_alpha"), doc.pop("l_beta"), doc.pop("s_beta"))
    if doc:
        raise ScenarioError(f"unexpected model keys {sorted(doc)}")
    return model


def spec_from_dict(doc: dict, name: str = "scenario") -> SweepSpec:
    if not isinstance(doc, dict):
        raise ScenarioError("scenario must be a mapping")
    if doc.get("schema") != SCHEMA:
        raise ScenarioError(f"scenario schema must be {SCHEMA!r}, got {doc.get('schema')!r}")
    try:
        model = _model_from(doc["model"])
        fixed = dict(doc.get("fixed", {}))
        c_B = float(fixed.pop("c_B", 0.0))
        if "c_A" in fixed and "cost_gap" in fixed:
            raise ScenarioError("give either c_A or cost_gap, not both")
        c_A = float(fixed.pop("c_A", c_B + float(fixed.pop("cost_gap", 0.0))))
        delta = fixed.pop("delta", None)
        delta_A = float(fixed.pop("delta_A", delta if delta is not None else 0.0))
        delta_B = float(fixed.pop("delta_B", delta if delta is not None else 0.0))
        theta0 = float(fixed.pop("theta0", 0.5))
        if fixed:
            raise ScenarioError(f"unexpected fixed keys {sorted(fixed)}")
        base = MarketParams(c_A, c_B, model, theta0, delta_A, delta_B)
        sweep = doc["sweep"]
        setting = Setting.parse(doc["setting"], doc.get("horizon"))
        qre_doc = dict(doc.get("qre", {}))
        qre = QreOptions(int(qre_doc.pop("grid_points", 101)), float(qre_doc.pop("schedule_lo", 1e-2)),
                         float(qre_doc.pop("schedule_hi", 1e4)), int(qre_doc.pop("schedule_steps", 80)))
        if qre_doc:
            raise ScenarioError(f"unexpected qre keys {sorted(qre_doc)}")
        outputs = frozenset(doc.get("outputs", OUTPUT_GROUPS) or ())
        return SweepSpec(str(doc.get("name", name)), base, sweep["variable"], float(sweep["lo"]),
                         float(sweep["hi"]), int(sweep["steps"]), setting, outputs, qre,
                         str(doc.get("description", "")))
    except KeyError as exc:
        raise ScenarioError(f"missing scenario key {exc}") from exc
    except (TypeError, ValueError) as exc:
        if isinstance(exc, ScenarioError):
            raise
        raise ScenarioError(str(exc)) from exc


def load_scenario(path) -> SweepSpec:
    """Read a YAML scenario; a bare name resolves to a shipped scenario."""
    path = Path(path)
    if not path.exists() and not path.suffix:
        shipped = SCENARIO_DIR / f"{path.name}.yaml"
        if shipped.exists():
            path = shipped
    with open(path, encoding="utf-8") as fh:
        try:
            doc = yaml.safe_load(fh)
        except yaml.YAMLError as exc:
            raise ScenarioError(f"{path}: {exc}") from exc
    return spec_from_dict(doc, path.stem)


def shipped_scenarios() -> list[Path]:
    return sorted(SCENARIO_DIR.glob("*.yaml"))


# --------------------------------------------------------------------------- sweeps

def _row(value: float, **cols) -> dict:
    row = {c: math.nan for c in NUMERIC}
    row.update(sweep_value=value, region="", error="")
    row.update(cols)
    return row


def _outcome_row(value: float, outcome, share: float, profit_A: float, profit_B: float) -> dict:
    p = outcome.prices
    return _row(value, region=outcome.region.label if outcome.region else "",
                p_A_alpha=p.p_A_alpha, p_A_beta=p.p_A_beta, p_B_beta=p.p_B_beta, p_B_alpha=p.p_B_alpha,
                xi_alpha=outcome.xi_alpha, xi_beta=outcome.xi_beta,
                prob_stay_alpha=outcome.prob_stay_alpha, prob_stay_beta=outcome.prob_stay_beta,
                share_A=share, profit_A=profit_A, profit_B=profit_B)


def _stationary_profits(params: MarketParams, prices, F_a: float, F_b: float, share: float):
    profit_A = share * (1 - F_a) * (prices.p_A_alpha - params.c_A) + (1 - share) * F_b * (prices.p_A_beta - params.c_A)
    profit_B = (1 - share) * (1 - F_b) * (prices.p_B_beta - params.c_B) + share * F_a * (prices.p_B_alpha - params.c_B)
    return profit_A, profit_B


def _myopic_row(params: MarketParams, value: float, horizon: int | None) -> dict:
    outcome = closed_form_equilibrium(params)
    if horizon is None:
        # stationary share and per-period profit in the long run
        traj = trajectory_closed_form(params, 1)
        share = traj.theta_infinity
        prof = _stationary_profits(params, outcome.prices, outcome.switch_alpha, outcome.switch_beta, share)
        return _outcome_row(value, outcome, share, *prof)
    traj = trajectory_closed_form(params, horizon)
    pa, pb = profit_series(params, traj)
    return _outcome_row(value, outcome, float(traj.theta_series[-1]), float(pa[-1]), float(pb[-1]))


def _markov_row(params: MarketParams, value: float) -> dict:
    if params.delta_A == 0.0 and params.delta_B == 0.0:
        return _myopic_row(params, value, None)
    sol = solve_markov(params)
    p = sol.prices
    F_a, F_b = float(params.shock.cdf(sol.xi_alpha)), float(params.shock.cdf(sol.xi_beta))
    profit_A, profit_B = _stationary_profits(params, p, F_a, F_b, sol.stationary_share)
    return _row(value, p_A_alpha=p.p_A_alpha, p_A_beta=p.p_A_beta, p_B_beta=p.p_B_beta, p_B_alpha=p.p_B_alpha,
                xi_alpha=sol.xi_alpha, xi_beta=sol.xi_beta, prob_stay_alpha=1 - F_a, prob_stay_beta=1 - F_b,
                share_A=sol.stationary_share, profit_A=profit_A, profit_B=profit_B)


def qre_point(params: MarketParams, options: QreOptions):
    game = build_discretized_game(params, options.grid_points)
    profile = trace_homotopy(game, options.schedule())
    return game, profile


def _qre_row(params: MarketParams, value: float, options: QreOptions) -> dict:
    game, profile = qre_point(params, options)
    p = modal_prices(game, profile)
    (rAa, rAb, rBb, rBa), stay_a, stay_b = stage_rewards(game, profile.distributions)
    F_a, F_b = 1.0 - stay_a, 1.0 - stay_b
    share = F_b / (F_a + F_b) if F_a + F_b > 0 else params.theta0
    m = params.loyalty
    return _row(value, p_A_alpha=p.p_A_alpha, p_A_beta=p.p_A_beta, p_B_beta=p.p_B_beta, p_B_alpha=p.p_B_alpha,
                xi_alpha=m.inverse("alpha", p.p_A_alpha - p.p_B_alpha),
                xi_beta=m.inverse("beta", p.p_B_beta - p.p_A_beta),
                prob_stay_alpha=stay_a, prob_stay_beta=stay_b, share_A=share,
                profit_A=share * rAa + (1 - share) * rAb, profit_B=(1 - share) * rBb + share * rBa)


def evaluate_point(spec: SweepSpec, value: float) -> dict:
    """One table row; solver failures are recorded in the error column."""
    try:
        params = point_params(spec, value)
        kind = spec.setting.kind
        if kind == "SingleStage":
            out = closed_form_equilibrium(params)
            return _outcome_row(value, out, out.share_A, out.profit_A, out.profit_B)
        if kind == "MyopicHorizon":
            return _myopic_row(params, value, spec.setting.horizon)
        if kind == "MarkovUnconstrained":
            return _markov_row(params, value)
        return _qre_row(params, value, spec.qre)
    except AssumptionViolated as exc:
        return _row(value, error=f"assumption-violated: {exc}")
    except NoConvergence as exc:
        return _row(value, error=f"no-convergence: {exc}")
    except ValueError as exc:
        return _row(value, error=f"{type(exc).__name__}: {exc}")


@dataclass(frozen=True)
class SweepResult:
    spec: SweepSpec
    rows: tuple

    def column(self, name: str) -> np.ndarray:
        if name in NUMERIC:
            return np.array([r[name] for r in self.rows], dtype=float)
        return np.array([r[name] for r in self.rows], dtype=object)

    @property
    def failed(self) -> list[dict]:
        return [r for r in self.rows if r["error"]]


def _evaluate_star(args):
    return evaluate_point(*args)


def run_sweep(spec: SweepSpec, workers: int = 1) -> SweepResult:
    """Evaluate every sweep point (optionally in worker processes), in sweep order."""
    jobs = [(spec, float(v)) for v in spec.values()]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            rows = list(pool.map(_evaluate_star, jobs))
    else:
        rows = [_evaluate_star(j) for j in jobs]
    return SweepResult(spec, tuple(rows))


# --------------------------------------------------------------------------- output

def _fmt(value) -> str:
    if isinstance(value, str):
        return value
    value = float(value)
    if math.isnan(value):
        return ""
    out = format(value, ".12g")
    return "0" if out == "-0" else out


def table_csv(result: SweepResult) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(COLUMNS)
    for row in result.rows:
        writer.writerow([_fmt(row[c]) for c in COLUMNS])
    return buf.getvalue()


CHARTS = {
    "prices": (("prices_alpha", "price (alpha sub-market)", ("p_A_alpha", "p_B_alpha")),
               ("prices_beta", "price (beta sub-market)", ("p_B_beta", "p_A_beta"))),
    "shares": (("shares", "market share", ("share_A", "share_B")),),
    "profits": (("profits", "profit per period", ("profit_A", "profit_B")),),
    "probabilities": (("probabilities", "purchase probability", ("prob_stay_alpha", "prob_stay_beta")),),
}


def _series(result: SweepResult, name: str) -> np.ndarray:
    if name == "share_B":
        return 1.0 - result.column("share_A")
    return result.column(name)


def _chart(result: SweepResult, path: Path, ylabel: str, series) -> None:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    matplotlib.rcParams["svg.hashsalt"] = "loyaltygame"
    x = result.column("sweep_value")
    fig, ax = plt.subplots(figsize=(5, 3.6))
    for name in series:
        ax.plot(x, _series(result, name), marker=".", label=name)
    ax.set_xlabel(result.spec.sweep_variable)
    ax.set_ylabel(ylabel)
    ax.set_title(f"{result.spec.name}: {result.spec.setting}")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, format="svg", metadata={"Date": None})
    plt.close(fig)


def emit_outputs(result: SweepResult, out_dir, outputs=None) -> list[Path]:
    """Write ``{name}.csv`` plus one SVG chart per requested output group."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    outputs = result.spec.outputs if outputs is None else frozenset(outputs)
    name = result.spec.name
    csv_path = out_dir / f"{name}.csv"
    csv_path.write_text(table_csv(result), encoding="utf-8")
    written = [csv_path]
    for group in OUTPUT_GROUPS:
        if group not in outputs or group not in CHARTS:
            continue
        for suffix, ylabel, series in CHARTS[group]:
            path = out_dir / f"{name}_{suffix}.svg"
            _chart(result, path, ylabel, series)
            written.append(path)
    return written


# --------------------------------------------------------------------------- verification

@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str = ""

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'} {self.name}" + (f": {self.detail}" if self.detail else "")


def verify_scenario(spec: SweepSpec) -> list[Check]:
    """Certificate checks for every point of a scenario."""
    from .markov import bellman_residual, price_from_thresholds
    from .myopic import trajectory_recursion
    from .single_stage import best_response_gap

    def br_gap(params, prices):
        m = params.loyalty
        top = params.c_A + max(m.s_alpha, m.s_beta) + 2 * max(m.l_alpha, m.l_beta) + 1
        return best_response_gap(params, prices, 1e-3, params.c_B, top)

    checks = []
    kind = spec.setting.kind
    for v in spec.values():
        v = float(v)
        params = point_params(spec, v)
        tag = f"{spec.sweep_variable}={v:.6g}"
        try:
            if kind == "SingleStage":
                out = closed_form_equilibrium(params)
                gap = br_gap(params, out.prices)
                checks.append(Check(f"{tag} best-response gap", gap <= 2e-3, f"{gap:.3g} (region {out.region})"))
            elif kind == "MyopicHorizon":
                a = trajectory_closed_form(params, spec.setting.horizon).theta_series
                b = trajectory_recursion(params, spec.setting.horizon).theta_series
                err = float(np.max(np.abs(a - b)))
                checks.append(Check(f"{tag} closed form vs recursion", err <= 1e-12, f"{err:.3g}"))
            elif kind == "MarkovUnconstrained":
                if params.delta_A == 0.0:
                    out = closed_form_equilibrium(params)
                    gap = br_gap(params, out.prices)
                    checks.append(Check(f"{tag} best-response gap", gap <= 2e-3, f"{gap:.3g}"))
                    continue
                sol = solve_markov(params)
                again = price_from_thresholds(params, sol.xi_alpha, sol.xi_beta, sol.value_gaps)
                drift = max(abs(a - b) for a, b in zip(again.as_tuple(), sol.prices.as_tuple()))
                bell = bellman_residual(params, sol.prices, sol.values)
                ok = sol.residual_norm <= 1e-10 and drift <= 1e-10 and bell <= 1e-10
                checks.append(Check(f"{tag} Markov fixed point", ok,
                                    f"residual {sol.residual_norm:.3g}, price drift {drift:.3g}, Bellman {bell:.3g}"))
            else:
                game, profile = qre_point(params, spec.qre)
                g = markov_gap(game, profile)
                checks.append(Check(f"{tag} QRE Markov gap", g <= 1e-3, f"{g:.3g}"))
        except (ValueError, RuntimeError) as exc:
            checks.append(Check(f"{tag} solver", False, f"{type(exc).__name__}: {exc}"))
    return checks
