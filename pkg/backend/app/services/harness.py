"""
Harness Service - config-driven experiments that compare finite-t
simulations with their limit laws and write the comparison as CSV.

Replication i of every experiment draws from StreamSeed(seed, i); limit-law
banks and calibration use reserved stream indices. Results are aggregated in
replication order, so a run is byte-for-byte reproducible from its seed and
independent of the worker count.
"""

import json
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
import pandas as pd
from pydantic import ValidationError

from app import settings
from app.schemas import RESULT_COLUMNS, TIMING_COLUMNS, ExperimentConfig, ResultRow
from app.services import ctrw, limits, pointproc, renewal, stats, subord
from app.services.errors import ConfigError, InsufficientDataError, PrecisionError, ResourceCapError
from app.services.model import JointModel, build_model, joint_sample
from app.services.parallel import run_indexed
from app.services.rng import Distribution, hitting_time_mean, make_stream

logger = logging.getLogger(__name__)

CALIBRATION_STREAM = settings.BANK_STREAM_OFFSET + 2**41
DIAGNOSTIC_STREAM = settings.BANK_STREAM_OFFSET + 2**42
# the step-fidelity twin of replication i uses stream index i + STEP_STREAM
STEP_STREAM = 2**32
EQUIVALENCE_QUANTILES = (0.5, 0.9, 0.99)
ROUTE_GRID = tuple(np.linspace(0.05, 0.95, 20))
QQ_LEVELS = tuple(np.round(np.arange(1, 100) / 100.0, 2))
PLOT_GRID_POINTS = 2000


# --- Config loading ---

def load_config(path: Union[str, Path]) -> ExperimentConfig:
    """Parse a JSON config file; syntax and field errors become ConfigError."""
    path = Path(path)
    try:
        raw = json.loads(path.read_text())
    except FileNotFoundError:
        raise ConfigError(f"Config file not found: {path}")
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON", [f"line {exc.lineno}, column {exc.colno}: {exc.msg}"])
    return parse_config(raw, source=str(path))


def parse_config(raw: Any, source: str = "config") -> ExperimentConfig:
    try:
        return ExperimentConfig.model_validate(raw)
    except ValidationError as exc:
        diagnostics = [f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in exc.errors()]
        raise ConfigError(f"{source}: invalid experiment configuration", diagnostics)


def apply_overrides(config: ExperimentConfig, **updates) -> ExperimentConfig:
    """Apply CLI overrides (None means keep) and re-validate."""
    updates = {k: v for k, v in updates.items() if v is not None}
    if not updates:
        return config
    return parse_config(config.model_copy(update=updates).model_dump(mode="json"), source="overrides")


# --- Replications ---

@dataclass(frozen=True)
class RepSpec:
    """Everything a worker needs to run replications at one horizon."""
    kind: str
    t: float
    seed: int
    model: Optional[JointModel] = None
    wait: Optional[Distribution] = None
    k: int = 2
    fidelity: str = "cycle"
    a_t: Optional[float] = None
    b_t: Optional[float] = None
    thresholds: Tuple[float, ...] = ()
    x0: float = 0.0


def _normalize(value: float, spec: RepSpec) -> float:
    return (value - spec.b_t) / spec.a_t


def _rep_renewal(spec: RepSpec, i: int) -> Dict[str, Any]:
    path = renewal.simulate_until(spec.model, spec.t, make_stream(spec.seed, i))
    return {"value": renewal.scaled_count(path), "violations": renewal.check_identities(path)}


def _rep_points(spec: RepSpec, i: int) -> Dict[str, Any]:
    path = renewal.simulate_until(spec.model, spec.t, make_stream(spec.seed, i))
    closed = pointproc.extract(path, spec.model, "closed")
    opened = pointproc.extract(path, spec.model, "open")
    violations = renewal.check_identities(path)
    violations += pointproc.max_equivalence_violations(closed, spec.thresholds)
    violations += int(len(closed) != path.tau or len(closed) - len(opened) != 1)
    return {
        "max": pointproc.kth_max(closed, 1),
        "kth": pointproc.kth_max(closed, spec.k),
        "first": pointproc.kth_max(closed, 1),
        "second": pointproc.kth_max(closed, 2),
        "count": pointproc.count_exceed(closed, spec.x0),
        "times": pointproc.exceedance_times(closed, spec.x0),
        "violations": violations,
    }


def _ctrw_violations(summary: ctrw.CtrwPathSummary) -> int:
    t = summary.horizon
    checks = [
        summary.tau >= 1,
        summary.a_end[-1] > t,
        summary.previous_return <= t,
        summary.m_tau_minus <= summary.q <= summary.m_tau,
        bool(np.all(summary.y == summary.x + summary.r)),
        bool(np.all(summary.r > 0)),
        bool(np.all(summary.k % 2 == 0)) and bool(np.all(summary.k >= 2)),
        summary.q == float(np.max(ctrw.sojourn_set(summary))),
    ]
    failed = sum(1 for ok in checks if not ok)
    if failed:
        logger.error(f"CTRW identity violations on path with tau={summary.tau}: {failed}")
    return failed


def _top_two(values: np.ndarray) -> Tuple[float, float]:
    if values.size == 1:
        return float(values[0]), -math.inf
    top = np.partition(values, values.size - 2)[-2:]
    return float(top[1]), float(top[0])


def _rep_ctrw(spec: RepSpec, i: int) -> Dict[str, Any]:
    primary = "step" if spec.fidelity == "step" else "cycle"
    summary = ctrw.simulate_cycles(spec.wait, spec.t, make_stream(spec.seed, i), primary)
    out: Dict[str, Any] = {
        "tau": summary.tau,
        "q_raw": summary.q,
        "excursion": summary.longest_excursion / spec.t,
        "violations": _ctrw_violations(summary),
    }
    if spec.a_t is not None:
        out["q"] = _normalize(summary.q, spec)
        first, second = _top_two(ctrw.sojourn_set(summary))
        out["first"] = _normalize(first, spec)
        out["second"] = _normalize(second, spec) if math.isfinite(second) else -math.inf
    if spec.fidelity == "both":
        twin = ctrw.simulate_cycles(spec.wait, spec.t, make_stream(spec.seed, i + STEP_STREAM), "step")
        out["tau_step"] = twin.tau
        out["q_raw_step"] = twin.q
        out["violations"] += _ctrw_violations(twin)
    return out


def _rep_full_dependence(spec: RepSpec, i: int) -> Dict[str, Any]:
    path = renewal.simulate_until(spec.model, spec.t, make_stream(spec.seed, i))
    largest = float(np.max(path.x[:-1])) if path.tau > 1 else 0.0
    return {"value": largest / spec.t, "violations": renewal.check_identities(path)}


_REPLICATORS: Dict[str, Callable[[RepSpec, int], Dict[str, Any]]] = {
    "renewal_count": _rep_renewal,
    "max_limit": _rep_points,
    "kth_order": _rep_points,
    "ctrw_two_largest": _rep_points,
    "ctrw_sojourn": _rep_ctrw,
    "ctrw_excursion": _rep_ctrw,
    "full_dependence_max": _rep_full_dependence,
}


def _replicate_chunk(start: int, stop: int, spec: RepSpec) -> List[Optional[Dict[str, Any]]]:
    kind = spec.kind
    if kind == "ctrw_two_largest" and spec.model is None:
        kind = "ctrw_sojourn"
    fn = _REPLICATORS[kind]
    out: List[Optional[Dict[str, Any]]] = []
    for i in range(start, stop):
        try:
            out.append(fn(spec, i))
        except ResourceCapError as exc:
            logger.error(f"Replication {i} at t={spec.t} hit a resource cap: {exc}")
            out.append(None)
    return out


# --- Experiment state ---

@dataclass
class Comparison:
    """An empirical bank and the law (or bank) it was compared against."""
    kind: str
    t: float
    statistic: str
    bank: stats.EcdfBank
    law: limits.LimitLaw


@dataclass
class RunResult:
    rows: List[ResultRow] = field(default_factory=list)
    comparisons: List[Comparison] = field(default_factory=list)

    @property
    def all_passed(self) -> bool:
        return all(row.passed for row in self.rows)


class Experiment:
    """Runs one ExperimentConfig across its horizons."""

    def __init__(self, config: ExperimentConfig, workers: Optional[int] = None):
        self.config = config
        self.kind = config.kind.value
        self.workers = settings.WORKERS if workers is None else workers
        self.tol = config.tolerances
        self.result = RunResult()
        self._w_bank: Optional[stats.EcdfBank] = None
        self._v_banks: Dict[str, stats.EcdfBank] = {}
        self._model: Optional[JointModel] = None

    # --- shared resources ---

    @property
    def alpha(self) -> float:
        return 0.5 if self.config.model.dependence == "ctrw_cycle" else self.config.model.alpha

    @property
    def model(self) -> JointModel:
        if self._model is None:
            stream = make_stream(self.config.seed, CALIBRATION_STREAM)
            self._model = build_model(self.config.model, stream, self.config.t_grid)
            inter = self._model.inter
            if inter.calibration.route == "empirical":
                lo, hi = inter.d.domain
                ns = np.geomspace(max(lo, 1e3), hi, 5) if hi > 1e3 else np.array([hi])
                worst = float(np.max(np.abs(inter.normalization_ratio(ns) - 1.0)))
                self.add_row(0.0, inter.calibration.sample_size, "normalizer_check", worst, 0.0, math.nan, worst <= 0.1)
        return self._model

    @property
    def w_bank(self) -> stats.EcdfBank:
        if self._w_bank is None:
            size = self.config.w_bank_size or settings.W_BANK_SIZE
            self._w_bank = limits.hitting_time_bank(self.alpha, size, self.config.seed)
        return self._w_bank

    def v_bank(self, method: str) -> stats.EcdfBank:
        if method not in self._v_banks:
            size = self.config.v_bank_size or settings.V_BANK_SIZE
            seed = (self.config.seed + (1 if method == "thinning" else 0)) % 2**64
            self._v_banks[method] = subord.largest_jump_law(
                self.alpha, size, seed, self.config.subord_tol, method, self.workers,
            )
        return self._v_banks[method]

    def max_law(self, route: str = "monte_carlo") -> limits.LimitLaw:
        return limits.max_limit_law(self.model.mda, self.alpha, route, self.w_bank)

    # --- rows ---

    def add_row(self, t: float, n: int, statistic: str, empirical: float, limit: float, ks: float, passed: bool, wall: float = 0.0) -> None:
        dkw = stats.dkw_epsilon(max(n, 1), self.tol.dkw_delta)
        self.result.rows.append(ResultRow(
            kind=self.kind, t=t, reps=n, statistic=statistic, empirical=empirical,
            limit=limit, ks=ks, dkw_eps=dkw, passed=bool(passed), wall_time=wall,
        ))

    def compare(self, t: float, statistic: str, values: Sequence[float], law, threshold: float, wall: float) -> float:
        """KS row of an empirical sample against a LimitLaw or another bank.

        The empirical and limit columns carry the two medians.
        """
        bank = stats.EcdfBank.from_samples(values, kind=self.kind, t=t, seed=self.config.seed)
        if isinstance(law, stats.EcdfBank):
            law = limits.bank_law(law, statistic, (-math.inf, math.inf))
        ks = stats.ks_distance(bank, law.bank if law.route == "bank" else law)
        self.add_row(t, bank.n, statistic, bank.quantile(0.5), law.quantile(0.5), ks, ks <= threshold, wall)
        self.result.comparisons.append(Comparison(self.kind, t, statistic, bank, law))
        return ks

    # --- orchestration ---

    def spec_for(self, t: float) -> RepSpec:
        config = self.config
        kind = self.kind
        if kind in ("ctrw_sojourn", "ctrw_excursion") or (kind == "ctrw_two_largest" and config.model.dependence == "ctrw_cycle"):
            wait = config.model.observation.to_distribution()
            a_t = b_t = None
            if wait.kind != "deterministic" and kind != "ctrw_excursion":
                a_t, b_t = self.model.a_tilde(t), self.model.b_tilde(t)
            return RepSpec(kind=kind, t=t, seed=config.seed, wait=wait, fidelity=config.fidelity, a_t=a_t, b_t=b_t)
        if kind in ("max_limit", "kth_order", "ctrw_two_largest"):
            law = self.max_law()
            thresholds = tuple(law.quantile(p) for p in EQUIVALENCE_QUANTILES)
            return RepSpec(kind=kind, t=t, seed=config.seed, model=self.model, k=config.k, thresholds=thresholds, x0=thresholds[0])
        return RepSpec(kind=kind, t=t, seed=config.seed, model=self.model)

    def run(self) -> RunResult:
        config = self.config
        logger.info(f"Running {self.kind}: t_grid={config.t_grid}, reps={config.reps}, seed={config.seed}")
        if config.diagnostics:
            self.run_diagnostics()
        if self.kind == "ctrw_excursion":
            self.compare_v_banks()
        for t in config.t_grid:
            started = time.perf_counter()
            spec = self.spec_for(t)
            results = run_indexed(_replicate_chunk, config.reps, self.workers, spec)
            ok = [r for r in results if r is not None]
            failures = len(results) - len(ok)
            if ok:
                getattr(self, f"aggregate_{self.kind}")(t, spec, ok, time.perf_counter() - started)
            violations = sum(r["violations"] for r in ok)
            self.add_row(t, len(ok), "identity_violations", violations, 0.0, math.nan, violations == 0)
            if failures:
                logger.error(f"{self.kind} t={t}: {failures} replications hit resource caps")
                self.add_row(t, len(ok), "resource_cap_failures", failures, 0.0, math.nan, False)
        if self.kind == "renewal_count":
            self.add_ks_trend()
        passed = sum(row.passed for row in self.result.rows)
        logger.info(f"{self.kind}: {passed}/{len(self.result.rows)} rows passed")
        return self.result

    # --- aggregators ---

    def aggregate_renewal_count(self, t, spec, ok, wall) -> None:
        values = [r["value"] for r in ok]
        law = limits.hitting_time_law(self.w_bank)
        # earlier horizons are judged by the ks_trend row
        threshold = self.tol.ks if t == self.config.t_grid[-1] else math.inf
        self.compare(t, "tau_scaled", values, law, threshold, wall)

    def add_ks_trend(self) -> None:
        ks = [row.ks for row in self.result.rows if row.statistic == "tau_scaled"]
        if len(ks) < 2:
            return
        worst = max(b - a for a, b in zip(ks, ks[1:]))
        t_last = self.config.t_grid[-1]
        self.add_row(t_last, self.config.reps, "ks_trend", worst, self.tol.ks_trend_slack, worst, worst <= self.tol.ks_trend_slack)

    def _point_rows(self, t, spec, ok) -> None:
        """Point-count intensity and time homogeneity above the median threshold."""
        counts = np.array([r["count"] for r in ok], dtype=float)
        expected = hitting_time_mean(self.alpha) * float(self.model.mda.big_lambda(spec.x0))
        se = counts.std() / math.sqrt(counts.size)
        gap = abs(counts.mean() - expected)
        self.add_row(t, len(ok), "count_above_median", float(counts.mean()), expected, gap, gap <= self.tol.route_se * se)
        times = np.concatenate([r["times"] for r in ok])
        try:
            p = stats.chi2_uniformity_pvalue(times)
            self.add_row(t, len(ok), "time_uniformity", p, self.tol.uniformity_p, math.nan, p >= self.tol.uniformity_p)
        except InsufficientDataError as exc:
            logger.warning(f"Skipping time uniformity at t={t}: {exc}")

    def aggregate_max_limit(self, t, spec, ok, wall) -> None:
        law = self.max_law()
        values = [r["max"] for r in ok]
        self.compare(t, "max", values, law, self.tol.ks, wall)
        self._point_rows(t, spec, ok)
        self.add_route_agreement(t)

    def add_route_agreement(self, t: float) -> None:
        mc = self.max_law("monte_carlo")
        series = self.max_law("series")
        gaps, ses = [], []
        skipped = 0
        for p in ROUTE_GRID:
            x = mc.quantile(p)
            try:
                exact = series.evaluate(x)
            except PrecisionError:
                skipped += 1
                continue
            gaps.append(abs(exact - mc.evaluate(x)))
            ses.append(max(mc.error_estimate(x), 1e-15))
        if skipped:
            logger.warning(f"{self.kind} t={t}: series route out of range at {skipped} of {len(ROUTE_GRID)} grid points")
        if not gaps:
            self.add_row(t, self.w_bank.n, "route_agreement", math.nan, self.tol.route_se, math.nan, False)
            return
        worst = float(np.max(np.asarray(gaps) / np.asarray(ses)))
        self.add_row(t, self.w_bank.n, "route_agreement", worst, self.tol.route_se, float(max(gaps)), worst <= self.tol.route_se)

    def aggregate_kth_order(self, t, spec, ok, wall) -> None:
        k = self.config.k
        law = limits.kth_order_law(self.model.mda, self.alpha, k, self.w_bank)
        values = [r["kth"] for r in ok]
        self.compare(t, f"kth_{k}", values, law, self.tol.ks, wall)
        xs = spec.thresholds
        k1 = limits.kth_order_law(self.model.mda, self.alpha, 1, self.w_bank).evaluate(xs)
        same = bool(np.array_equal(k1, self.max_law().evaluate(xs)))
        self.add_row(t, self.w_bank.n, "k1_reduces_to_max", float(same), 1.0, math.nan, same)
        self._point_rows(t, spec, ok)

    def aggregate_ctrw_two_largest(self, t, spec, ok, wall) -> None:
        first = np.array([r["first"] for r in ok])
        second = np.array([r["second"] for r in ok])
        law = self.max_law()
        mda = self.model.mda
        for p1, p2 in self.config.quantile_pairs:
            u1, u2 = law.quantile(p1), law.quantile(p2)
            joint = float(np.mean((first <= u1) & (second <= u2)))
            mc = limits.two_largest_limit(self.alpha, mda, u1, u2, "monte_carlo", self.w_bank)
            name = f"two_largest_p{p1:g}_p{p2:g}"
            gap = abs(joint - mc)
            self.add_row(t, len(ok), name, joint, mc, gap, gap <= self.tol.joint_abs, wall)
            mc_value, se = limits.two_largest_estimate(self.alpha, mda, u1, u2, "monte_carlo", self.w_bank)
            series = limits.two_largest_limit(self.alpha, mda, u1, u2, "series")
            z = abs(series - mc_value) / max(se, 1e-15)
            self.add_row(t, self.w_bank.n, f"{name}_routes", series, mc_value, z, z <= self.tol.route_se)

    def aggregate_ctrw_sojourn(self, t, spec, ok, wall) -> None:
        if self.config.limit_check and self.config.fidelity != "step":
            law = self.max_law()
            self.compare(t, "q", [r["q"] for r in ok], law, self.tol.ks, wall)
        if self.config.fidelity == "both":
            for name in ("tau", "q_raw"):
                cycle = stats.EcdfBank.from_samples([r[name] for r in ok])
                step = stats.EcdfBank.from_samples([r[f"{name}_step"] for r in ok])
                self.compare(t, f"{name}_fidelity", cycle.values, step, self.tol.ks, wall)

    def compare_v_banks(self) -> None:
        series, thinning = self.v_bank("series"), self.v_bank("thinning")
        inside = min(float(np.mean((b.values > 0) & (b.values < 1))) for b in (series, thinning))
        self.add_row(0.0, series.n, "v_support", inside, 1.0, math.nan, inside == 1.0)
        # redrawn realizations shift the bank ECDF by at most their fraction
        redrawn = max(b.provenance.get("retries", 0) / b.n for b in (series, thinning))
        self.add_row(0.0, series.n, "v_bank_retries", redrawn, 0.0, math.nan, redrawn <= stats.dkw_epsilon(series.n, self.tol.dkw_delta))
        self.compare(0.0, "v_series_vs_thinning", series.values, thinning, self.tol.ks, 0.0)

    def aggregate_ctrw_excursion(self, t, spec, ok, wall) -> None:
        values = [r["excursion"] for r in ok]
        for method in ("series", "thinning"):
            bank = self.v_bank(method)
            law = limits.excursion_limit_cdf(bank=bank, alpha=self.alpha)
            self.compare(t, f"excursion_vs_{method}", values, law, self.tol.ks, wall)

    def aggregate_full_dependence_max(self, t, spec, ok, wall) -> None:
        bank = self.v_bank("series")
        law = limits.excursion_limit_cdf(bank=bank, alpha=self.alpha)
        self.compare(t, "max_open_over_t", [r["value"] for r in ok], law, self.tol.ks, wall)

    # --- tail diagnostics ---

    def run_diagnostics(self) -> None:
        """Tail-dependence and regular-variation checks on iid (X, Y) pairs."""
        config = self.config
        n = config.diagnostic_samples
        stream = make_stream(config.seed, DIAGNOSTIC_STREAM)
        mode = config.model.dependence
        if mode != "ctrw_cycle":
            x, y = joint_sample(self.model, stream, n)
            q = config.tail_q or 0.99
            est = stats.tail_dependence_estimate(x, y, q)
            passed = est == 1.0 if mode == "identical" else est <= 0.05
            self.add_row(0.0, n, "tail_dependence_XY", est, 1.0 if mode == "identical" else 0.0, math.nan, passed)
            return

        wait = config.model.observation.to_distribution()
        chunk = 10**6
        parts = [ctrw.sample_cycles(wait, stream, min(chunk, n - s)) for s in range(0, n, chunk)]
        x = np.concatenate([p.x for p in parts])
        k = np.concatenate([p.k for p in parts])
        r = np.concatenate([p.r for p in parts])
        y = x + r
        q = config.tail_q or 0.999
        est = stats.tail_dependence_estimate(r, y, q)
        self.add_row(0.0, n, "tail_dependence_RY", est, 1.0, math.nan, est >= 0.9)

        hill = stats.hill_estimate(y, max(100, n // 1000))
        self.add_row(0.0, n, "hill_index_Y", hill, 0.5, abs(hill - 0.5), 0.45 <= hill <= 0.55)

        if wait.kind != "deterministic":
            curve = stats.conditional_exceedance_curve(x, y, 0.99, EQUIVALENCE_QUANTILES)
            ok = bool(np.all(np.diff(curve) <= 0.0)) and curve[-1] <= 0.1
            self.add_row(0.0, n, "x_given_y_exceedance", float(curve[-1]), 0.1, math.nan, ok)

        levels = np.geomspace(1e2, 1e4, 5)
        ratios = np.array([np.mean(r > u) / ctrw.first_return_tail(int(u // 2)) for u in levels])
        spread = float(ratios.max() / ratios.min() - 1.0)
        self.add_row(0.0, n, "excursion_tail_ratio", float(ratios.mean()), math.nan, spread, spread <= 0.15)
        logger.info(f"Diagnostics: tail dependence {est:.4f}, Hill {hill:.4f}, ratio spread {spread:.3f}")


# --- Public API ---

def run(config: ExperimentConfig, workers: Optional[int] = None, write: bool = True) -> RunResult:
    """Run one experiment; optionally write its CSV artifacts under config.out."""
    result = Experiment(config, workers).run()
    result.rows.sort(key=lambda row: (row.kind, row.t))
    if write:
        out = Path(config.out)
        write_results(result.rows, out)
        emit_plot_data(result.comparisons, out / "plots")
    return result


def write_results(rows: Sequence[ResultRow], out: Union[str, Path]) -> Path:
    """results.csv (deterministic) and timings.csv (wall clock)."""
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    frame = pd.DataFrame([row.model_dump() for row in rows], columns=RESULT_COLUMNS + ["wall_time"])
    path = out / "results.csv"
    frame[RESULT_COLUMNS].to_csv(path, index=False, float_format="%.12g", lineterminator="\n")
    frame[TIMING_COLUMNS].to_csv(out / "timings.csv", index=False, float_format="%.6g", lineterminator="\n")
    return path


def read_results(out: Union[str, Path]) -> pd.DataFrame:
    return pd.read_csv(Path(out) / "results.csv")


def _plot_grid(bank: stats.EcdfBank) -> np.ndarray:
    grid = stats.law_grid(bank, PLOT_GRID_POINTS)
    return grid[np.isfinite(grid)]


def emit_plot_data(comparisons: Sequence[Comparison], out: Union[str, Path]) -> List[Path]:
    """ecdf.csv, limit.csv and qq.csv per comparison."""
    written = []
    for comp in comparisons:
        folder = Path(out) / f"{comp.kind}_t{comp.t:g}_{comp.statistic}"
        folder.mkdir(parents=True, exist_ok=True)
        grid = _plot_grid(comp.bank)
        opts = dict(index=False, float_format="%.12g", lineterminator="\n")
        pd.DataFrame({"x": grid, "F_emp": comp.bank.evaluate(grid)}).to_csv(folder / "ecdf.csv", **opts)
        pd.DataFrame({
            "x": grid,
            "F_limit": comp.law.evaluate(grid),
            "err": comp.law.error_estimate(grid),
        }).to_csv(folder / "limit.csv", **opts)
        levels = np.asarray(QQ_LEVELS)
        pd.DataFrame({
            "p": levels,
            "q_emp": comp.bank.quantile(levels),
            "q_limit": [comp.law.quantile(float(p)) for p in levels],
        }).to_csv(folder / "qq.csv", **opts)
        written.append(folder)
    return written


def export_limit_grid(config: ExperimentConfig, out: Union[str, Path], points: int = 101) -> Path:
    """Evaluate the experiment's limit law on a grid of its quantiles."""
    experiment = Experiment(config)
    kind = experiment.kind
    if kind == "renewal_count":
        law = limits.hitting_time_law(experiment.w_bank)
    elif kind in ("ctrw_excursion", "full_dependence_max"):
        law = limits.excursion_limit_cdf(bank=experiment.v_bank("series"), alpha=experiment.alpha)
    elif kind == "kth_order":
        law = limits.kth_order_law(experiment.model.mda, experiment.alpha, config.k, experiment.w_bank)
    else:
        law = experiment.max_law()
    levels = np.linspace(0.01, 0.99, points)
    xs = np.array([law.quantile(float(p)) for p in levels])
    return limits.export_grid(law, xs, Path(out) / f"limit_{kind}.csv")
