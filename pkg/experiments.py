"""
Experiment runner behind the CLI: round-trip contracts, clean and noisy
sweeps, Monte Carlo modulus campaigns, high-noise error distributions and the
loss-surface gradient check. Every run returns a plot-ready table.
"""

import math
import sys
from pathlib import Path
from typing import Any, Callable, Dict, List, Optional, Tuple

import numpy as np
import pandas as pd
import structlog
from pydantic import BaseModel, ConfigDict, Field

from angle_core import ANGLE_DEFINITIONS, OrientedAngle, angle_grid, angular_distances, signed_errors, wrap_to_range
from config import ExperimentConfig
from metrics import error_cdf, error_histogram
from models import (
    PSC_AMPLITUDE,
    CoderHandle,
    CoderKind,
    CoderSpec,
    LossSpec,
    NoiseModel,
    OutputFormat,
    Subcommand,
)
from noise import perturb_batch
from robustness_lab import (
    UNIFORM_SWEEP,
    GroundTruth,
    build_coder,
    effective_modulus,
    modulus_grid,
    modulus_sweep,
    simulate_errors,
)
from training_surface import fsc_loss, gradient_check, manifold_pull, zero_at_truth

logger = structlog.get_logger(__name__)

SCHEMA_VERSION = 1
FLOAT_FORMAT = "%.12g"
ROUNDTRIP_TOLERANCE = 1e-9
PSC_MODULUS_TOLERANCE = 1e-9
ZERO_LOSS_TOLERANCE = 1e-12

SWEEP_COLUMNS = ["true_angle_deg", "decoded_angle_deg", "error_deg", "branch_corrected", "modulus_f1", "modulus_f2"]
MONTECARLO_COLUMNS = ["m", "empirical_variance", "theoretical_variance", "mae", "cycle_error_rate", "trials", "seed"]
ERRORDIST_COLUMNS = ["coder", "series", "x_deg", "value"]
ROUNDTRIP_COLUMNS = ["record", "start_deg", "end_deg", "value"]
LOSSCHECK_COLUMNS = ["check", "point", "seed", "value"]


class ExperimentResult(BaseModel):
    """Table produced by one subcommand plus whether its asserted contracts held"""

    model_config = ConfigDict(arbitrary_types_allowed=True)

    subcommand: Subcommand
    frame: pd.DataFrame
    passed: bool = True
    summary: Dict[str, Any] = Field(default_factory=dict)


class ExperimentDocument(BaseModel):
    """JSON mirror of the CSV table: one top-level list per CSV column"""

    model_config = ConfigDict(extra="allow")

    schema_version: int = SCHEMA_VERSION
    subcommand: Subcommand
    passed: bool
    config_echo: Dict[str, Any]


def _true_runs(mask: np.ndarray) -> List[Tuple[int, int]]:
    """(first, last) index pairs of consecutive True entries"""
    padded = np.concatenate([[False], mask.astype(bool), [False]])
    edges = np.flatnonzero(np.diff(padded.astype(int)))
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def _faulty_gradient(pred: np.ndarray, theta: OrientedAngle, spec: LossSpec) -> np.ndarray:
    # negative control for the gradient check
    return 1.5 * fsc_loss(pred, theta, spec).gradient_array()


class ExperimentRunner:
    """Runs one ExperimentConfig"""

    def __init__(self, cfg: ExperimentConfig):
        self.cfg = cfg
        self.definition = ANGLE_DEFINITIONS[cfg.definition]
        self._runs: Dict[Subcommand, Callable[[], ExperimentResult]] = {
            Subcommand.ROUNDTRIP: self.run_roundtrip,
            Subcommand.SWEEP: self.run_sweep,
            Subcommand.MONTECARLO: self.run_montecarlo,
            Subcommand.ERRORDIST: self.run_errordist,
            Subcommand.LOSSCHECK: self.run_losscheck,
        }

    def run(self) -> ExperimentResult:
        logger.info("experiment_started", subcommand=self.cfg.subcommand.value, coder=self.cfg.coder.value,
                    seed=self.cfg.seed)
        result = self._runs[self.cfg.subcommand]()
        logger.info("experiment_finished", subcommand=self.cfg.subcommand.value, passed=result.passed,
                    rows=len(result.frame))
        return result

    def handle(self, kind: CoderKind, constrained: bool = False) -> CoderHandle:
        cfg = self.cfg
        return CoderHandle(
            kind=kind,
            n_freq=cfg.n_freq,
            omega=cfg.omega,
            threshold=cfg.threshold,
            manifold_constrained=constrained,
            csl_bins=cfg.csl_bins,
            csl_window=cfg.csl_window,
            cyclic_wrapping=cfg.cyclic_wrapping,
            definition=self.definition,
            modulus_floor=cfg.modulus_floor,
        )

    def ground_truth(self) -> GroundTruth:
        if self.cfg.angle_deg is None:
            return UNIFORM_SWEEP
        return wrap_to_range(math.radians(self.cfg.angle_deg), self.definition)

    def degree_grid(self) -> np.ndarray:
        """lower_bound + i*step in degrees, ceil(range / step) rows"""
        step = self.cfg.angle_step_deg
        span = math.degrees(self.definition.period)
        count = int(math.ceil(span / step - 1e-9))
        return math.degrees(self.definition.lower_bound) + step * np.arange(count)

    def run_roundtrip(self) -> ExperimentResult:
        """decode(encode(theta)) over the grid; CSL is held to half a bin instead of 1e-9"""
        cfg = self.cfg
        handle = self.handle(cfg.coder)
        coder = build_coder(handle)
        period = self.definition.period
        grid = angle_grid(self.definition, math.radians(cfg.angle_step_deg))

        clean = coder.encode_batch(grid)
        decoded = coder.decode_batch(clean)
        errors = angular_distances(decoded.theta, grid, period)

        if cfg.coder == CoderKind.CSL:
            tolerance = period / (2 * cfg.csl_bins) + 1e-12
            ok = errors <= tolerance
        else:
            tolerance = ROUNDTRIP_TOLERANCE
            ok = errors < tolerance
        ok &= ~decoded.degenerate & ~decoded.heuristic_fired

        modulus_ok = True
        rows: List[Dict[str, Any]] = []
        finite = np.where(np.isnan(errors), period / 2, errors)
        max_error = float(np.max(finite))
        rows.append({"record": "points", "value": float(grid.size)})
        rows.append({"record": "max_error_rad", "value": max_error})
        rows.append({"record": "mean_error_rad", "value": float(np.mean(finite))})
        rows.append({"record": "max_error_deg", "value": math.degrees(max_error)})
        rows.append({"record": "tolerance_rad", "value": tolerance})

        deg = np.degrees(grid)
        for first, last in _true_runs(decoded.branch_corrected):
            rows.append({"record": "branch_range", "start_deg": deg[first], "end_deg": deg[last],
                         "value": float(last - first + 1)})

        if cfg.coder in (CoderKind.PSC, CoderKind.PSCD):
            # clean synthesis sits on C^2 + S^2 = 9/4 at every frequency
            squared = (coder.frequency_moduli(clean) * PSC_AMPLITUDE) ** 2
            drift = float(np.max(np.abs(squared - PSC_AMPLITUDE ** 2)))
            rows.append({"record": "psc_modulus_drift", "value": drift})
            if drift >= PSC_MODULUS_TOLERANCE:
                logger.warning("psc_modulus_violated", drift=drift)
                modulus_ok = False

        for idx in np.flatnonzero(~ok):
            rows.append({"record": "violation", "start_deg": deg[idx], "end_deg": deg[idx], "value": finite[idx]})
            logger.warning("roundtrip_violation", angle_deg=float(deg[idx]), error=float(finite[idx]))

        passed = bool(np.all(ok)) and modulus_ok
        return ExperimentResult(
            subcommand=Subcommand.ROUNDTRIP,
            frame=pd.DataFrame(rows, columns=ROUNDTRIP_COLUMNS),
            passed=passed,
            summary={"coder": handle.label, "points": int(grid.size), "max_error_rad": max_error,
                     "violations": int(np.count_nonzero(~ok))},
        )

    def run_sweep(self) -> ExperimentResult:
        """One row per grid angle; noise is applied when sigma > 0 or modulus < 1"""
        cfg = self.cfg
        handle = self.handle(cfg.coder)
        coder = build_coder(handle)
        true_deg = self.degree_grid()
        thetas = np.radians(true_deg)

        raw = coder.encode_batch(thetas)
        if cfg.sigma > 0 or cfg.modulus < 1:
            raw = perturb_batch(raw, NoiseModel(sigma=cfg.sigma, modulus_scale=cfg.modulus, rng_seed=cfg.seed))
        decoded = coder.decode_batch(raw)
        moduli = coder.frequency_moduli(raw)
        n = thetas.size

        frame = pd.DataFrame({
            "true_angle_deg": true_deg,
            "decoded_angle_deg": np.degrees(decoded.theta),
            "error_deg": np.degrees(signed_errors(decoded.theta, thetas, self.definition.period)),
            "branch_corrected": decoded.branch_corrected.astype(int),
            "modulus_f1": moduli[:, 0] if moduli.shape[1] > 0 else np.full(n, np.nan),
            "modulus_f2": moduli[:, 1] if moduli.shape[1] > 1 else np.full(n, np.nan),
        }, columns=SWEEP_COLUMNS)
        return ExperimentResult(
            subcommand=Subcommand.SWEEP,
            frame=frame,
            summary={"coder": handle.label, "rows": n,
                     "max_abs_error_deg": float(np.nanmax(np.abs(frame["error_deg"]))) if n else 0.0,
                     "degenerate": int(np.count_nonzero(decoded.degenerate))},
        )

    def run_montecarlo(self) -> ExperimentResult:
        """Variance against the modulus grid; the theory column is filled at m = 1 only"""
        cfg = self.cfg
        handle = self.handle(cfg.coder)
        moduli = modulus_grid(cfg.modulus_start, cfg.modulus_stop, cfg.modulus_step)
        reports = modulus_sweep(handle, self.ground_truth(), cfg.sigma, moduli, cfg.trials, cfg.seed,
                                workers=cfg.workers)

        frame = pd.DataFrame([
            {
                "m": m,
                "empirical_variance": r.variance_estimate,
                "theoretical_variance": r.theoretical_variance if r.theoretical_variance is not None else np.nan,
                "mae": r.mae_decoded,
                "cycle_error_rate": r.cycle_error_rate,
                "trials": r.trials,
                "seed": r.seed,
            }
            for m, r in zip(moduli, reports)
        ], columns=MONTECARLO_COLUMNS)
        return ExperimentResult(
            subcommand=Subcommand.MONTECARLO,
            frame=frame,
            summary={"coder": handle.label, "moduli": len(moduli), "trials": cfg.trials,
                     "variance_at_start": reports[0].variance_estimate},
        )

    def cdf_thresholds_deg(self) -> np.ndarray:
        """0 .. half period in cdf_step_deg steps, the 1 degree point always included"""
        step = self.cfg.cdf_step_deg
        half = math.degrees(self.definition.period) / 2
        grid = step * np.arange(int(math.floor(half / step + 1e-9)) + 1)
        return np.unique(np.concatenate([grid, [1.0, half]]))

    def run_errordist(self) -> ExperimentResult:
        """Histogram and CDF rows per compared coder, all on the same noise stream"""
        cfg = self.cfg
        constrained = cfg.constrained_kinds()
        period = self.definition.period
        thresholds = self.cdf_thresholds_deg()
        rows: List[Dict[str, Any]] = []
        summary: Dict[str, Any] = {}

        for kind in cfg.compare:
            handle = self.handle(kind, constrained=kind in constrained)
            m = effective_modulus(handle, cfg.modulus)
            model = NoiseModel(sigma=cfg.sigma, modulus_scale=m, rng_seed=cfg.seed)
            errors, _ = simulate_errors(build_coder(handle), self.ground_truth(), model, cfg.trials,
                                        workers=cfg.workers)

            for center, count in error_histogram(errors, math.radians(cfg.hist_bin_deg), period):
                rows.append({"coder": handle.label, "series": "histogram",
                             "x_deg": math.degrees(center), "value": count})
            cdf_radians = np.radians(thresholds)
            cdf_radians[-1] = period / 2
            cdf = error_cdf(errors, cdf_radians)
            for (_, fraction), t_deg in zip(cdf, thresholds):
                rows.append({"coder": handle.label, "series": "cdf", "x_deg": t_deg, "value": fraction})
            within = error_cdf(errors, [math.radians(1.0)])[0][1]
            beyond = float(np.mean(np.abs(errors) > period / 4))
            rows.append({"coder": handle.label, "series": "within_1deg", "x_deg": 1.0, "value": within})
            rows.append({"coder": handle.label, "series": "cycle_error_rate",
                         "x_deg": math.degrees(period / 4), "value": beyond})
            summary[handle.label] = {"within_1deg": within, "cycle_error_rate": beyond, "modulus": m}
            logger.info("errordist_coder_done", coder=handle.label, within_1deg=within, cycle_error_rate=beyond)

        return ExperimentResult(
            subcommand=Subcommand.ERRORDIST,
            frame=pd.DataFrame(rows, columns=ERRORDIST_COLUMNS),
            summary=summary,
        )

    def run_losscheck(self) -> ExperimentResult:
        """Finite-difference gradient suite, zero loss at truth and the manifold pull sign"""
        cfg = self.cfg
        loss_spec = LossSpec(
            beta=cfg.beta,
            manifold_weight=cfg.manifold_weight,
            spec=CoderSpec(n_freq=cfg.n_freq, omega=cfg.omega, definition=self.definition),
        )
        report = gradient_check(loss_spec, points=cfg.points, seed=cfg.seed,
                                gradient_fn=_faulty_gradient if cfg.inject_fault else None)
        at_truth = zero_at_truth(loss_spec, math.radians(cfg.angle_step_deg))

        rng = np.random.default_rng(cfg.seed)
        pulls = [
            manifold_pull(loss_spec, wrap_to_range(float(t), self.definition), float(lam))
            for t, lam in zip(rng.uniform(self.definition.lower_bound, self.definition.upper_bound, 64),
                              rng.uniform(0.05, 0.95, 64))
        ]
        worst_pull = max(pulls)

        rows: List[Dict[str, Any]] = [
            {"check": "max_relative_error", "value": report.max_relative_error},
            {"check": "tolerance", "value": report.tolerance},
            {"check": "zero_at_truth", "value": at_truth},
            {"check": "manifold_pull_max", "value": worst_pull},
        ]
        for index, seed, err in report.failures:
            rows.append({"check": "gradient_failure", "point": index, "seed": seed, "value": err})
            logger.warning("gradient_check_failed", point=index, seed=seed, relative_error=err)

        passed = report.passed and at_truth < ZERO_LOSS_TOLERANCE and worst_pull < 0
        return ExperimentResult(
            subcommand=Subcommand.LOSSCHECK,
            frame=pd.DataFrame(rows, columns=LOSSCHECK_COLUMNS),
            passed=passed,
            summary={"points": report.points, "failures": len(report.failures),
                     "max_relative_error": report.max_relative_error, "zero_at_truth": at_truth},
        )


def _json_value(value: Any) -> Any:
    if isinstance(value, (float, np.floating)):
        value = float(value)
        return None if math.isnan(value) else float(f"{value:.12g}")
    if isinstance(value, np.integer):
        return int(value)
    if isinstance(value, np.bool_):
        return bool(value)
    return value


def render(result: ExperimentResult, cfg: ExperimentConfig) -> str:
    """CSV (LF, 12 significant digits) or the JSON document"""
    if cfg.format == OutputFormat.CSV:
        return result.frame.to_csv(index=False, float_format=FLOAT_FORMAT, lineterminator="\n")
    document = ExperimentDocument(
        subcommand=result.subcommand,
        passed=result.passed,
        config_echo=cfg.model_dump(mode="json"),
        **{col: [_json_value(v) for v in result.frame[col].tolist()] for col in result.frame.columns},
    )
    return document.model_dump_json(indent=2) + "\n"


def write_result(result: ExperimentResult, cfg: ExperimentConfig, out_path: Optional[Path] = None) -> None:
    """Write to ``out_path`` (or the configured one); stdout when neither is set"""
    text = render(result, cfg)
    target = out_path or cfg.out_path
    if target is None:
        sys.stdout.write(text)
        return
    with open(target, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(text)
    logger.info("result_written", path=str(target), format=cfg.format.value, rows=len(result.frame))
