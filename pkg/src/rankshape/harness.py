"""Monte Carlo experiment orchestration with deterministic seed streams.

Every sweep is a grid of cells; replicate r of cell g draws its random
stream from ``SeedSequence(master_seed, spawn_key=(g, r, k))`` with a
fixed sub-key layout (k = 0 data, k = 1 outlier, k >= 2 one probe stream
per estimator), so reruns are bit-reproducible and no stream is shared
across cells.  Replicates may run in parallel; aggregation folds results
in replicate order, so the emitted CSV is byte-identical regardless of
the worker count.

Estimates are compared in trace-N coordinates: the MSE index is the
Frobenius norm of the empirical error covariance of the stacked entries
(full ``vec`` for complex data, ``vecs`` for real), and the matching
lower-bound floor is the trace-N bound divided by the sample count.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field as dc_field
from enum import Enum

import numpy as np
from joblib import Parallel, delayed
from scipy.linalg import eigh as generalized_eigh, toeplitz

from .bounds import cscrb
from .elliptical import (
    Dataset,
    DatasetMeta,
    DegenerateObservationError,
    DensityGenerator,
    GeneratorKind,
    make_generator,
    sample_contaminated,
    sample_es,
    sample_outlier,
)
from .estimators import ConvergenceError, huber, renormalize, scm, tyler_joint
from .matops import (
    Constraint,
    MatrixField,
    NotPositiveDefiniteError,
    ShapeMatrix,
    divide_by_real,
    vec,
    vecs,
)
from .restimator import REstimatorConfig, r_estimate
from .scores import ScoreFunction, t_score, van_der_waerden_score

__all__ = [
    "Scenario",
    "EstimatorSpec",
    "ExperimentSpec",
    "MetricRow",
    "mse_index",
    "run_mse_sweep",
    "bp_curve",
    "eif_curve",
    "alpha_sweep",
    "run_scenario",
    "write_csv",
    "load_spec",
    "spec_from_dict",
]

CSV_HEADER = "scenario,estimator,coordinate,metric,value,stderr,runs,failures"
BP_FAILURE_CAP = 1e12
SPEC_VERSION = 1

_REPLICATE_ERRORS = (ConvergenceError, NotPositiveDefiniteError,
                     DegenerateObservationError, np.linalg.LinAlgError)


class Scenario(Enum):
    MSE_VS_L = "mse-vs-l"
    MSE_VS_PARAM = "mse-vs-param"
    BP_CURVE = "bp-curve"
    EIF_CURVE = "eif-curve"
    ALPHA_SWEEP = "alpha-sweep"


@dataclass(frozen=True)
class EstimatorSpec:
    """One estimator entry of a sweep, in plain-data form."""

    kind: str  # "scm" | "tyler" | "huber" | "r"
    huber_q: float = 0.5
    score: str = "vdw"  # "vdw" | "t"
    nu: float = 1.0
    preliminary: str = "tyler"
    preliminary_q: float = 0.5
    upsilon: float = 0.01
    label: str | None = None

    @property
    def id(self) -> str:
        if self.label:
            return self.label
        if self.kind == "huber":
            return f"huber-q{self.huber_q:g}"
        if self.kind == "r":
            score = "vdw" if self.score == "vdw" else f"t{self.nu:g}"
            prelim = (self.preliminary if self.preliminary != "huber"
                      else f"huber-q{self.preliminary_q:g}")
            return f"r-{score}-{prelim}"
        return self.kind

    @staticmethod
    def from_dict(d: dict) -> "EstimatorSpec":
        kind = d.get("kind")
        if kind not in ("scm", "tyler", "huber", "r"):
            raise ValueError(f"unknown estimator kind {kind!r}")
        return EstimatorSpec(
            kind=kind,
            huber_q=float(d.get("q", 0.5)),
            score=d.get("score", "vdw"),
            nu=float(d.get("nu", 1.0)),
            preliminary=d.get("preliminary", "tyler"),
            preliminary_q=float(d.get("preliminary_q", 0.5)),
            upsilon=float(d.get("upsilon", 0.01)),
            label=d.get("id"),
        )

    def build_score(self, dim: int, field: MatrixField) -> ScoreFunction:
        if self.score == "vdw":
            return van_der_waerden_score(dim, field)
        if self.score == "t":
            return t_score(dim, field, self.nu)
        raise ValueError(f"unknown score {self.score!r}")


@dataclass
class ExperimentSpec:
    scenario: Scenario
    field: MatrixField
    dim: int
    runs: int
    master_seed: int
    generator: dict  # {"kind", "s"/"dof", "sigma2"}
    sigma0: dict  # {"kind": "toeplitz"|"identity"|"file", ...}
    estimators: list[EstimatorSpec]
    sample_sizes: list[int] = dc_field(default_factory=list)
    param: str = "s"
    param_grid: list[float] = dc_field(default_factory=list)
    epsilon_grid: list[float] = dc_field(default_factory=list)
    outlier_rho: float = 0.1
    outlier_rho_grid: list[float] = dc_field(default_factory=list)
    upsilon_grid: list[float] = dc_field(default_factory=list)
    dim_grid: list[int] = dc_field(default_factory=list)
    out: str | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if self.runs < 1:
            raise ValueError("runs must be at least 1")
        if not self.estimators and self.scenario is not Scenario.ALPHA_SWEEP:
            raise ValueError("at least one estimator is required")


@dataclass(frozen=True)
class MetricRow:
    scenario: str
    estimator: str
    coordinate: float
    metric: str
    value: float
    stderr: float
    runs: int
    failures: int


def spec_from_dict(d: dict) -> ExperimentSpec:
    version = d.get("spec_version")
    if version != SPEC_VERSION:
        raise ValueError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION})")
    field = MatrixField(d.get("field", "complex"))
    return ExperimentSpec(
        scenario=Scenario(d["scenario"]),
        field=field,
        dim=int(d["dim"]),
        runs=int(d.get("runs", 100)),
        master_seed=int(d.get("master_seed", 0)),
        generator=dict(d.get("generator", {"kind": "gaussian"})),
        sigma0=dict(d.get("sigma0", {"kind": "identity"})),
        estimators=[EstimatorSpec.from_dict(e) for e in d.get("estimators", [])],
        sample_sizes=[int(v) for v in _as_list(d.get("sample_sizes", d.get("sample_size", [])))],
        param=d.get("param", "s"),
        param_grid=[float(v) for v in d.get("param_grid", [])],
        epsilon_grid=[float(v) for v in d.get("epsilon_grid", [])],
        outlier_rho=float(d.get("outlier_rho", 0.1)),
        outlier_rho_grid=[float(v) for v in d.get("outlier_rho_grid", [])],
        upsilon_grid=[float(v) for v in d.get("upsilon_grid", [])],
        dim_grid=[int(v) for v in d.get("dim_grid", [])],
        out=d.get("out"),
        workers=int(d.get("workers", 1)),
    )


def _as_list(v) -> list:
    if isinstance(v, (list, tuple)):
        return list(v)
    return [v]


def load_spec(path) -> ExperimentSpec:
    with open(path, encoding="utf-8") as fh:
        return spec_from_dict(json.load(fh))


# --- scatter matrix construction -------------------------------------------

def build_sigma0(spec_sigma0: dict, dim: int, field: MatrixField) -> np.ndarray:
    kind = spec_sigma0.get("kind", "identity")
    if kind == "identity":
        eye = np.eye(dim)
        return eye.astype(complex) if field is MatrixField.COMPLEX else eye
    if kind == "toeplitz":
        rho_abs = float(spec_sigma0.get("rho_abs", 0.8))
        if not 0.0 <= rho_abs < 1.0:
            raise ValueError("toeplitz magnitude must lie in [0, 1)")
        turns = float(spec_sigma0.get("rho_phase_turns", 0.0))
        if field is MatrixField.COMPLEX:
            rho = rho_abs * np.exp(2j * np.pi * turns)
        else:
            if turns not in (0.0, 0.5):
                raise ValueError("real toeplitz supports phase 0 or 0.5 turns only")
            rho = rho_abs if turns == 0.0 else -rho_abs
        first_col = rho ** np.arange(dim)
        return toeplitz(first_col)
    if kind == "file":
        with open(spec_sigma0["path"], encoding="utf-8") as fh:
            payload = json.load(fh)
        re = np.asarray(payload["re"], dtype=float)
        if payload.get("im") is not None:
            return re + 1j * np.asarray(payload["im"], dtype=float)
        return re
    raise ValueError(f"unknown sigma0 kind {kind!r}")


def _make_spec_generator(spec: ExperimentSpec, dim: int | None = None,
                         override: dict | None = None) -> DensityGenerator:
    g = dict(spec.generator)
    if override:
        g.update(override)
    kind = GeneratorKind(g.get("kind", "gaussian"))
    kwargs = {}
    if kind is GeneratorKind.GENERALIZED_GAUSSIAN:
        kwargs["s"] = float(g["s"])
    if kind is GeneratorKind.STUDENT_T:
        kwargs["dof"] = float(g["dof"])
    return make_generator(kind, dim or spec.dim, spec.field,
                          sigma2=float(g.get("sigma2", 1.0)), **kwargs)


# --- metric machinery -------------------------------------------------------

def _stack_error(est: ShapeMatrix, v0: ShapeMatrix) -> np.ndarray:
    diff = est.mat - v0.mat
    return vec(diff) if v0.field is MatrixField.COMPLEX else vecs(diff)


def mse_index(estimates: list[ShapeMatrix], v0: ShapeMatrix) -> float:
    """Frobenius norm of the empirical error-covariance matrix.

    Errors are stacked with ``vec`` for complex data and ``vecs`` for
    real data; all estimates must share the constraint and dimension of
    the reference ``v0``.
    """
    if len(estimates) < 2:
        raise ValueError("need at least two estimates")
    for est in estimates:
        if est.constraint is not v0.constraint or est.dim != v0.dim:
            raise ValueError("estimate constraint/dimension mismatch with reference")
    errs = np.stack([_stack_error(e, v0) for e in estimates])
    value, _ = _mse_with_se(errs)
    return value


def _mse_with_se(errs: np.ndarray) -> tuple[float, float]:
    """MSE index and its delta-method standard error from per-replicate errors."""
    n_runs = errs.shape[0]
    mbar = errs.T @ errs.conj() / n_runs  # mean of outer products e e^H
    value = float(np.linalg.norm(mbar))
    if value == 0.0:
        return 0.0, 0.0
    # directional derivative of ||.||_F at mbar applied to each replicate
    per_run = np.einsum("ri,ij,rj->r", errs.conj(), mbar, errs).real / value
    se = float(per_run.std(ddof=1) / np.sqrt(n_runs)) if n_runs > 1 else 0.0
    return value, se


def _run_estimator(espec: EstimatorSpec, data: Dataset,
                   perturb_seed) -> tuple[ShapeMatrix, bool]:
    """Top-left-unit estimate plus the PD-repair flag (always False for
    the preliminary-only estimators)."""
    if espec.kind == "scm":
        return scm(data).shape, False
    if espec.kind == "tyler":
        return tyler_joint(data).shape, False
    if espec.kind == "huber":
        return huber(data, espec.huber_q).shape, False
    cfg = REstimatorConfig(
        score=espec.build_score(data.dim, data.field),
        preliminary=espec.preliminary,
        huber_q=espec.preliminary_q,
        perturbation_scale=espec.upsilon,
        perturbation_seed=perturb_seed,
    )
    report = r_estimate(data, cfg)
    return report.shape, report.pd_repaired


def _cell_seed(master: int, *key: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=master, spawn_key=tuple(key))


# --- replicate workers (module level so they pickle) ------------------------

def _mse_replicate(gen, sigma0, n_samples, especs, master, cell, rep):
    rng = np.random.default_rng(_cell_seed(master, cell, rep, 0))
    mu = np.zeros(sigma0.shape[0], dtype=sigma0.dtype)
    data = sample_es(gen, mu, sigma0, n_samples, rng)
    out = []
    for k, espec in enumerate(especs):
        try:
            shape, repaired = _run_estimator(
                espec, data, _cell_seed(master, cell, rep, 2 + k))
            out.append((renormalize(shape, Constraint.TRACE_N).mat, repaired))
        except _REPLICATE_ERRORS:
            out.append((None, False))
    return out


def _bp_replicate(gen, sigma0, n_samples, epsilon, rho, especs, master, cell, rep):
    mu = np.zeros(sigma0.shape[0], dtype=sigma0.dtype)
    seed = _cell_seed(master, cell, rep, 0)
    clean = sample_es(gen, mu, sigma0, n_samples, np.random.default_rng(seed))
    contaminated = sample_contaminated(gen, mu, sigma0, n_samples, epsilon, rho,
                                       np.random.default_rng(seed))
    out = []
    for k, espec in enumerate(especs):
        perturb = _cell_seed(master, cell, rep, 2 + k)
        try:
            v_clean, _ = _run_estimator(espec, clean, perturb)
            v_cont, _ = _run_estimator(espec, contaminated, perturb)
            out.append((_bp_value(renormalize(v_clean, Constraint.TRACE_N).mat,
                                  renormalize(v_cont, Constraint.TRACE_N).mat),
                        False))
        except _REPLICATE_ERRORS:
            out.append((BP_FAILURE_CAP, True))
    return out


def _bp_value(v_clean: np.ndarray, v_cont: np.ndarray) -> float:
    """max(largest eigenvalue, 1/smallest eigenvalue) of V_clean^{-1} V_cont.

    Identical inputs give exactly 1: that is the mathematical value, so it
    is short-circuited rather than left to rounding.  A contaminated
    estimate that collapsed to (numerical) rank deficiency records the
    cap value: the explosion is the measured phenomenon.
    """
    if np.array_equal(v_clean, v_cont):
        return 1.0
    lam = generalized_eigh(v_cont, v_clean, eigvals_only=True)  # ascending, real
    if lam[0] <= 0.0:
        return BP_FAILURE_CAP
    return float(min(max(lam[-1], 1.0 / lam[0]), BP_FAILURE_CAP))


def _eif_replicate(gen, sigma0, n_samples, rho, especs, master, cell, rep):
    mu = np.zeros(sigma0.shape[0], dtype=sigma0.dtype)
    data = sample_es(gen, mu, sigma0, n_samples,
                     np.random.default_rng(_cell_seed(master, cell, rep, 0)))
    outlier = sample_outlier(rho, gen.dim, gen.field,
                             np.random.default_rng(_cell_seed(master, cell, rep, 1)))
    augmented = Dataset(
        samples=np.vstack([data.samples, outlier]),
        meta=DatasetMeta(generator=data.meta.generator, mu=mu, sigma=sigma0,
                         epsilon=0.0, outlier_rho=rho))
    out = []
    for k, espec in enumerate(especs):
        perturb = _cell_seed(master, cell, rep, 2 + k)
        try:
            v_plain, _ = _run_estimator(espec, data, perturb)
            v_aug, _ = _run_estimator(espec, augmented, perturb)
            diff = (renormalize(v_plain, Constraint.TRACE_N).mat
                    - renormalize(v_aug, Constraint.TRACE_N).mat)
            out.append(((n_samples + 1) * float(np.linalg.norm(diff)), False))
        except _REPLICATE_ERRORS:
            out.append((BP_FAILURE_CAP, True))
    return out


def _alpha_replicate(gen, sigma0, n_samples, espec, master, cell, rep):
    rng = np.random.default_rng(_cell_seed(master, cell, rep, 0))
    mu = np.zeros(sigma0.shape[0], dtype=sigma0.dtype)
    data = sample_es(gen, mu, sigma0, n_samples, rng)
    try:
        shape, repaired = _run_estimator(espec, data,
                                         _cell_seed(master, cell, rep, 2))
        return renormalize(shape, Constraint.TRACE_N).mat, repaired, False
    except _REPLICATE_ERRORS:
        return None, False, True


# --- sweeps ------------------------------------------------------------------

def _parallel(spec: ExperimentSpec):
    return Parallel(n_jobs=spec.workers)


def _truth(sigma0: np.ndarray) -> tuple[ShapeMatrix, ShapeMatrix]:
    v1 = ShapeMatrix(divide_by_real(sigma0, sigma0[0, 0].real),
                     Constraint.TOP_LEFT_UNIT)
    return v1, renormalize(v1, Constraint.TRACE_N)


def run_mse_sweep(spec: ExperimentSpec) -> list[MetricRow]:
    """MSE index per estimator along the L grid or a generator-parameter
    grid, with the matching bound floor per grid point."""
    if spec.scenario not in (Scenario.MSE_VS_L, Scenario.MSE_VS_PARAM):
        raise ValueError("spec scenario does not describe an MSE sweep")
    sigma0 = build_sigma0(spec.sigma0, spec.dim, spec.field)
    v1_true, v0 = _truth(sigma0)
    rows: list[MetricRow] = []
    if spec.scenario is Scenario.MSE_VS_L:
        if not spec.sample_sizes:
            raise ValueError("mse-vs-l requires sample_sizes")
        grid = [(float(n), _make_spec_generator(spec), n) for n in spec.sample_sizes]
    else:
        if not spec.param_grid:
            raise ValueError("mse-vs-param requires param_grid")
        n_samples = spec.sample_sizes[0] if spec.sample_sizes else 5 * spec.dim
        grid = [(value, _make_spec_generator(spec, override={spec.param: value}),
                 n_samples) for value in spec.param_grid]

    scenario = spec.scenario.value
    for cell, (coordinate, gen, n_samples) in enumerate(grid):
        bound = cscrb(v1_true, gen, Constraint.TRACE_N)
        rows.append(MetricRow(scenario, "cscrb", coordinate, "cscrb_floor",
                              bound.epsilon / n_samples, 0.0, 0, 0))
        results = _parallel(spec)(
            delayed(_mse_replicate)(gen, sigma0, n_samples, spec.estimators,
                                    spec.master_seed, cell, rep)
            for rep in range(spec.runs))
        for k, espec in enumerate(spec.estimators):
            mats = [res[k][0] for res in results if res[k][0] is not None]
            failures = spec.runs - len(mats)
            if len(mats) >= 2:
                errs = np.stack([
                    vec(m - v0.mat) if spec.field is MatrixField.COMPLEX
                    else vecs(m - v0.mat) for m in mats])
                value, se = _mse_with_se(errs)
            else:
                value, se = float("nan"), float("nan")
            rows.append(MetricRow(scenario, espec.id, coordinate, "mse_index",
                                  value, se, len(mats), failures))
    return rows


def _mean_rows(scenario, espec_id, coordinate, metric, values, flags) -> MetricRow:
    values = np.asarray(values, dtype=float)
    failures = int(np.sum(flags))
    mean = float(values.mean())
    se = float(values.std(ddof=1) / np.sqrt(values.size)) if values.size > 1 else 0.0
    return MetricRow(scenario, espec_id, coordinate, metric, mean, se,
                     values.size, failures)


def bp_curve(spec: ExperimentSpec) -> list[MetricRow]:
    """Averaged eigenvalue-ratio breakdown diagnostic along a
    contamination-fraction grid (coupled clean/contaminated draws)."""
    if spec.scenario is not Scenario.BP_CURVE:
        raise ValueError("spec scenario is not bp-curve")
    if not spec.epsilon_grid:
        raise ValueError("bp-curve requires epsilon_grid")
    if any(not 0.0 <= e <= 0.5 for e in spec.epsilon_grid):
        raise ValueError("contamination grid must lie in [0, 1/2]")
    sigma0 = build_sigma0(spec.sigma0, spec.dim, spec.field)
    gen = _make_spec_generator(spec)
    n_samples = spec.sample_sizes[0] if spec.sample_sizes else 5 * spec.dim
    rows = []
    for cell, eps in enumerate(spec.epsilon_grid):
        results = _parallel(spec)(
            delayed(_bp_replicate)(gen, sigma0, n_samples, eps, spec.outlier_rho,
                                   spec.estimators, spec.master_seed, cell, rep)
            for rep in range(spec.runs))
        for k, espec in enumerate(spec.estimators):
            values = [res[k][0] for res in results]
            flags = [res[k][1] for res in results]
            rows.append(_mean_rows(spec.scenario.value, espec.id, eps, "bp",
                                   values, flags))
    return rows


def eif_curve(spec: ExperimentSpec) -> list[MetricRow]:
    """Averaged single-outlier displacement along an outlier-radius grid."""
    if spec.scenario is not Scenario.EIF_CURVE:
        raise ValueError("spec scenario is not eif-curve")
    if not spec.outlier_rho_grid:
        raise ValueError("eif-curve requires outlier_rho_grid")
    sigma0 = build_sigma0(spec.sigma0, spec.dim, spec.field)
    gen = _make_spec_generator(spec)
    n_samples = spec.sample_sizes[0] if spec.sample_sizes else 1000
    rows = []
    for cell, rho in enumerate(spec.outlier_rho_grid):
        results = _parallel(spec)(
            delayed(_eif_replicate)(gen, sigma0, n_samples, rho, spec.estimators,
                                    spec.master_seed, cell, rep)
            for rep in range(spec.runs))
        for k, espec in enumerate(spec.estimators):
            values = [res[k][0] for res in results]
            flags = [res[k][1] for res in results]
            rows.append(_mean_rows(spec.scenario.value, espec.id, rho, "eif",
                                   values, flags))
    return rows


def alpha_sweep(spec: ExperimentSpec) -> list[MetricRow]:
    """MSE index of the rank estimator across the probe-scale grid,
    optionally for several dimensions, with PD-repair frequencies."""
    if spec.scenario is not Scenario.ALPHA_SWEEP:
        raise ValueError("spec scenario is not alpha-sweep")
    if not spec.upsilon_grid:
        raise ValueError("alpha-sweep requires upsilon_grid")
    dims = spec.dim_grid or [spec.dim]
    base = spec.estimators[0] if spec.estimators else EstimatorSpec(kind="r")
    if base.kind != "r":
        raise ValueError("alpha-sweep sweeps the rank estimator only")
    rows = []
    cell = 0
    for dim in dims:
        sigma0 = build_sigma0(spec.sigma0, dim, spec.field)
        v1_true, v0 = _truth(sigma0)
        gen = _make_spec_generator(spec, dim=dim)
        n_samples = spec.sample_sizes[0] if spec.sample_sizes else 5 * dim
        for upsilon in spec.upsilon_grid:
            espec = EstimatorSpec(kind="r", score=base.score, nu=base.nu,
                                  preliminary=base.preliminary,
                                  preliminary_q=base.preliminary_q,
                                  upsilon=upsilon,
                                  label=f"{base.id}-N{dim}")
            results = _parallel(spec)(
                delayed(_alpha_replicate)(gen, sigma0, n_samples, espec,
                                          spec.master_seed, cell, rep)
                for rep in range(spec.runs))
            mats = [m for m, _, failed in results if m is not None]
            repairs = [rep for _, rep, failed in results if not failed]
            failures = spec.runs - len(mats)
            if len(mats) >= 2:
                errs = np.stack([
                    vec(m - v0.mat) if spec.field is MatrixField.COMPLEX
                    else vecs(m - v0.mat) for m in mats])
                value, se = _mse_with_se(errs)
            else:
                value, se = float("nan"), float("nan")
            rows.append(MetricRow(spec.scenario.value, espec.id, upsilon,
                                  "mse_index", value, se, len(mats), failures))
            repair_rate = float(np.mean(repairs)) if repairs else 0.0
            rows.append(MetricRow(spec.scenario.value, espec.id, upsilon,
                                  "pd_repair_rate", repair_rate, 0.0,
                                  len(repairs), failures))
            cell += 1
    return rows


def run_scenario(spec: ExperimentSpec) -> list[MetricRow]:
    if spec.scenario in (Scenario.MSE_VS_L, Scenario.MSE_VS_PARAM):
        return run_mse_sweep(spec)
    if spec.scenario is Scenario.BP_CURVE:
        return bp_curve(spec)
    if spec.scenario is Scenario.EIF_CURVE:
        return eif_curve(spec)
    return alpha_sweep(spec)


def run_estimate(d: dict) -> str:
    """Run one estimator on one dataset and return the JSON report.

    The dataset is either loaded from ``data_csv`` or simulated from the
    ``generator``/``sigma0``/``dim``/``sample_size`` fields with ``seed``.
    """
    from .elliptical import load_csv
    from .restimator import report_to_json

    version = d.get("spec_version")
    if version != SPEC_VERSION:
        raise ValueError(f"unsupported spec_version {version!r} (expected {SPEC_VERSION})")
    espec = EstimatorSpec.from_dict(d["estimator"])
    seed = int(d.get("seed", 0))
    if "data_csv" in d:
        data = load_csv(d["data_csv"])
    else:
        field = MatrixField(d.get("field", "complex"))
        dim = int(d["dim"])
        sigma0 = build_sigma0(d.get("sigma0", {"kind": "identity"}), dim, field)
        gen_spec = dict(d.get("generator", {"kind": "gaussian"}))
        kind = GeneratorKind(gen_spec.pop("kind", "gaussian"))
        kwargs = {k: float(v) for k, v in gen_spec.items() if k in ("s", "dof")}
        gen = make_generator(kind, dim, field,
                             sigma2=float(gen_spec.get("sigma2", 1.0)), **kwargs)
        mu = np.zeros(dim, dtype=sigma0.dtype)
        data = sample_es(gen, mu, sigma0, int(d["sample_size"]),
                         np.random.default_rng(seed))
    if espec.kind != "r":
        shape, _ = _run_estimator(espec, data, None)
        payload = {
            "estimator": espec.id,
            "seed": seed,
            "shape": {
                "constraint": shape.constraint.value,
                "dim": shape.dim,
                "re": shape.mat.real.tolist(),
                "im": (shape.mat.imag.tolist()
                       if data.field is MatrixField.COMPLEX else None),
            },
        }
        return json.dumps(payload)
    cfg = REstimatorConfig(
        score=espec.build_score(data.dim, data.field),
        preliminary=espec.preliminary,
        huber_q=espec.preliminary_q,
        perturbation_scale=espec.upsilon,
        perturbation_seed=np.random.SeedSequence(entropy=seed, spawn_key=(1,)),
    )
    report = r_estimate(data, cfg)
    envelope = json.loads(report_to_json(report))
    envelope["estimator"] = espec.id
    envelope["seed"] = seed
    return json.dumps(envelope)


def _fmt(value) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def write_csv(rows: list[MetricRow], path) -> None:
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(CSV_HEADER + "\n")
        for row in rows:
            fh.write(",".join([
                row.scenario, row.estimator, _fmt(row.coordinate), row.metric,
                _fmt(row.value), _fmt(row.stderr), str(row.runs),
                str(row.failures)]) + "\n")
