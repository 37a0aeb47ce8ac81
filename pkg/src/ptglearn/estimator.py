"""Estimates of learnable functions from simulated data, and gauge-fixed reconstruction."""

from __future__ import annotations

import csv
import io
import json
import math
from dataclasses import dataclass, field
from typing import Mapping, NamedTuple, Sequence

import numpy as np

from .exp_design import ExperimentPlan
from .linalg import Solver
from .noise_model import EmbeddingMap, GroundTruthModel, ReducedIndex
from .simulator import SimResult

INDETERMINATE = "indeterminate at this shot budget"


class Estimate(NamedTuple):
    value: float        # fidelity exponent f
    se: float           # delta-method standard error of f
    flagged: bool = False


class CycleEstimate(NamedTuple):
    lambda_hat: float
    f_hat: float
    se: float = 0.0
    flagged: bool = False


def _compensated(r: SimResult) -> float:
    return r.mean * r.sign


def _log_se(r: SimResult) -> float:
    """Delta-method standard error of log(mean) for ±1 outcomes."""
    if r.shots == 0:
        return 0.0
    mu = _compensated(r)
    return math.sqrt(max(0.0, 1.0 - mu * mu) / r.shots) / abs(mu)


def estimate_single(result: SimResult) -> Estimate:
    mu = _compensated(result)
    if not mu > 0:
        return Estimate(math.nan, math.nan, True)
    return Estimate(-math.log(mu), _log_se(result))


def estimate_cycle(result_m0: SimResult, result_m: SimResult, m: int) -> CycleEstimate:
    """Two-point ratio estimate of the per-repetition decay of a germ family."""
    if m <= 0:
        raise ValueError("ratio estimation needs m > 0")
    mu0, mum = _compensated(result_m0), _compensated(result_m)
    if not (mu0 > 0 and mum > 0):
        return CycleEstimate(math.nan, math.nan, math.nan, True)
    lam = (mum / mu0) ** (1.0 / m)
    f = -(math.log(mum) - math.log(mu0)) / m
    se = math.hypot(_log_se(result_m0), _log_se(result_m)) / m
    return CycleEstimate(lam, f, se)


def fit_loglinear(results: Sequence[SimResult], ms: Sequence[int]) -> CycleEstimate:
    """Weighted least-squares line through (m, log mean); the decay rate is minus the slope."""
    if len(results) != len(ms) or len(set(ms)) < 2:
        raise ValueError("need at least two distinct depths")
    mus = [_compensated(r) for r in results]
    if any(not mu > 0 for mu in mus):
        return CycleEstimate(math.nan, math.nan, math.nan, True)
    x = np.asarray(ms, dtype=float)
    y = np.log(mus)
    ses = np.array([_log_se(r) for r in results])
    w = np.ones_like(x) if np.any(ses == 0) else 1.0 / ses ** 2
    xm = np.sum(w * x) / np.sum(w)
    sxx = np.sum(w * (x - xm) ** 2)
    slope = np.sum(w * (x - xm) * (y - np.sum(w * y) / np.sum(w))) / sxx
    se = 0.0 if np.any(ses == 0) else float(math.sqrt(1.0 / sxx))
    return CycleEstimate(float(math.exp(slope)), float(-slope), se)


# ---------------------------------------------------------------------------
# assembling plan data


@dataclass
class ElementEstimate:
    name: str
    estimator: str
    value: float
    se: float
    flagged: bool
    lambda_hat: float | None = None
    truth: float | None = None

    @property
    def abs_error(self) -> float | None:
        return None if self.truth is None else abs(self.value - self.truth)

    @property
    def rel_error(self) -> float | None:
        """Error relative to the true infidelity ``1 - exp(-truth)``."""
        if self.truth is None:
            return None
        infid = -math.expm1(-self.truth)
        return math.inf if infid == 0 else self.abs_error / abs(infid)


def assemble(plan: ExperimentPlan, results: Sequence[SimResult], fit: str = "two-point") -> list[ElementEstimate]:
    """Value and standard error of every plan element (the plan's learnable basis)."""
    by_index = {r.index: r for r in results}
    missing = [i for e in plan.elements for i in e.experiments if i not in by_index]
    if missing:
        raise ValueError(f"no results for experiments {missing[:5]}")
    out = []
    for el in plan.elements:
        if el.estimator == "single":
            est = estimate_single(by_index[el.experiments[0]])
            out.append(ElementEstimate(el.name, "single", est.value, est.se, est.flagged))
            continue
        fam = sorted(((plan.experiments[i].m, by_index[i]) for i in el.experiments), key=lambda t: t[0])
        if fit == "loglinear" and len(fam) > 2:
            est = fit_loglinear([r for _, r in fam], [m for m, _ in fam])
        else:
            (m0, r0), (mm, rm) = fam[0], fam[-1]
            if m0 != 0:
                raise ValueError(f"family {el.name} lacks its depth-0 experiment")
            est = estimate_cycle(r0, rm, mm)
        out.append(ElementEstimate(el.name, "ratio", est.f_hat, est.se, est.flagged, est.lambda_hat))
    return out


def attach_truth(plan: ExperimentPlan, estimates: Sequence[ElementEstimate], model: GroundTruthModel) -> None:
    for el, est in zip(plan.elements, estimates):
        if el.estimator == "single":
            est.truth = model.value(plan.experiments[el.experiments[0]].target)
        else:
            est.truth = model.value(el.witness)


def expand(plan: ExperimentPlan, estimates: Sequence[ElementEstimate], f: Mapping) -> tuple[float, float]:
    """Value and standard error of a learnable reduced covector from its basis expansion."""
    solver = Solver()
    for i, el in enumerate(plan.elements):
        solver.add({k: v for k, v in el.vector.items()}, tag=i)
    coeffs = solver.express({ReducedIndex(*k): v for k, v in f.items()})
    if coeffs is None:
        raise ValueError("covector is not learnable from this plan")
    val = sum(float(c) * estimates[i].value for i, c in coeffs.items())
    se = math.sqrt(sum((float(c) * estimates[i].se) ** 2 for i, c in coeffs.items()))
    return val, se


# ---------------------------------------------------------------------------
# gauge fixing


def gauge_fix(Q: EmbeddingMap, vectors: Sequence[Mapping], values: Sequence[float],
              convention: str | Sequence[ReducedIndex] = "minimum-norm") -> dict[ReducedIndex, float]:
    """Reduced parameters reproducing every basis value.

    ``convention`` is ``"minimum-norm"`` (solution orthogonal to the gauge
    space) or a list of reduced coordinates pinned to zero; the pinned set
    must have the gauge dimension and leave a uniquely solvable system.
    """
    pos = Q.position
    B = np.zeros((len(vectors), Q.dim))
    for i, v in enumerate(vectors):
        for k, c in v.items():
            B[i, pos[ReducedIndex(*k)]] = float(c)
    y = np.asarray(values, dtype=float)
    if convention == "minimum-norm":
        r, *_ = np.linalg.lstsq(B, y, rcond=None)
    else:
        pinned = {pos[ReducedIndex(*k)] for k in convention}
        gauge_dim = Q.dim - len(vectors)
        if len(pinned) != gauge_dim:
            raise ValueError(f"pin {gauge_dim} coordinates (the gauge dimension), got {len(pinned)}")
        free = [j for j in range(Q.dim) if j not in pinned]
        sub = B[:, free]
        if np.linalg.matrix_rank(sub) != len(free):
            raise ValueError("pinned coordinates do not fix the gauge")
        sol = np.linalg.solve(sub, y)
        r = np.zeros(Q.dim)
        r[free] = sol
    return {Q.indices[j]: float(r[j]) for j in range(Q.dim)}


# ---------------------------------------------------------------------------
# reports


@dataclass
class EstimationReport:
    n: int
    mode: str
    elements: list[ElementEstimate]
    gauge_fixed: dict[ReducedIndex, float]
    metadata: dict = field(default_factory=dict)

    FIELDS = ("name", "estimator", "estimate", "se", "flagged", "lambda_hat", "truth", "abs_error", "rel_error")

    def _row(self, e: ElementEstimate) -> dict:
        row = {"name": e.name, "estimator": e.estimator, "estimate": e.value, "se": e.se,
               "flagged": e.flagged, "lambda_hat": e.lambda_hat}
        if e.flagged:
            row["status"] = INDETERMINATE
        if e.truth is not None:
            row.update(truth=e.truth, abs_error=e.abs_error, rel_error=e.rel_error)
        return row

    def to_json(self) -> dict:
        return {"n": self.n, "mode": self.mode, "metadata": self.metadata,
                "elements": [self._row(e) for e in self.elements],
                "gauge_fixed": {k.render(self.n): v for k, v in sorted(self.gauge_fixed.items())}}

    def dumps(self) -> str:
        return json.dumps(self.to_json(), indent=1, sort_keys=True, allow_nan=True)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.DictWriter(buf, fieldnames=self.FIELDS, extrasaction="ignore", lineterminator="\n")
        w.writeheader()
        for e in self.elements:
            w.writerow({k: ("" if v is None else v) for k, v in self._row(e).items()})
        return buf.getvalue()

    def max_abs_error(self) -> float | None:
        errs = [e.abs_error for e in self.elements if e.abs_error is not None]
        return max(errs) if errs else None


def learn(plan: ExperimentPlan, results: Sequence[SimResult], model: GroundTruthModel | None = None,
          fit: str = "two-point", convention: str | Sequence[ReducedIndex] = "minimum-norm",
          metadata: Mapping | None = None) -> EstimationReport:
    """Full estimation pass: element estimates, optional truth comparison, gauge-fixed parameters."""
    estimates = assemble(plan, results, fit)
    if model is not None:
        attach_truth(plan, estimates, model)
    Q = plan.embedding()
    ok = [(el.vector, est.value) for el, est in zip(plan.elements, estimates) if not est.flagged]
    fixed = {}
    if len(ok) == len(plan.elements):
        fixed = gauge_fix(Q, [v for v, _ in ok], [x for _, x in ok], convention)
    meta = dict(metadata or {})
    meta.setdefault("shots", sorted({r.shots for r in results}))
    meta.setdefault("m_values", sorted({s.m for s in plan.experiments}))
    meta["flagged"] = sum(e.flagged for e in estimates)
    return EstimationReport(plan.n, plan.mode, estimates, fixed, meta)


def plot_report(report: EstimationReport, path: str) -> bool:
    """Scatter of estimates against truth; returns False when no truth is attached."""
    pts = [(e.truth, e.value, e.se) for e in report.elements if e.truth is not None and not e.flagged]
    if not pts:
        return False
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt

    t, v, s = (np.array(c) for c in zip(*pts))
    fig, ax = plt.subplots(figsize=(4.5, 4.5))
    ax.errorbar(t, v, yerr=s, fmt="o", ms=3, lw=0.8)
    lo, hi = float(min(t.min(), v.min())), float(max(t.max(), v.max()))
    ax.plot([lo, hi], [lo, hi], "k--", lw=0.8)
    ax.set_xlabel("true value")
    ax.set_ylabel("estimate")
    ax.set_title(f"{report.mode} plan, n={report.n}")
    fig.tight_layout()
    fig.savefig(path, dpi=120, metadata={"Software": None})
    plt.close(fig)
    return True
