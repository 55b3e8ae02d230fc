"""Spectral regularization filters and their axiom audits.

Each filter is a family phi_lambda approximating t -> 1/t, with certified
constants D >= sup|t*phi|, E >= sup lambda*|phi|, c0 >= sup|1 - t*phi|,
and a qualification nu bounding how fast the residual can be traded
against powers of t.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

AUDIT_SLACK = 1e-9
DEFAULT_Q_VALUES = (0.5, 1.0, 1.5, 2.0)


def _check_range(t: np.ndarray, lam: float) -> np.ndarray:
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ValueError("spectral values t must be nonnegative")
    if not 0.0 < lam <= 1.0:
        raise ValueError("lam must lie in (0, 1]")
    return t


class SpectralFilter:
    """Immutable filter family; subclasses define the scalar function."""

    name: str = ""
    iterative: bool = False
    D: float = 1.0
    E: float = 1.0
    c0: float = 1.0
    qualification: float = 1.0

    def value(self, t, lam: float):
        """phi_lambda(t); vectorized over t, continuous extension at t = 0."""
        raise NotImplementedError

    def residual(self, t, lam: float):
        """r_lambda(t) = 1 - t*phi_lambda(t), computed from value()."""
        t = np.asarray(t, dtype=float)
        return 1.0 - t * self.value(t, lam)

    def declared_cq(self, q: float) -> float | None:
        """Certified qualification constant for exponent q, or None."""
        return None

    def lambda_for_iterations(self, T: int) -> float:
        raise ValueError(f"{self.name} is not an iterative filter")

    def iterations_for_lambda(self, lam: float) -> int:
        raise ValueError(f"{self.name} is not an iterative filter")

    def descriptor(self) -> dict:
        return {"kind": self.name}


class Tikhonov(SpectralFilter):
    name = "tikhonov"
    qualification = 1.0

    def value(self, t, lam):
        t = _check_range(t, lam)
        return 1.0 / (t + lam)

    def declared_cq(self, q):
        # sup_t lambda^{1-q} t^q / (t+lambda) <= 1 holds only for q <= 1
        return 1.0


class SpectralCutoff(SpectralFilter):
    name = "spectral_cutoff"
    qualification = math.inf

    def value(self, t, lam):
        t = _check_range(t, lam)
        # t = lambda is included in the inverted region
        return np.where(t >= lam, 1.0 / np.maximum(t, lam), 0.0)

    def declared_cq(self, q):
        return 1.0


class IterativeFilter(SpectralFilter):
    iterative = True
    alpha: float = 1.0
    alpha_eff: float = 1.0

    def lambda_for_iterations(self, T: int) -> float:
        if T < 1:
            raise ValueError("T must be >= 1")
        return min(1.0, 1.0 / (self.alpha_eff * T))

    def iterations_for_lambda(self, lam: float) -> int:
        if not 0.0 < lam <= 1.0:
            raise ValueError("lam must lie in (0, 1]")
        return max(1, math.ceil(1.0 / (self.alpha_eff * lam)))

    def value(self, t, lam):
        t = _check_range(t, lam)
        return self.value_at_iterations(t, self.iterations_for_lambda(lam))

    def value_at_iterations(self, t, T: int):
        raise NotImplementedError


class Landweber(IterativeFilter):
    name = "landweber"
    qualification = math.inf

    def __init__(self, alpha: float = 1.0):
        if not 0.0 < alpha <= 1.0:
            raise ValueError("step size alpha must lie in (0, 1]")
        self.alpha = float(alpha)
        self.alpha_eff = self.alpha
        self.D = 1.0
        self.E = 1.0 + self.alpha
        self.c0 = 1.0

    def value_at_iterations(self, t, T):
        if T < 1:
            raise ValueError("T must be >= 1")
        t = np.asarray(t, dtype=float)
        # (1 - (1-alpha t)^T)/t via expm1 to avoid cancellation; t=0 -> alpha*T
        out = np.full_like(t, float(self.alpha * T))
        pos = t > 0
        tp = t[pos]
        # expm1/log1p path avoids cancellation for small alpha*t; past 1 the
        # base is nonpositive and the direct power is exact
        with np.errstate(divide="ignore"):
            out[pos] = np.where(
                self.alpha * tp >= 1.0,
                (1.0 - (1.0 - self.alpha * tp) ** T) / tp,
                -np.expm1(T * np.log1p(-np.minimum(self.alpha * tp, 1.0 - 1e-300))) / tp,
            )
        return out

    def declared_cq(self, q):
        # t^q (1-alpha t)^T <= t^q exp(-alpha t T) <= (q/(e alpha T))^q <= (q lam / e)^q
        if q == 0:
            return 1.0
        return max(1.0, (q / math.e) ** q)

    def descriptor(self):
        return {"kind": self.name, "alpha": self.alpha}


class Heavyball(IterativeFilter):
    name = "heavyball"
    qualification = math.inf

    def __init__(self, alpha: float = 0.25, beta: float = 0.9):
        if alpha <= 0:
            raise ValueError("step size alpha must be positive")
        if not 0.0 <= beta < 1.0:
            raise ValueError("momentum beta must lie in [0, 1)")
        self.alpha = float(alpha)
        self.beta = float(beta)
        self.alpha_eff = self.alpha / (1.0 - self.beta)
        if self.alpha_eff > 1.0 + 1e-12:
            raise ValueError(
                "effective step alpha/(1-beta) must be <= 1; reduce alpha or beta"
            )
        # conservative underdamped-oscillation envelope: |r_T| <= beta^{T/2}
        # (1 + T (1 + 1/sqrt(beta))); sup_T T beta^{T/2} = 2/(e ln(1/beta))
        if self.beta > 0:
            osc = 2.0 * (1.0 + 1.0 / math.sqrt(self.beta)) / (math.e * math.log(1.0 / self.beta))
            self.c0 = 1.0 + osc
        else:
            self.c0 = 1.0
        self.D = 1.0 + self.c0
        self.E = (1.0 + self.c0) * (1.0 + self.alpha_eff)

    def value_at_iterations(self, t, T):
        if T < 1:
            raise ValueError("T must be >= 1")
        t = np.asarray(t, dtype=float)
        # scalar shadow of the momentum iteration on a quadratic
        u_prev = np.zeros_like(t)
        u = np.full_like(t, self.alpha)
        for _ in range(T - 1):
            u_next = u + self.alpha * (1.0 - t * u) + self.beta * (u - u_prev)
            u_prev, u = u, u_next
        return u

    def descriptor(self):
        return {"kind": self.name, "alpha": self.alpha, "beta": self.beta}


def make_filter(kind: str, **kwargs) -> SpectralFilter:
    if kind == "tikhonov":
        return Tikhonov()
    if kind == "spectral_cutoff":
        return SpectralCutoff()
    if kind == "landweber":
        return Landweber(**kwargs)
    if kind == "heavyball":
        return Heavyball(**kwargs)
    raise ValueError(f"unknown filter kind {kind!r}")


def filter_value(f: SpectralFilter, t, lam: float):
    return f.value(t, lam)


def residual_value(f: SpectralFilter, t, lam: float):
    return f.residual(t, lam)


def qualification_sufficient(f: SpectralFilter, r: float) -> bool:
    """True iff the filter's qualification covers smoothness r.

    The rate analysis consumes the constants c_{r v 1} and c_{r + 1/2}, so
    the filter must satisfy nu >= max(1, r + 1/2).
    """
    return f.qualification >= max(1.0, 0.5 + r) - 1e-12


@dataclass
class QualificationEntry:
    q: float
    measured: float
    declared: float | None
    passed: bool | None  # None when the constant is reported, not certified


@dataclass
class AuditReport:
    filter_name: str
    declared: dict
    measured: dict
    qualification: list[QualificationEntry] = field(default_factory=list)
    passed: bool = False

    def measured_cq(self, q: float) -> float:
        for entry in self.qualification:
            if entry.q == q:
                return entry.measured
        raise KeyError(f"q = {q} not in audit table")

    def to_json(self) -> str:
        return json.dumps(
            {
                "filter": self.filter_name,
                "constants_declared": self.declared,
                "constants_measured": self.measured,
                "qualification": [
                    {
                        "q": e.q,
                        "measured": e.measured,
                        "declared": e.declared,
                        "pass": e.passed,
                    }
                    for e in self.qualification
                ],
                "pass": self.passed,
            },
            sort_keys=True,
        )


def audit_filter(
    f: SpectralFilter,
    t_grid: np.ndarray | None = None,
    lam_grid: np.ndarray | None = None,
    q_values=DEFAULT_Q_VALUES,
) -> AuditReport:
    """Measure the axiom constants on a dense (t, lambda) grid.

    The report passes iff measured D, E, c0 stay within the declared
    constants and every certified q <= qualification does too.
    """
    if t_grid is None:
        t_grid = np.logspace(-6, 0, 200)
    if lam_grid is None:
        lam_grid = np.logspace(-4, 0, 60)
    t_grid = np.asarray(t_grid, dtype=float)
    lam_grid = np.asarray(lam_grid, dtype=float)
    if t_grid.size * lam_grid.size < 10_000:
        raise ValueError("audit grid must have at least 10^4 points")

    sup_tphi = 0.0
    sup_lamphi = 0.0
    sup_res = 0.0
    cq = {float(q): 0.0 for q in q_values}
    for lam in lam_grid:
        phi = f.value(t_grid, float(lam))
        res = 1.0 - t_grid * phi
        sup_tphi = max(sup_tphi, float(np.max(np.abs(t_grid * phi))))
        sup_lamphi = max(sup_lamphi, float(lam * np.max(np.abs(phi))))
        sup_res = max(sup_res, float(np.max(np.abs(res))))
        for q in cq:
            cq[q] = max(cq[q], float(np.max(np.abs(res) * t_grid**q) / lam**q))

    declared = {"D": f.D, "E": f.E, "c0": f.c0}
    measured = {"D": sup_tphi, "E": sup_lamphi, "c0": sup_res}
    entries = []
    all_pass = (
        sup_tphi <= f.D + AUDIT_SLACK
        and sup_lamphi <= f.E + AUDIT_SLACK
        and sup_res <= f.c0 + AUDIT_SLACK
    )
    for q, value in sorted(cq.items()):
        declared_q = f.declared_cq(q)
        if declared_q is None:
            entries.append(QualificationEntry(q, value, None, None))
            continue
        ok = value <= declared_q + AUDIT_SLACK
        entries.append(QualificationEntry(q, value, declared_q, ok))
        if q <= f.qualification:
            all_pass = all_pass and ok
    return AuditReport(
        filter_name=f.name,
        declared=declared,
        measured=measured,
        qualification=entries,
        passed=all_pass,
    )
