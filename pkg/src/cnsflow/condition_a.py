"""Admissible exponent sextuples and the constants of the contraction argument.

Validation is exact: entries are converted to :class:`fractions.Fraction`
(floats through ``limit_denominator``), so the half-open bounds are decided as
printed, e.g. ``p3 = 4/3`` passes and ``p3 = 2`` fails.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from fractions import Fraction

import scipy.special as sc

__all__ = [
    "KatoIndices",
    "SubCondition",
    "ValidationReport",
    "ContractionBudget",
    "InvalidIndices",
    "validate",
    "beta_fn",
    "contraction_budget",
    "c0_threshold",
    "sweep_indices",
    "REMARK_SET",
    "PROP31_SET",
]

INF = math.inf


class InvalidIndices(ValueError):
    pass


def _frac(x) -> Fraction | float:
    if isinstance(x, Fraction):
        return x
    if isinstance(x, str):
        s = x.strip().lower()
        if s in ("inf", "infinity", "oo"):
            return INF
        return Fraction(s)
    if isinstance(x, int):
        return Fraction(x)
    x = float(x)
    if math.isnan(x):
        raise InvalidIndices("NaN entry in index sextuple")
    if math.isinf(x):
        return INF
    return Fraction(x).limit_denominator(10**9)


def _recip(p) -> Fraction:
    return Fraction(0) if p == INF else 1 / p


@dataclass(frozen=True)
class KatoIndices:
    p1: Fraction | float
    p2: Fraction | float
    p3: Fraction | float
    a1: Fraction
    a2: Fraction
    a3: Fraction

    def __post_init__(self):
        for name in ("p1", "p2", "p3", "a1", "a2", "a3"):
            object.__setattr__(self, name, _frac(getattr(self, name)))
        for name in ("a1", "a2", "a3"):
            if getattr(self, name) == INF:
                raise InvalidIndices(f"{name} must be finite")
        for name in ("p1", "p2", "p3"):
            if getattr(self, name) != INF and getattr(self, name) < 1:
                raise InvalidIndices(f"{name} must be >= 1, got {getattr(self, name)}")
        for name in ("a1", "a2", "a3"):
            if getattr(self, name) < 0:
                raise InvalidIndices(f"{name} must be >= 0, got {getattr(self, name)}")

    @classmethod
    def critical(cls, p1, p2, p3) -> "KatoIndices":
        """Indices with the time weights fixed by scaling criticality."""
        p1, p2, p3 = _frac(p1), _frac(p2), _frac(p3)
        return cls(p1, p2, p3, 1 - _recip(p1), Fraction(1, 2) - _recip(p2), 1 - _recip(p3))

    @property
    def p(self) -> tuple[float, float, float]:
        return tuple(float(v) for v in (self.p1, self.p2, self.p3))

    @property
    def alpha(self) -> tuple[float, float, float]:
        return float(self.a1), float(self.a2), float(self.a3)

    def as_list(self) -> list[str]:
        return [str(v) if v != INF else "inf" for v in (self.p1, self.p2, self.p3, self.a1, self.a2, self.a3)]


REMARK_SET = KatoIndices(Fraction(17, 8), 3, Fraction(15, 8), Fraction(9, 17), Fraction(1, 6), Fraction(7, 15))
PROP31_SET = KatoIndices(Fraction(17, 8), Fraction(17, 8), Fraction(15, 8), Fraction(9, 17), Fraction(1, 34), Fraction(7, 15))


@dataclass(frozen=True)
class SubCondition:
    name: str
    expr: str
    passed: bool
    margin: float
    """Signed slack; nonnegative when the constraint holds (zero on a closed boundary)."""


@dataclass(frozen=True)
class ValidationReport:
    indices: KatoIndices
    checks: tuple[SubCondition, ...]

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def failures(self) -> list[str]:
        return [c.name for c in self.checks if not c.passed]

    def to_dict(self) -> dict:
        return {
            "indices": dict(zip(("p1", "p2", "p3", "a1", "a2", "a3"), self.indices.as_list())),
            "passed": self.passed,
            "checks": [
                {"name": c.name, "expr": c.expr, "passed": c.passed, "margin": c.margin} for c in self.checks
            ],
        }

    def table(self) -> str:
        rows = [f"{'check':6s} {'constraint':34s} {'margin':>12s}  result"]
        for c in self.checks:
            rows.append(f"{c.name:6s} {c.expr:34s} {c.margin:12.5g}  {'PASS' if c.passed else 'FAIL'}")
        rows.append(f"overall: {'PASS' if self.passed else 'FAIL'}")
        return "\n".join(rows)


def validate(idx: KatoIndices) -> ValidationReport:
    r1, r2, r3 = _recip(idx.p1), _recip(idx.p2), _recip(idx.p3)
    a1, a2, a3 = idx.a1, idx.a2, idx.a3
    half, one = Fraction(1, 2), Fraction(1)
    checks: list[SubCondition] = []

    def eq(name, expr, lhs, rhs):
        d = lhs - rhs
        checks.append(SubCondition(name, expr, d == 0, -abs(float(d)) if d else 0.0))

    def le(name, expr, lhs, rhs):  # lhs <= rhs
        checks.append(SubCondition(name, expr, lhs <= rhs, float(rhs - lhs)))

    def lt(name, expr, lhs, rhs):  # lhs < rhs
        checks.append(SubCondition(name, expr, lhs < rhs, float(rhs - lhs)))

    eq("A1.1", "a1 + 1/p1 = 1", a1 + r1, one)
    eq("A1.2", "a2 + 1/p2 = 1/2", a2 + r2, half)
    eq("A1.3", "a3 + 1/p3 = 1", a3 + r3, one)

    le("A2.1", "1/p1 + 1/p2 <= 1", r1 + r2, one)
    lt("A2.2", "p2 in (2, inf]", r2, half)
    # p3 in [4/3, 2)  <=>  1/2 < 1/p3 <= 3/4
    m = min(float(Fraction(3, 4) - r3), float(r3 - half))
    checks.append(SubCondition("A2.3", "p3 in [4/3, 2)", half < r3 <= Fraction(3, 4), m))
    le("A2.4", "1/p1 + 1/p3 <= 3/2", r1 + r3, Fraction(3, 2))

    lt("A3.1", "1/p2 + 1/p3 < 3/2", r2 + r3, Fraction(3, 2))
    le("A3.2", "p1 >= 2", r1, half)
    d = r1 - r2
    checks.append(SubCondition("A3.3", "0 <= 1/p1 - 1/p2 < 1/2", 0 <= d < half, min(float(d), float(half - d))))
    d = r3 - r1
    checks.append(SubCondition("A3.4", "0 < 1/p3 - 1/p1 <= 1/2", 0 < d <= half, min(float(d), float(half - d))))

    lt("A4.1", "a1 + a2 < 1", a1 + a2, one)
    lt("A4.2", "a1 + a3 < 1", a1 + a3, one)
    lt("A4.3", "a2 + a3 < 1", a2 + a3, one)
    lt("A4.4", "a3 < 1/2", a3, half)
    return ValidationReport(idx, tuple(checks))


def beta_fn(a: float, b: float) -> float:
    """Euler Beta function ``Gamma(a) Gamma(b) / Gamma(a + b)``."""
    a, b = float(a), float(b)
    if not (a > 0 and b > 0):
        raise ValueError(f"Beta function needs positive arguments, got ({a}, {b})")
    return float(sc.beta(a, b))


def c0_threshold(p: float) -> float:
    """Smallness level ``min{1/(24 p), 1/96}`` for ``||c0||_inf``."""
    return min(1.0 / (24.0 * p), 1.0 / 96.0)


POLE_LIMIT = 1e8


@dataclass(frozen=True)
class ContractionBudget:
    indices: KatoIndices
    c_master: float
    grad_phi_l2: float
    C112: float
    C113: float
    C223: float
    C212: float
    C333: float
    alpha_lin: float
    beta_args: dict = field(default_factory=dict, compare=False, repr=False)

    @property
    def bilinear(self) -> dict[str, float]:
        return {"B112": self.C112, "B113": self.C113, "B223": self.C223, "B212": self.C212, "B333": self.C333}

    @property
    def K1(self) -> float:
        return 1.0 + self.alpha_lin

    @property
    def K2(self) -> float:
        return self.alpha_lin * (self.C112 + self.C113) + sum(self.bilinear.values())

    @property
    def eps_max(self) -> float:
        return 1.0 / (4.0 * self.K1 * self.K2)

    def ball_radius(self, eps: float) -> float:
        return 2.0 * self.K1 * eps

    def accept_epsilon(self, eps: float) -> float:
        if not 0 < eps < self.eps_max:
            raise ValueError(f"epsilon {eps:.4g} must lie in (0, {self.eps_max:.4g})")
        return eps

    @property
    def divergent(self) -> list[str]:
        """Constants at (or numerically at) a Beta pole."""
        out = [k for k, v in self.bilinear.items() if not (math.isfinite(v) and v < POLE_LIMIT)]
        if not (math.isfinite(self.alpha_lin) and self.alpha_lin < POLE_LIMIT * max(1.0, self.grad_phi_l2 * self.c_master)):
            out.append("L13")
        return out

    def c0_threshold(self, p: float | None = None) -> float:
        return c0_threshold(float(self.indices.p1) if p is None else p)

    def to_dict(self) -> dict:
        return {
            "c_master": self.c_master,
            "grad_phi_l2": self.grad_phi_l2,
            **self.bilinear,
            "alpha_lin": self.alpha_lin,
            "K1": self.K1,
            "K2": self.K2,
            "eps_max": self.eps_max,
            "divergent": self.divergent,
        }


def _beta_or_inf(a, b):
    return beta_fn(a, b) if a > 0 and b > 0 else math.inf


def beta_arguments(idx: KatoIndices) -> dict[str, list[tuple[float, float]]]:
    """Beta-function arguments of every bilinear/linear constant, by operator."""
    r1, r2, r3 = (float(_recip(p)) for p in (idx.p1, idx.p2, idx.p3))
    a1, a2, a3 = idx.alpha
    return {
        "B112": [(0.5 - r2, 1 - a1 - a2)],
        "B113": [(1 - r3, 1 - a1 - a3)],
        "B223": [(1.5 - r2 - r3, 1 - a2 - a3), (1 - r3, 1 - a2 - a3)],
        "B212": [(1 - r1, 1 - a1), (0.5 - r1 + r2, 1 - a1)],
        "B333": [(1 - r3, 1 - 2 * a3)],
        "L13": [(r3 - r1, 1 - a1)],
    }


def contraction_budget(idx: KatoIndices, grad_phi_l2: float = 0.0, c_master: float = 1.0) -> ContractionBudget:
    """Assemble every constant of the fixed-point argument from Beta functions.

    ``c_master`` stands for the generic constant of the semigroup and
    Hardy-Littlewood-Sobolev estimates; all outputs scale linearly in it.
    """
    rep = validate(idx)
    if not rep.passed:
        raise InvalidIndices(f"indices fail {rep.failures()}")
    if grad_phi_l2 < 0 or c_master <= 0:
        raise ValueError("grad_phi_l2 must be >= 0 and c_master > 0")
    args = beta_arguments(idx)
    C = {k: c_master * sum(_beta_or_inf(a, b) for a, b in v) for k, v in args.items() if k != "L13"}
    (la, lb), = args["L13"]
    alpha_lin = c_master * grad_phi_l2 * _beta_or_inf(la, lb) if grad_phi_l2 > 0 else 0.0
    return ContractionBudget(idx, c_master, grad_phi_l2, C["B112"], C["B113"], C["B223"], C["B212"], C["B333"], alpha_lin, args)


def sweep_indices(p_values) -> list[KatoIndices]:
    """Critical sextuples over ``p_values^3`` that satisfy every constraint."""
    out = []
    for p1, p2, p3 in itertools.product(p_values, repeat=3):
        try:
            idx = KatoIndices.critical(p1, p2, p3)
        except InvalidIndices:  # negative critical weight, e.g. p2 < 2
            continue
        if validate(idx).passed:
            out.append(idx)
    return out
