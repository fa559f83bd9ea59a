"""Coupling functions g(s) and their derivatives.

Two families are built in:

* ``Linear(gamma)``: ``g(s) = gamma * s`` (the variational case).
* ``RationalPerturbed(gamma, a, b)``: ``g(s) = gamma * s + a * s**2 / (1 + b * s)``.

Every spec splits as ``g(s) = gamma * s + h(s)`` with ``h(0) = h'(0) = 0``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

KINDS = ("linear", "rational")


@dataclass(frozen=True)
class InteractionSpec:
    kind: str
    gamma: float
    a: float = 0.0
    b: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"unknown interaction kind {self.kind!r}; expected one of {KINDS}")
        if not self.gamma > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        if self.kind == "rational":
            if not self.a >= 0:
                raise ValueError(f"rational coupling needs a >= 0, got {self.a}")
            if not self.b > 0:
                raise ValueError(f"rational coupling needs b > 0, got {self.b}")
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "a", float(self.a) if self.kind == "rational" else 0.0)
        object.__setattr__(self, "b", float(self.b) if self.kind == "rational" else 1.0)

    def __call__(self, s, order: int = 0):
        return evaluate(self, order, s)

    @property
    def alpha(self) -> float:
        """Slope at the trivial density, g'(1)."""
        return float(evaluate(self, 1, 1.0))

    def to_dict(self) -> dict:
        if self.kind == "linear":
            return {"kind": "linear", "gamma": self.gamma}
        return {"kind": "rational", "gamma": self.gamma, "a": self.a, "b": self.b}

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionSpec":
        data = dict(data)
        allowed = {"kind", "gamma", "a", "b"}
        extra = set(data) - allowed
        if extra:
            raise ValueError(f"unknown interaction keys: {sorted(extra)}")
        if "kind" not in data or "gamma" not in data:
            raise ValueError("interaction needs 'kind' and 'gamma'")
        return cls(**data)


def Linear(gamma: float) -> InteractionSpec:
    return InteractionSpec("linear", gamma)


def RationalPerturbed(gamma: float, a: float, b: float) -> InteractionSpec:
    return InteractionSpec("rational", gamma, a, b)


def _as_nonneg(s):
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise ValueError("interaction evaluated at a negative density")
    return s


def evaluate(spec: InteractionSpec, order: int, s):
    """Closed-form g, g', g'', g''' at s >= 0."""
    if order not in (0, 1, 2, 3):
        raise ValueError(f"order must be 0..3, got {order}")
    s = _as_nonneg(s)
    lin = {0: spec.gamma * s, 1: spec.gamma + 0 * s}.get(order, 0 * s)
    if spec.kind == "linear" or spec.a == 0.0:
        return lin
    a, b = spec.a, spec.b
    q = 1.0 + b * s
    if order == 0:
        pert = a * s**2 / q
    elif order == 1:
        pert = a * s * (2.0 + b * s) / q**2
    elif order == 2:
        pert = 2.0 * a / q**3
    else:
        pert = -6.0 * a * b / q**4
    return lin + pert


def h_part(spec: InteractionSpec, order: int, s):
    """Remainder h(s) = g(s) - gamma s (order 0) or h'(s) = g'(s) - gamma (order 1)."""
    if order not in (0, 1):
        raise ValueError(f"h_part supports order 0 or 1, got {order}")
    s = _as_nonneg(s)
    if order == 0:
        return evaluate(spec, 0, s) - spec.gamma * s
    return evaluate(spec, 1, s) - spec.gamma


@dataclass
class AuditReport:
    c_lower: float
    c_upper: float
    monotone: bool
    alpha_positive: bool
    violations: list = field(default_factory=list)

    @property
    def C_g(self) -> float:
        """Tightest constant with C^-1 s <= g(s) <= C s on the sampled range."""
        return max(self.c_upper, 1.0 / self.c_lower)

    @property
    def ok(self) -> bool:
        return self.monotone and self.alpha_positive and not self.violations


def audit(spec: InteractionSpec, s_max: float, n: int = 10_000) -> AuditReport:
    if not s_max > 1:
        raise ValueError("audit range must extend beyond s = 1")
    s = np.linspace(s_max / n, s_max, n)
    g = evaluate(spec, 0, s)
    ratio = g / s
    violations = []
    steps = np.diff(g)
    bad = np.flatnonzero(steps <= 0)
    if bad.size:
        violations.append({"check": "monotone", "at": s[bad].tolist()})
    if not np.all(ratio > 0):
        violations.append({"check": "positive_ratio", "at": s[ratio <= 0].tolist()})
    alpha_ok = bool(evaluate(spec, 1, 1.0) > 0)
    if not alpha_ok:
        violations.append({"check": "alpha", "at": [1.0]})
    return AuditReport(
        c_lower=float(ratio.min()),
        c_upper=float(ratio.max()),
        monotone=bad.size == 0,
        alpha_positive=alpha_ok,
        violations=violations,
    )


@dataclass(frozen=True)
class InteractionPair:
    g1: InteractionSpec
    g2: InteractionSpec

    def __iter__(self):
        return iter((self.g1, self.g2))

    def __getitem__(self, i: int) -> InteractionSpec:
        return (self.g1, self.g2)[i]

    @property
    def alphas(self) -> tuple[float, float]:
        return self.g1.alpha, self.g2.alpha

    @property
    def gammas(self) -> tuple[float, float]:
        return self.g1.gamma, self.g2.gamma

    @property
    def is_linear(self) -> bool:
        return all(g.kind == "linear" or g.a == 0.0 for g in self)

    @property
    def symmetric(self) -> bool:
        return self.g1 == self.g2

    def C_g(self, s_max: float = 16.0) -> float:
        return max(audit(g, s_max).C_g for g in self)

    def to_dict(self) -> dict:
        return {"g1": self.g1.to_dict(), "g2": self.g2.to_dict()}

    @classmethod
    def from_dict(cls, data: dict) -> "InteractionPair":
        extra = set(data) - {"g1", "g2"}
        if extra:
            raise ValueError(f"unknown interaction keys: {sorted(extra)}")
        return cls(InteractionSpec.from_dict(data["g1"]), InteractionSpec.from_dict(data["g2"]))


def linear_pair(gamma1: float = 1.0, gamma2: float = 1.0) -> InteractionPair:
    return InteractionPair(Linear(gamma1), Linear(gamma2))
