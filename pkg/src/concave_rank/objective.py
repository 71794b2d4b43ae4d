"""Concave combining functions for pairs of cumulative scores.

Every objective exposes its value, gradient, Fenchel dual and the maximizer of
the Fenchel supremand (the inverse of the gradient map).  The Fenchel dual
follows the convention

    f*(mu, nu) = sup_{alpha, beta >= 0} mu*alpha + nu*beta + f(alpha, beta)

which is finite only for strictly negative arguments.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Mapping

import numpy as np
from scipy.optimize import minimize

# Width of the region below the unconstrained peak of the quadratic combiner
# that is replaced by a strictly increasing concave tail.
QUAD_TAIL = 1e-6

KINDS = ("LogProduct", "LinearSum", "NormalizedSum", "QuadraticNormalized", "ExpPenalty", "Custom")


class ObjectiveError(ValueError):
    """Raised for invalid objective definitions or out-of-domain evaluations."""


class DomainError(ObjectiveError):
    pass


class InvalidObjective(ObjectiveError):
    pass


def _quad_value(x: float) -> float:
    # 2x - x^2, continued past 1 - QUAD_TAIL by a C1 tail with derivative
    # 2h^3 / (x - 1 + 2h)^2 so the function stays strictly increasing.
    h = QUAD_TAIL
    if x <= 1.0 - h:
        return 2.0 * x - x * x
    base = 1.0 - h * h
    return base + 2.0 * h * h - 2.0 * h**3 / (x - 1.0 + 2.0 * h)


def _quad_deriv(x: float) -> float:
    h = QUAD_TAIL
    if x <= 1.0 - h:
        return 2.0 - 2.0 * x
    return 2.0 * h**3 / (x - 1.0 + 2.0 * h) ** 2


def _quad_argmax(m: float) -> float:
    """argmax over x >= 0 of -m*x + quad(x), for m > 0."""
    h = QUAD_TAIL
    if m >= 2.0:
        return 0.0
    if m >= 2.0 * h:
        return 1.0 - m / 2.0
    return 1.0 - 2.0 * h + math.sqrt(2.0 * h**3 / m)


@dataclass(frozen=True)
class ConcaveObjective:
    """A concave, coordinate-wise increasing function of (alpha, beta).

    Use the constructors (:meth:`log_product`, :meth:`linear_sum`, ...) rather
    than building instances directly.  ``params`` is a flat name -> float map,
    which is also what the CLI config uses.
    """

    kind: str
    params: Mapping[str, float] = field(default_factory=dict)
    value_fn: Callable[[float, float], float] | None = field(default=None, compare=False, repr=False)
    grad_fn: Callable[[float, float], tuple[float, float]] | None = field(
        default=None, compare=False, repr=False
    )
    box: float = 1e6

    def __post_init__(self):
        if self.kind not in KINDS:
            raise InvalidObjective(f"unknown objective kind {self.kind!r}")
        object.__setattr__(self, "params", {k: float(v) for k, v in dict(self.params).items()})
        self._check_params()
        self._probe()

    # -- constructors --------------------------------------------------------

    @classmethod
    def log_product(cls) -> "ConcaveObjective":
        return cls("LogProduct")

    @classmethod
    def linear_sum(cls, u: float = 1.0, v: float = 1.0) -> "ConcaveObjective":
        return cls("LinearSum", {"u": u, "v": v})

    @classmethod
    def normalized_sum(cls, s_a: float, s_b: float) -> "ConcaveObjective":
        return cls("NormalizedSum", {"s_a": s_a, "s_b": s_b})

    @classmethod
    def quadratic_normalized(cls, s_a: float, s_b: float) -> "ConcaveObjective":
        return cls("QuadraticNormalized", {"s_a": s_a, "s_b": s_b})

    @classmethod
    def exp_penalty(cls, c1: float, c2: float, s_b: float) -> "ConcaveObjective":
        return cls("ExpPenalty", {"c1": c1, "c2": c2, "s_b": s_b})

    @classmethod
    def custom(cls, value, grad, box: float = 1e6) -> "ConcaveObjective":
        return cls("Custom", {}, value_fn=value, grad_fn=grad, box=box)

    @classmethod
    def from_config(cls, cfg: Mapping) -> "ConcaveObjective":
        """Build from ``{"kind": ..., "params": {...}}``."""
        try:
            kind = cfg["kind"]
        except (KeyError, TypeError):
            raise InvalidObjective("objective config needs a 'kind'") from None
        if kind == "Custom":
            raise InvalidObjective("Custom objectives need callables and cannot be read from config")
        return cls(kind, dict(cfg.get("params", {})))

    def to_config(self) -> dict:
        return {"kind": self.kind, "params": dict(self.params)}

    # -- validation ----------------------------------------------------------

    def _check_params(self):
        required = {
            "LogProduct": (),
            "LinearSum": ("u", "v"),
            "NormalizedSum": ("s_a", "s_b"),
            "QuadraticNormalized": ("s_a", "s_b"),
            "ExpPenalty": ("c1", "c2", "s_b"),
            "Custom": (),
        }[self.kind]
        p = self.params
        missing = [k for k in required if k not in p]
        if missing:
            raise InvalidObjective(f"{self.kind} missing parameters {missing}")
        extra = set(p) - set(required)
        if extra:
            raise InvalidObjective(f"{self.kind} got unknown parameters {sorted(extra)}")
        if any(not math.isfinite(v) for v in p.values()):
            raise InvalidObjective("parameters must be finite")
        # strict monotonicity needs strictly positive slopes / scales
        for k in ("u", "v", "s_a", "s_b", "c1"):
            if k in p and p[k] <= 0:
                raise InvalidObjective(f"{self.kind} needs {k} > 0, got {p[k]}")
        if self.kind == "Custom" and (self.value_fn is None or self.grad_fn is None):
            raise InvalidObjective("Custom objective needs value and gradient callbacks")

    def _probe(self, n: int = 256, seed: int = 0):
        """Seeded midpoint-concavity and monotonicity probes on [1e-3, 1e3]^2.

        Cheap detection of broken objectives, not a proof.  Gradients that
        decay to exactly zero in floating point are tolerated here; ``grad``
        itself rejects them at evaluation points.
        """
        rng = np.random.default_rng(seed)
        pts = 10.0 ** rng.uniform(-3, 3, size=(n, 2))
        other = 10.0 ** rng.uniform(-3, 3, size=(n, 2))
        for (x1, y1), (x2, y2) in zip(pts, other):
            v1, v2 = self.value(x1, y1), self.value(x2, y2)
            vm = self.value((x1 + x2) / 2, (y1 + y2) / 2)
            if not vm >= (v1 + v2) / 2 - 1e-9 * (1 + abs(v1) + abs(v2)):
                raise InvalidObjective(
                    f"{self.kind} fails midpoint concavity between {(x1, y1)} and {(x2, y2)}"
                )
            gp, gq = self._raw_grad(x1, y1)
            if not (gp >= 0 and gq >= 0 and math.isfinite(gp) and math.isfinite(gq)):
                raise InvalidObjective(f"{self.kind} is not increasing at {(x1, y1)}: grad=({gp}, {gq})")

    # -- evaluation ----------------------------------------------------------

    def value(self, alpha: float, beta: float) -> float:
        """f(alpha, beta).  LogProduct returns -inf on the axes."""
        alpha = float(alpha)
        beta = float(beta)
        if math.isnan(alpha) or math.isnan(beta):
            raise DomainError("nan argument")
        k, p = self.kind, self.params
        if k == "LogProduct":
            if alpha < 0 or beta < 0:
                raise DomainError(f"LogProduct undefined at ({alpha}, {beta})")
            if alpha == 0 or beta == 0:
                return -math.inf
            return math.log(alpha) + math.log(beta)
        if k == "LinearSum":
            return p["u"] * alpha + p["v"] * beta
        if k == "NormalizedSum":
            return alpha / p["s_a"] + beta / p["s_b"]
        if k == "QuadraticNormalized":
            return _quad_value(alpha / p["s_a"]) + _quad_value(beta / p["s_b"])
        if k == "ExpPenalty":
            return alpha - math.exp(-p["c1"] * beta / p["s_b"] - p["c2"])
        return float(self.value_fn(alpha, beta))

    __call__ = value

    def _raw_grad(self, alpha: float, beta: float) -> tuple[float, float]:
        k, p = self.kind, self.params
        if k == "LogProduct":
            if alpha <= 0 or beta <= 0:
                raise DomainError(f"LogProduct gradient undefined at ({alpha}, {beta})")
            return 1.0 / alpha, 1.0 / beta
        if k == "LinearSum":
            return p["u"], p["v"]
        if k == "NormalizedSum":
            return 1.0 / p["s_a"], 1.0 / p["s_b"]
        if k == "QuadraticNormalized":
            return _quad_deriv(alpha / p["s_a"]) / p["s_a"], _quad_deriv(beta / p["s_b"]) / p["s_b"]
        if k == "ExpPenalty":
            s = p["c1"] / p["s_b"]
            return 1.0, s * math.exp(-s * beta - p["c2"])
        gp, gq = self.grad_fn(alpha, beta)
        return float(gp), float(gq)

    def grad(self, alpha: float, beta: float) -> tuple[float, float]:
        """Gradient (p, q); both components must come out strictly positive."""
        gp, gq = self._raw_grad(float(alpha), float(beta))
        if not (gp > 0 and gq > 0) or not (math.isfinite(gp) and math.isfinite(gq)):
            raise InvalidObjective(
                f"{self.kind} gradient ({gp}, {gq}) at ({alpha}, {beta}) is not strictly positive"
            )
        return gp, gq

    def grad_ratio(self, alpha: float, beta: float) -> float:
        """q/p of the gradient: the slope of the dual direction it points to."""
        gp, gq = self.grad(alpha, beta)
        return gq / gp

    # -- duality -------------------------------------------------------------

    def conjugate_argmax(self, mu: float, nu: float) -> tuple[float, float]:
        """Maximizer over the closed quadrant of mu*alpha + nu*beta + f.

        For strictly concave kinds this inverts the gradient:
        ``conjugate_argmax(-p, -q) == (alpha, beta)`` iff ``grad(alpha, beta) == (p, q)``.
        Raises when the supremum is infinite or not attained.
        """
        mu = float(mu)
        nu = float(nu)
        if not (mu < 0 and nu < 0):
            raise DomainError(f"Fenchel supremum is +inf at ({mu}, {nu})")
        k, p = self.kind, self.params
        if k == "LogProduct":
            return -1.0 / mu, -1.0 / nu
        if k in ("LinearSum", "NormalizedSum"):
            u, v = (p["u"], p["v"]) if k == "LinearSum" else (1 / p["s_a"], 1 / p["s_b"])
            if mu > -u or nu > -v:
                raise DomainError(f"{k} Fenchel supremum is +inf at ({mu}, {nu})")
            # the maximizer is not unique when mu == -u; the origin is one of them
            return 0.0, 0.0
        if k == "QuadraticNormalized":
            sa, sb = p["s_a"], p["s_b"]
            return sa * _quad_argmax(-mu * sa), sb * _quad_argmax(-nu * sb)
        if k == "ExpPenalty":
            if mu > -1.0:
                raise DomainError(f"ExpPenalty Fenchel supremum is +inf at mu={mu}")
            s = p["c1"] / p["s_b"]
            beta = (-p["c2"] - math.log(-nu / s)) / s
            return 0.0, max(beta, 0.0)
        return self._numeric_argmax(mu, nu)

    def _numeric_argmax(self, mu: float, nu: float) -> tuple[float, float]:
        # The supremand is concave, so any local maximum on the box is global.
        def neg(x):
            return -(mu * x[0] + nu * x[1] + self.value(x[0], x[1]))

        def neg_grad(x):
            gp, gq = self._raw_grad(x[0], x[1])
            return -np.array([mu + gp, nu + gq])

        lo = 1e-12
        x0 = np.array([1.0, 1.0])
        res = minimize(
            neg, x0, jac=neg_grad, method="L-BFGS-B",
            bounds=[(lo, self.box), (lo, self.box)],
            options={"ftol": 1e-15, "gtol": 1e-12, "maxiter": 2000},
        )
        x = res.x
        if np.any(x >= self.box * (1 - 1e-9)):
            raise DomainError(f"Fenchel supremum not attained inside the box at ({mu}, {nu})")
        return float(x[0]), float(x[1])

    def fenchel(self, mu: float, nu: float) -> float:
        """f*(mu, nu); +inf outside the negative quadrant or where unbounded."""
        mu = float(mu)
        nu = float(nu)
        if not (mu < 0 and nu < 0):
            return math.inf
        k, p = self.kind, self.params
        if k == "LogProduct":
            return -math.log(mu * nu) - 2.0
        if k in ("LinearSum", "NormalizedSum"):
            u, v = (p["u"], p["v"]) if k == "LinearSum" else (1 / p["s_a"], 1 / p["s_b"])
            return 0.0 if (mu <= -u and nu <= -v) else math.inf
        if k == "ExpPenalty" and mu > -1.0:
            return math.inf
        alpha, beta = self.conjugate_argmax(mu, nu)
        return mu * alpha + nu * beta + self.value(alpha, beta)

    def inverse_grad(self, p: float, q: float) -> tuple[float, float]:
        """The (alpha, beta) whose gradient is (p, q)."""
        if self.kind in ("LinearSum", "NormalizedSum", "ExpPenalty"):
            raise InvalidObjective(f"{self.kind} gradient is not invertible")
        return self.conjugate_argmax(-p, -q)

    @property
    def strictly_concave(self) -> bool:
        return self.kind in ("LogProduct", "QuadraticNormalized", "Custom")


def objective_for(kind: str, s_a: float | None = None, s_b: float | None = None, **params) -> ConcaveObjective:
    """Convenience builder that fills normalization scales from arguments."""
    if kind in ("NormalizedSum", "QuadraticNormalized"):
        params.setdefault("s_a", s_a)
        params.setdefault("s_b", s_b)
    if kind == "ExpPenalty":
        params.setdefault("s_b", s_b)
    if kind == "LinearSum":
        params.setdefault("u", 1.0)
        params.setdefault("v", 1.0)
    return ConcaveObjective(kind, params)
