"""Damping coefficients on the circle: construction, exact cell averages, rate predictions.

A damping function is a finite sum of pieces.  A power piece vanishes on the
window |x - theta| < sigma (angles measured on the circle) and equals
``amplitude * (d**beta + plus_one)`` at distance ``d`` past the window edge.
A bounded piece is a constant level on an angular interval.
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import asdict, dataclass, field
from typing import Union

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(x):
    """Map angles to [-pi, pi)."""
    return np.mod(np.asarray(x, dtype=float) + math.pi, TWO_PI) - math.pi


@dataclass(frozen=True)
class PowerPiece:
    beta: float
    sigma: float
    theta: float = 0.0
    amplitude: float = 1.0
    plus_one: bool = False

    def __post_init__(self):
        if not self.beta > -1.0:
            raise ValueError(f"beta must exceed -1 for integrability, got {self.beta}")
        if not 0.0 <= self.sigma < math.pi:
            raise ValueError(f"sigma must lie in [0, pi), got {self.sigma}")
        if not self.amplitude > 0.0:
            raise ValueError(f"amplitude must be positive, got {self.amplitude}")
        if not math.isfinite(self.theta):
            raise ValueError("theta must be finite")

    def pointwise(self, x):
        d = np.abs(wrap_angle(np.asarray(x, dtype=float) - self.theta)) - self.sigma
        out = np.zeros_like(d)
        on = d > 0
        out[on] = d[on] ** self.beta + (1.0 if self.plus_one else 0.0)
        if self.beta < 0:
            out[d == 0] = math.inf
        return self.amplitude * out

    def _half_primitive(self, s):
        # integral of the piece over [theta, theta + s] for 0 <= s <= pi
        t = np.clip(s - self.sigma, 0.0, None)
        val = t ** (self.beta + 1.0) / (self.beta + 1.0)
        if self.plus_one:
            val = val + t
        return self.amplitude * val

    def mass(self) -> float:
        return float(2.0 * self._half_primitive(math.pi))

    def primitive(self, x):
        """Antiderivative on the real line, continuous, with primitive(theta) = 0."""
        y = np.asarray(x, dtype=float) - self.theta
        periods = np.floor((y + math.pi) / TWO_PI)
        s = y - periods * TWO_PI  # in [-pi, pi)
        return periods * self.mass() + np.sign(s) * self._half_primitive(np.abs(s))


@dataclass(frozen=True)
class BoundedPiece:
    support: tuple
    level: float

    def __post_init__(self):
        a, b = self.support
        object.__setattr__(self, "support", (float(a), float(b)))
        if not b > a:
            raise ValueError(f"support must satisfy a < b, got {self.support}")
        if b - a > TWO_PI:
            raise ValueError("support longer than the circle")
        if not self.level >= 0.0:
            raise ValueError(f"level must be nonnegative, got {self.level}")

    def pointwise(self, x):
        a, b = self.support
        y = np.mod(np.asarray(x, dtype=float) - a, TWO_PI)
        return np.where(y < b - a, self.level, 0.0)

    def mass(self) -> float:
        a, b = self.support
        return float(self.level * (b - a))

    def primitive(self, x):
        a, b = self.support
        y = np.asarray(x, dtype=float) - a
        periods = np.floor(y / TWO_PI)
        r = y - periods * TWO_PI
        return periods * self.mass() + self.level * np.clip(r, 0.0, b - a)


DampingPiece = Union[PowerPiece, BoundedPiece]


@dataclass(frozen=True)
class DampingSpec:
    pieces: tuple = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "pieces", tuple(self.pieces))
        for p in self.pieces:
            if not isinstance(p, (PowerPiece, BoundedPiece)):
                raise TypeError(f"unknown damping piece {p!r}")

    @property
    def is_empty(self) -> bool:
        return len(self.pieces) == 0

    def power_pieces(self):
        return [p for p in self.pieces if isinstance(p, PowerPiece)]

    def to_dict(self) -> dict:
        out = []
        for p in self.pieces:
            if isinstance(p, PowerPiece):
                d = {"kind": "power"}
                d.update(asdict(p))
            else:
                d = {"kind": "bounded", "support": list(p.support), "level": p.level}
            out.append(d)
        return {"pieces": out}

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DampingSpec":
        pieces = []
        for d in data.get("pieces", []):
            kind = d.get("kind")
            if kind == "power":
                pieces.append(
                    PowerPiece(
                        beta=float(d["beta"]),
                        sigma=float(d["sigma"]),
                        theta=float(d.get("theta", 0.0)),
                        amplitude=float(d.get("amplitude", 1.0)),
                        plus_one=bool(d.get("plus_one", False)),
                    )
                )
            elif kind == "bounded":
                pieces.append(BoundedPiece(support=tuple(d["support"]), level=float(d["level"])))
            else:
                raise ValueError(f"unknown piece kind {kind!r}")
        return cls(tuple(pieces))

    @classmethod
    def from_json(cls, text: str) -> "DampingSpec":
        return cls.from_dict(json.loads(text))

    def spec_hash(self) -> str:
        return hashlib.sha256(self.to_json().encode()).hexdigest()[:16]


def sharp_damping(beta: float) -> DampingSpec:
    """W(x) = 1_{|x| >= pi/2} ((|x| - pi/2)**beta + 1), the sharpness example."""
    return DampingSpec((PowerPiece(beta=beta, sigma=math.pi / 2, theta=0.0, plus_one=True),))


def constant_damping(level: float) -> DampingSpec:
    """Constant damping on the whole circle."""
    return DampingSpec((BoundedPiece(support=(-math.pi, math.pi), level=level),))


def eval_pointwise(spec: DampingSpec, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p in spec.pieces:
        out = out + p.pointwise(x)
    return out


def primitive(spec: DampingSpec, x):
    x = np.asarray(x, dtype=float)
    out = np.zeros_like(x)
    for p in spec.pieces:
        out = out + p.primitive(x)
    return out


def cell_average(spec: DampingSpec, a, b):
    """Exact average of W over [a, b] from antiderivatives; intervals may wrap."""
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if np.any(~(b > a)):
        raise ValueError("cell_average needs a < b")
    return (primitive(spec, b) - primitive(spec, a)) / (b - a)


def total_mass(spec: DampingSpec) -> float:
    return float(sum(p.mass() for p in spec.pieces))


@dataclass(frozen=True)
class RatePrediction:
    decay_exponent: float
    resolvent_exponent: float
    normal_p: float
    schrodinger_exponent: float
    beta: float
    mixed: bool = False


def decay_exponent(beta: float) -> float:
    return (beta + 2.0) / (beta + 3.0)


def resolvent_exponent(beta: float) -> float:
    return 1.0 / (2.0 + beta)


def schrodinger_exponent(p: float) -> float:
    if math.isinf(p):
        return 0.5
    return 1.0 / (2.0 + 1.0 / p)


def normal_p_for_beta(beta: float) -> float:
    """Largest p with x**beta locally in L^p near the edge: -1/beta for beta < 0."""
    if beta >= 0.0:
        return math.inf
    return -1.0 / beta


def classify_normal_p(spec: DampingSpec) -> float:
    if spec.is_empty:
        raise ValueError("empty damping has no normal-L^p class")
    betas = [p.beta for p in spec.power_pieces()]
    if not betas:
        return math.inf
    return min(normal_p_for_beta(b) for b in betas)


def predict_rates(spec: DampingSpec) -> RatePrediction:
    """Exponents predicted by the power-law edge profile.

    Several power pieces with different beta are summarized by the largest
    beta and flagged as mixed; the formulas assume a single beta, so a mixed
    prediction is only indicative.  Damping with only bounded pieces is
    treated as beta = 0.
    """
    if spec.is_empty:
        raise ValueError("empty damping: no decay is predicted")
    betas = sorted({p.beta for p in spec.power_pieces()})
    beta = betas[-1] if betas else 0.0
    p = classify_normal_p(spec)
    return RatePrediction(
        decay_exponent=decay_exponent(beta),
        resolvent_exponent=resolvent_exponent(beta),
        normal_p=p,
        schrodinger_exponent=schrodinger_exponent(p),
        beta=beta,
        mixed=len(betas) > 1,
    )


@dataclass(frozen=True)
class MultiplierStats:
    """Ratios ||sqrt(W) u||_{L2} / ||u||_{H^s} over band-limited u.

    ``max`` and ``mean`` summarize the random trials; ``norm`` is the exact
    supremum over the whole band-limited trial space (largest singular value).
    """

    max: float
    mean: float
    norm: float
    resolution: int


def sobolev_multiplier_ratio(
    spec: DampingSpec,
    resolution: int,
    s: float,
    trials: int = 32,
    seed: int = 0,
) -> MultiplierStats:
    """Sample ||sqrt(W) u|| / ||u||_{H^s} for u with frequencies |k| <= resolution // 4.

    W is replaced by its cell averages on a grid of ``resolution`` nodes, and
    the H^s norm uses the Fourier weights (1 + k**2)**s.
    """
    if s < 0:
        raise ValueError(f"Sobolev index must be nonnegative, got {s}")
    if resolution < 16:
        raise ValueError(f"resolution must be at least 16, got {resolution}")
    if trials < 1:
        raise ValueError("trials must be positive")
    dx = TWO_PI / resolution
    x = -math.pi + dx * np.arange(resolution)
    w = cell_average(spec, x - dx / 2, x + dx / 2)
    cutoff = resolution // 4
    ks = np.arange(-cutoff, cutoff + 1)
    # columns map H^s-orthonormal coefficients to sqrt(W) u sampled with L2 weights
    basis = np.exp(1j * np.outer(x, ks)) / math.sqrt(TWO_PI)
    scale = (1.0 + ks.astype(float) ** 2) ** (-s / 2)
    m = np.sqrt(np.clip(w, 0.0, None) * dx)[:, None] * basis * scale[None, :]
    norm = float(np.linalg.svd(m, compute_uv=False)[0])
    rng = np.random.default_rng(seed)
    coeffs = rng.standard_normal((trials, ks.size)) + 1j * rng.standard_normal((trials, ks.size))
    ratios = np.linalg.norm(coeffs @ m.T, axis=1) / np.linalg.norm(coeffs, axis=1)
    return MultiplierStats(max=float(ratios.max()), mean=float(ratios.mean()), norm=norm, resolution=resolution)
