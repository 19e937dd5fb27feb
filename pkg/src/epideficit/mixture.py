"""Finite scalar Gaussian mixtures.

Densities are evaluated in log space with a max shift so tails far beyond the
component scales neither underflow nor produce ``0/0`` in scores and
responsibilities.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Optional

import numpy as np

from .quadrature import DEFAULT_SETTINGS, QuadSettings, integrate_line

MIN_VARIANCE = 1e-8
WEIGHT_TOL = 1e-12
LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)


def _frozen(values) -> np.ndarray:
    a = np.array(values, dtype=float).ravel()
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class GaussMix:
    """Mixture ``sum_k w_k N(mu_k, sigma_k^2)`` with immutable parameter arrays."""

    weights: np.ndarray
    means: np.ndarray
    variances: np.ndarray

    def __post_init__(self):
        w, m, v = _frozen(self.weights), _frozen(self.means), _frozen(self.variances)
        if not (w.size == m.size == v.size) or w.size == 0:
            raise ValueError("weights, means and variances need one common length K >= 1")
        if not (np.all(np.isfinite(w)) and np.all(np.isfinite(m)) and np.all(np.isfinite(v))):
            raise ValueError("mixture parameters must be finite")
        if np.any(w <= 0):
            raise ValueError("every weight must be > 0")
        if abs(math.fsum(w) - 1.0) > WEIGHT_TOL:
            raise ValueError(f"weights sum to {math.fsum(w)!r}, not 1")
        if np.any(v < MIN_VARIANCE):
            raise ValueError(f"component variances must be >= {MIN_VARIANCE}")
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "means", m)
        object.__setattr__(self, "variances", v)

    @classmethod
    def gaussian(cls, mean: float = 0.0, variance: float = 1.0) -> "GaussMix":
        return cls([1.0], [mean], [variance])

    @classmethod
    def normalized(cls, weights, means, variances) -> "GaussMix":
        w = np.asarray(weights, dtype=float)
        return cls(w / math.fsum(w), means, variances)

    @property
    def K(self) -> int:
        return self.weights.size

    @property
    def is_gaussian(self) -> bool:
        return self.K == 1 or (np.ptp(self.means) == 0 and np.ptp(self.variances) == 0)

    def __eq__(self, other):
        if not isinstance(other, GaussMix):
            return NotImplemented
        return (np.array_equal(self.weights, other.weights)
                and np.array_equal(self.means, other.means)
                and np.array_equal(self.variances, other.variances))

    __hash__ = None

    def __repr__(self):
        parts = ", ".join(f"{w:.6g}*N({m:.6g}, {v:.6g})"
                          for w, m, v in zip(self.weights, self.means, self.variances))
        return f"GaussMix({parts})"

    def to_dict(self) -> dict:
        return {"weights": self.weights.tolist(), "means": self.means.tolist(),
                "variances": self.variances.tolist()}

    def component_logpdf(self, x) -> np.ndarray:
        """``log w_k + log N(x; mu_k, sigma_k^2)`` with components on a new last axis."""
        x = np.asarray(x, dtype=float)[..., None]
        return (np.log(self.weights) - LOG_SQRT_2PI - 0.5 * np.log(self.variances)
                - 0.5 * (x - self.means) ** 2 / self.variances)

    def responsibilities(self, x) -> tuple[np.ndarray, np.ndarray]:
        """Posterior component probabilities at ``x`` and the log density."""
        lc = self.component_logpdf(x)
        top = np.max(lc, axis=-1, keepdims=True)
        e = np.exp(lc - top)
        s = np.sum(e, axis=-1, keepdims=True)
        return e / s, (top + np.log(s))[..., 0]

    def logpdf(self, x) -> np.ndarray:
        return self.responsibilities(x)[1]

    def window(self, sigmas: float = 10.0) -> tuple[float, float]:
        """Integration window around the overall mean.

        The half-width is ``sigmas`` overall std plus the largest component
        offset, widened if needed so every component's own ``+/- sigmas`` std
        range fits.  The second term matters for a light component that is
        much wider than the rest.
        """
        mean, var = moments(self)
        offset = np.abs(self.means - mean)
        per_component = float(np.max(offset + sigmas * np.sqrt(self.variances)))
        return mean, max(sigmas * math.sqrt(var) + float(np.max(offset)), per_component)


class Sample(NamedTuple):
    value: float
    component: int


def _out(v):
    return float(v) if np.ndim(v) == 0 else v


def pdf(gm: GaussMix, x):
    """Mixture density at ``x`` (scalar or array)."""
    return _out(np.exp(gm.logpdf(x)))


def score(gm: GaussMix, x):
    """Derivative of ``log pdf`` at ``x``: responsibility-weighted component scores."""
    r, _ = gm.responsibilities(x)
    x = np.asarray(x, dtype=float)[..., None]
    return _out(np.sum(r * (gm.means - x) / gm.variances, axis=-1))


def moments(gm: GaussMix) -> tuple[float, float]:
    """Exact mean and variance."""
    mean = float(np.dot(gm.weights, gm.means))
    var = float(np.dot(gm.weights, gm.variances + (gm.means - mean) ** 2))
    return mean, var


def _integrate(gm, integrand, what, settings, trace):
    c, hw = gm.window()
    res = integrate_line(integrand, settings.line(), c, hw).require(what)
    if trace is not None:
        trace.append((what, res))
    return res.value


def fisher_direct(gm: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
                  trace: Optional[list] = None) -> float:
    """Fisher information ``E[score(X)^2]``.

    Raises :class:`~epideficit.quadrature.ConvergenceError` if refinement fails.
    """
    def integrand(x):
        s = score(gm, x)
        return s * s * pdf(gm, x)

    return _integrate(gm, integrand, "fisher_direct", settings, trace)


def entropy_direct(gm: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
                   trace: Optional[list] = None) -> float:
    """Differential entropy in nats, ``-int p log p``."""
    def integrand(x):
        lp = gm.logpdf(x)
        return -np.exp(lp) * lp

    return _integrate(gm, integrand, "entropy_direct", settings, trace)


def scale(gm: GaussMix, c: float) -> GaussMix:
    """Law of ``c * X``."""
    if c == 0:
        raise ValueError("scaling by zero gives a degenerate law")
    return GaussMix(gm.weights, c * gm.means, c * c * gm.variances)


def convolve(a: GaussMix, b: GaussMix) -> GaussMix:
    """Law of ``A + B`` for independent ``A ~ a`` and ``B ~ b``."""
    return GaussMix(np.outer(a.weights, b.weights).ravel(),
                    np.add.outer(a.means, b.means).ravel(),
                    np.add.outer(a.variances, b.variances).ravel())


def lieb_combine(a: GaussMix, b: GaussMix, alpha: float) -> GaussMix:
    """Law of ``sqrt(1 - alpha) A + sqrt(alpha) B`` for independent inputs.

    Components are ordered with the index into ``a`` varying slowest.
    """
    alpha = float(alpha)
    if not 0.0 <= alpha <= 1.0:
        raise ValueError(f"alpha must lie in [0, 1], got {alpha!r}")
    if alpha == 0.0:
        return a
    if alpha == 1.0:
        return b
    return convolve(scale(a, math.sqrt(1.0 - alpha)), scale(b, math.sqrt(alpha)))


def sample_arrays(gm: GaussMix, seed: int, n: int) -> tuple[np.ndarray, np.ndarray]:
    """Draw ``n`` values and their generating component indices."""
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    comp = rng.choice(gm.K, size=n, p=gm.weights)
    values = gm.means[comp] + np.sqrt(gm.variances[comp]) * rng.standard_normal(n)
    return values, comp


def sample(gm: GaussMix, seed: int, n: int) -> list[Sample]:
    values, comp = sample_arrays(gm, seed, n)
    return [Sample(float(v), int(k)) for v, k in zip(values, comp)]
