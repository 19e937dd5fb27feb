"""The scalar Gaussian channel ``Y = sqrt(gamma) X + Z`` with ``Z ~ N(0, 1)``.

For a mixture input every component stays Gaussian through the channel, so
posterior responsibilities, means and variances are available in closed form.
Only expectations over ``Y`` need quadrature.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, NamedTuple, Optional

import numpy as np

from . import mixture
from .mixture import GaussMix
from .quadrature import DEFAULT_SETTINGS, QuadSettings, integrate_line, integrate_plane

PATHS = ("analytic", "posterior")


@dataclass(frozen=True, eq=False)
class ChannelView:
    input: GaussMix
    gamma: float

    def __post_init__(self):
        g = float(self.gamma)
        if not (math.isfinite(g) and g >= 0):
            raise ValueError(f"gamma must be finite and >= 0, got {self.gamma!r}")
        object.__setattr__(self, "gamma", g)

    @cached_property
    def output(self) -> GaussMix:
        s = math.sqrt(self.gamma)
        gm = self.input
        return GaussMix(gm.weights, s * gm.means, self.gamma * gm.variances + 1.0)

    @cached_property
    def _gain(self) -> np.ndarray:
        # Per-component slope of the posterior mean in y.
        return math.sqrt(self.gamma) * self.input.variances / (self.gamma * self.input.variances + 1.0)

    def component_posteriors(self, y):
        """Responsibilities ``r_k(y)``, component means ``m_k(y)`` and variances ``v_k``."""
        gm = self.input
        r, _ = self.output.responsibilities(y)
        y = np.asarray(y, dtype=float)[..., None]
        m = gm.means + self._gain * (y - math.sqrt(self.gamma) * gm.means)
        v = gm.variances / (self.gamma * gm.variances + 1.0)
        return r, m, v


@dataclass(frozen=True)
class MmseCurve:
    gammas: tuple
    values: tuple


class Penalty(NamedTuple):
    mmse: float
    mse_f: float
    penalty: float


def output_dist(ch: ChannelView) -> GaussMix:
    return ch.output


def posterior_mean(ch: ChannelView, y):
    r, m, _ = ch.component_posteriors(y)
    return mixture._out(np.sum(r * m, axis=-1))


def posterior_variance(ch: ChannelView, y):
    """``Var[X | Y = y]`` as within-component plus between-component spread.

    Both terms are nonnegative, which avoids the cancellation in
    ``E[X^2 | y] - E[X | y]^2`` at high SNR.
    """
    r, m, v = ch.component_posteriors(y)
    mbar = np.sum(r * m, axis=-1, keepdims=True)
    return mixture._out(np.sum(r * (v + (m - mbar) ** 2), axis=-1))


def _expect_y(ch, integrand, what, settings, trace, tol=None):
    c, hw = ch.output.window()
    res = integrate_line(lambda y: integrand(y) * mixture.pdf(ch.output, y),
                         settings.line(tol), c, hw).require(what)
    if trace is not None:
        trace.append((what, res))
    return res.value


def mmse(ch: ChannelView, settings: QuadSettings = DEFAULT_SETTINGS,
         trace: Optional[list] = None) -> float:
    """Minimum mean square error ``E[(X - E[X|Y])^2]``.

    Integrates the posterior variance against the output density; this equals
    ``E[X^2] - E[E[X|Y]^2]`` but keeps full relative precision when the MMSE is
    small.
    """
    return _expect_y(ch, lambda y: posterior_variance(ch, y), "mmse", settings, trace)


def mmse_curve(gm: GaussMix, gammas, settings: QuadSettings = DEFAULT_SETTINGS) -> MmseCurve:
    gammas = tuple(float(g) for g in gammas)
    if any(b <= a for a, b in zip(gammas, gammas[1:])):
        raise ValueError("gammas must be strictly increasing")
    return MmseCurve(gammas, tuple(mmse(ChannelView(gm, g), settings) for g in gammas))


def output_score(ch: ChannelView, y, path: str = "analytic"):
    """Score of the output law at ``y``.

    ``path="analytic"`` differentiates the output mixture density;
    ``path="posterior"`` uses ``sqrt(gamma) E[X|Y=y] - y``.
    """
    if path == "analytic":
        return mixture.score(ch.output, y)
    if path == "posterior":
        return mixture._out(math.sqrt(ch.gamma) * np.asarray(posterior_mean(ch, y)) - np.asarray(y, dtype=float))
    raise ValueError(f"path must be one of {PATHS}, got {path!r}")


def fisher_output(ch: ChannelView, settings: QuadSettings = DEFAULT_SETTINGS,
                  trace: Optional[list] = None) -> float:
    """Fisher information of ``Y``, always by integrating the analytic score."""
    def integrand(y):
        s = output_score(ch, y, "analytic")
        return s * s

    return _expect_y(ch, integrand, "fisher_output", settings, trace)


def suboptimal_penalty(ch: ChannelView, f: Callable[[np.ndarray], np.ndarray],
                       settings: QuadSettings = DEFAULT_SETTINGS,
                       trace: Optional[list] = None) -> Penalty:
    """MMSE, mean square error of the estimator ``f`` and their gap.

    ``mse_f`` is a two-dimensional integral over the joint law of ``(X, Y)``
    and ``penalty`` integrates ``(f(Y) - E[X|Y])^2`` over ``Y``, so the three
    numbers come from separate computations.  ``f`` must be vectorised.
    """
    c, hw = ch.output.window()
    # A finite second moment is insensitive to widening the window; a divergent one is not.
    with np.errstate(over="ignore", invalid="ignore"):
        second = [integrate_line(lambda y: np.asarray(f(y), dtype=float) ** 2 * mixture.pdf(ch.output, y),
                                 settings.line(), c, w) for w in (hw, 1.5 * hw)]
    if not all(r.converged and math.isfinite(r.value) for r in second) or \
            abs(second[1].value - second[0].value) > \
            1e-6 * max(abs(second[0].value), 1.0) + second[0].est_error + second[1].est_error:
        raise ValueError("E[f(Y)^2] is not finite for this estimator")

    best = mmse(ch, settings, trace)
    penalty = _expect_y(ch, lambda y: (np.asarray(f(y), dtype=float) - posterior_mean(ch, y)) ** 2,
                        "penalty", settings, trace)

    gm, s = ch.input, math.sqrt(ch.gamma)
    xc, xhw = gm.window()

    def joint(x, y):
        lp = gm.logpdf(x) - 0.5 * (y - s * x) ** 2 - mixture.LOG_SQRT_2PI
        return (x - np.asarray(f(y), dtype=float)) ** 2 * np.exp(lp)

    res = integrate_plane(joint, settings.plane(), (xc, c), (xhw, hw)).require("mse_f")
    if trace is not None:
        trace.append(("mse_f", res))
    return Penalty(best, res.value, penalty)
