"""Entropy power deficit, its equality diagnostics and the I-MMSE style
representations of entropy and relative entropy.

Notation used throughout: ``a = sqrt(1 - alpha)``, ``b = sqrt(alpha)``,
``Y1 = sqrt(g) X1 + Z1``, ``Y2 = sqrt(g) X2 + Z2`` and ``W = a Y1 + b Y2``.
Because ``a Z1 + b Z2`` is standard normal, ``W`` is the output of a single
channel whose input is ``X = a X1 + b X2``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence

import numpy as np

from . import mixture
from .channel import ChannelView, fisher_output, mmse, output_score, posterior_mean
from .mixture import GaussMix, entropy_direct, fisher_direct, lieb_combine
from .quadrature import (DEFAULT_SETTINGS, QuadResult, QuadSettings, integrate_gamma,
                         integrate_line, integrate_plane)

TWO_PI_E = 2.0 * math.pi * math.e
EQUALITY_THRESHOLD = 1e-6
KL_SMALL_GAMMA = 1e-3


@dataclass(frozen=True, eq=False)
class LiebInstance:
    x1: GaussMix
    x2: GaussMix
    alpha: float

    def __post_init__(self):
        alpha = float(self.alpha)
        if not 0.0 <= alpha <= 1.0:
            raise ValueError(f"alpha must lie in [0, 1], got {self.alpha!r}")
        object.__setattr__(self, "alpha", alpha)

    @property
    def degenerate(self) -> bool:
        return self.alpha in (0.0, 1.0)

    @property
    def coefficients(self) -> tuple[float, float]:
        return math.sqrt(1.0 - self.alpha), math.sqrt(self.alpha)

    @property
    def combined(self) -> GaussMix:
        return lieb_combine(self.x1, self.x2, self.alpha)

    def channels(self, gamma: float) -> tuple[ChannelView, ChannelView, ChannelView]:
        """Channels producing ``Y1``, ``Y2`` and ``W`` at SNR ``gamma``."""
        return (ChannelView(self.x1, gamma), ChannelView(self.x2, gamma),
                ChannelView(self.combined, gamma))


@dataclass(frozen=True)
class DeficitReport:
    delta: float
    direct_gap: float
    identity_error: float
    gamma_samples: tuple
    quad: QuadResult
    delta_est_error: float = 0.0

    def as_dict(self) -> dict:
        return {
            "delta": self.delta,
            "delta_est_error": self.delta_est_error,
            "direct_gap": self.direct_gap,
            "identity_error": self.identity_error,
        }


class AffineFit(NamedTuple):
    slope: float
    intercept: float
    residual: float


class ScoreResiduals(NamedTuple):
    convolution: float
    pointwise: float


@dataclass(frozen=True)
class DiagnosticsRow:
    gamma: float
    conditional_gap: float
    towering: float
    score_convolution: float
    score_pointwise: float
    fisher_residual: float
    fit_x1: AffineFit
    fit_x2: AffineFit

    @property
    def equality_residuals(self) -> tuple[float, float, float]:
        return self.conditional_gap, self.score_pointwise, self.fisher_residual


@dataclass(frozen=True)
class DiagnosticsReport:
    rows: tuple
    verdict: str

    def as_dict(self) -> dict:
        out = []
        for r in self.rows:
            out.append({
                "gamma": r.gamma,
                "conditional_gap": r.conditional_gap,
                "towering": r.towering,
                "score_convolution": r.score_convolution,
                "score_pointwise": r.score_pointwise,
                "fisher_residual": r.fisher_residual,
                "fit_x1": r.fit_x1._asdict(),
                "fit_x2": r.fit_x2._asdict(),
            })
        return {"verdict": self.verdict, "rows": out}


def _record(trace, what, res):
    if trace is not None:
        trace.append((what, res))
    return res.value


# -- entropy power and Lieb forms -------------------------------------------

def epi_gap(v: GaussMix, w: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS) -> float:
    """``exp(2 h(V + W)) - exp(2 h(V)) - exp(2 h(W))`` for independent ``V``, ``W``."""
    hs = entropy_direct(mixture.convolve(v, w), settings)
    return math.exp(2 * hs) - math.exp(2 * entropy_direct(v, settings)) - math.exp(2 * entropy_direct(w, settings))


def epi_to_lieb(v: GaussMix, w: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS) -> LiebInstance:
    """Rescale ``(V, W)`` so both have the entropy ``0.5 log(e^{2h(V)} + e^{2h(W)})``."""
    ev = math.exp(2 * entropy_direct(v, settings))
    ew = math.exp(2 * entropy_direct(w, settings))
    alpha = ew / (ev + ew)
    return LiebInstance(mixture.scale(v, 1.0 / math.sqrt(1.0 - alpha)),
                        mixture.scale(w, 1.0 / math.sqrt(alpha)), alpha)


def lieb_gap_direct(inst: LiebInstance, settings: QuadSettings = DEFAULT_SETTINGS,
                    trace: Optional[list] = None) -> float:
    """``h(a X1 + b X2) - (1 - alpha) h(X1) - alpha h(X2)`` from three entropy quadratures."""
    if inst.degenerate:
        return 0.0
    h = entropy_direct(inst.combined, settings, trace)
    h1 = entropy_direct(inst.x1, settings, trace)
    h2 = entropy_direct(inst.x2, settings, trace)
    return h - (1.0 - inst.alpha) * h1 - inst.alpha * h2


# -- the deficit integrand and its equivalent forms ---------------------------

def _plane(inst, gamma, f, what, settings, trace):
    ch1, ch2, _ = inst.channels(gamma)
    c1, h1 = ch1.output.window()
    c2, h2 = ch2.output.window()
    res = integrate_plane(f, settings.plane(), (c1, c2), (h1, h2)).require(what)
    return _record(trace, what, res)


def deficit_integrand(inst: LiebInstance, gamma: float,
                      settings: QuadSettings = DEFAULT_SETTINGS,
                      trace: Optional[list] = None) -> float:
    """``E[(E[X | W] - E[X | Y1, Y2])^2]`` at SNR ``gamma``.

    Integrated over the product law of ``(Y1, Y2)``.  The joint posterior
    mean splits as ``a E[X1|Y1] + b E[X2|Y2]`` by independence.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if inst.degenerate:
        return 0.0
    a, b = inst.coefficients
    ch1, ch2, chw = inst.channels(gamma)

    def f(y1, y2):
        joint = a * posterior_mean(ch1, y1) + b * posterior_mean(ch2, y2)
        gap = posterior_mean(chw, a * y1 + b * y2) - joint
        return gap * gap * mixture.pdf(ch1.output, y1) * mixture.pdf(ch2.output, y2)

    return _plane(inst, gamma, f, "deficit_integrand", settings, trace)


conditional_gap = deficit_integrand


def _fiber_window(inst, gamma, w):
    """Per-``w`` window in ``y1`` covering the conditional law of ``Y1`` given ``W = w``."""
    a, b = inst.coefficients
    ch1, ch2, _ = inst.channels(gamma)
    p, s2 = ch1.output.means[:, None], ch1.output.variances[:, None]
    q, t2 = ch2.output.means[None, :], ch2.output.variances[None, :]
    v = a * a * s2 + b * b * t2
    cvar = (s2 * b * b * t2 / v).ravel()
    gain = (a * s2 / v).ravel()
    base = (p - gain.reshape(v.shape) * (a * p + b * q)).ravel()
    cm = base[None, :] + gain[None, :] * np.asarray(w)[:, None]
    spread = 10.0 * np.sqrt(cvar)[None, :]
    lo = np.min(cm - spread, axis=1)
    hi = np.max(cm + spread, axis=1)
    return (0.5 * (lo + hi))[:, None], (0.5 * (hi - lo))[:, None]


def _fiber_mean(inst, gamma, g, w, settings):
    """``E[g(Y1, Y2) | W = w]`` along the line ``y2 = (w - a y1) / b``."""
    a, b = inst.coefficients
    ch1, ch2, chw = inst.channels(gamma)
    w = np.asarray(w, dtype=float)
    log_norm = (chw.output.logpdf(w) + math.log(b))[:, None]
    center, half = _fiber_window(inst, gamma, w)

    def f(y1):
        y2 = (w[:, None] - a * y1) / b
        wt = np.exp(ch1.output.logpdf(y1) + ch2.output.logpdf(y2) - log_norm)
        return np.stack([g(y1, y2) * wt, wt])

    res = integrate_line(f, settings.line(), center, half).require("fiber conditional mean")
    num, den = res.value
    return num / den


def _fiber_residual(inst, gamma, g, target, what, settings, trace):
    _, _, chw = inst.channels(gamma)
    c, hw = chw.output.window()

    def f(w):
        gap = _fiber_mean(inst, gamma, g, w, settings) - target(w)
        return gap * gap * mixture.pdf(chw.output, w)

    res = integrate_line(f, settings.line(settings.tol2d), c, hw).require(what)
    return _record(trace, what, res)


def towering_residual(inst: LiebInstance, gamma: float,
                      settings: QuadSettings = DEFAULT_SETTINGS,
                      trace: Optional[list] = None) -> float:
    """``E[(E[a E[X1|Y1] + b E[X2|Y2] | W] - E[X | W])^2]``; zero for every law."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if inst.degenerate:
        return 0.0
    a, b = inst.coefficients
    ch1, ch2, chw = inst.channels(gamma)

    def g(y1, y2):
        return a * posterior_mean(ch1, y1) + b * posterior_mean(ch2, y2)

    return _fiber_residual(inst, gamma, g, lambda w: posterior_mean(chw, w),
                           "towering_residual", settings, trace)


def score_convolution_residual(inst: LiebInstance, gamma: float,
                               settings: QuadSettings = DEFAULT_SETTINGS,
                               trace: Optional[list] = None) -> ScoreResiduals:
    """Residuals of the score convolution identity and of its pointwise version.

    ``convolution`` measures ``rho_W(W) - E[a rho_1(Y1) + b rho_2(Y2) | W]``,
    which vanishes for every input law.  ``pointwise`` measures
    ``rho_W(W) - a rho_1(Y1) - b rho_2(Y2)`` under the joint law of
    ``(Y1, Y2)`` and vanishes only for Gaussian inputs of equal variance.
    """
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    if inst.degenerate:
        return ScoreResiduals(0.0, 0.0)
    a, b = inst.coefficients
    ch1, ch2, chw = inst.channels(gamma)

    def g(y1, y2):
        return a * output_score(ch1, y1) + b * output_score(ch2, y2)

    conv = _fiber_residual(inst, gamma, g, lambda w: output_score(chw, w),
                           "score_convolution", settings, trace)

    def f(y1, y2):
        gap = output_score(chw, a * y1 + b * y2) - g(y1, y2)
        return gap * gap * mixture.pdf(ch1.output, y1) * mixture.pdf(ch2.output, y2)

    point = _plane(inst, gamma, f, "score_pointwise", settings, trace)
    return ScoreResiduals(conv, point)


def fisher_deficit(inst: LiebInstance, gamma: Optional[float] = None,
                   settings: QuadSettings = DEFAULT_SETTINGS,
                   trace: Optional[list] = None) -> float:
    """``(1 - alpha) J(Y1) + alpha J(Y2) - J(W)``.

    With ``gamma=None`` the same combination is formed from the inputs
    themselves, ``(1 - alpha) J(X1) + alpha J(X2) - J(a X1 + b X2)``.
    """
    al = inst.alpha
    if gamma is None:
        j1, j2, j = (fisher_direct(x, settings, trace) for x in (inst.x1, inst.x2, inst.combined))
    else:
        if not gamma > 0:
            raise ValueError("gamma must be > 0")
        j1, j2, j = (fisher_output(ch, settings, trace) for ch in inst.channels(gamma))
    return (1.0 - al) * j1 + al * j2 - j


def affinity_diagnostic(ch: ChannelView, settings: QuadSettings = DEFAULT_SETTINGS) -> AffineFit:
    """Least-squares affine fit of ``E[X | Y = y]`` under the law of ``Y``.

    The residual is ``E[(E[X|Y] - slope Y - intercept)^2]``; it vanishes
    exactly when the posterior mean is affine, i.e. for a Gaussian input.
    """
    if not ch.gamma > 0:
        raise ValueError("gamma must be > 0")
    c, hw = ch.output.window()

    def moments(y):
        m = posterior_mean(ch, y)
        return np.stack([y, y * y, m, y * m]) * mixture.pdf(ch.output, y)

    ey, eyy, em, eym = integrate_line(moments, settings.line(), c, hw).require("affine moments").value
    slope = (eym - ey * em) / (eyy - ey * ey)
    intercept = em - slope * ey

    def resid(y):
        r = posterior_mean(ch, y) - slope * y - intercept
        return r * r * mixture.pdf(ch.output, y)

    residual = integrate_line(resid, settings.line(), c, hw).require("affine residual").value
    return AffineFit(float(slope), float(intercept), float(residual))


# -- SNR integrals -------------------------------------------------------------

def entropy_immse(gm: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
                  trace: Optional[list] = None) -> float:
    """Entropy as half the SNR integral of ``mmse(gamma) - 1 / (2 pi e + gamma)``."""
    def f(g):
        return mmse(ChannelView(gm, g), settings) - 1.0 / (TWO_PI_E + g)

    res = integrate_gamma(f, settings.gamma(), workers=settings.workers).require("entropy_immse")
    _record(trace, "entropy_immse", res)
    return 0.5 * res.value


def deficit(inst: LiebInstance, settings: QuadSettings = DEFAULT_SETTINGS,
            trace: Optional[list] = None) -> DeficitReport:
    """The deficit as half the SNR integral of :func:`deficit_integrand`,
    reported next to the gap obtained from direct entropy quadrature."""
    direct = lieb_gap_direct(inst, settings, trace)
    if inst.degenerate:
        res = QuadResult(0.0, 0.0, 0, True)
        return DeficitReport(0.0, direct, abs(direct), (), res)
    res = integrate_gamma(lambda g: deficit_integrand(inst, g, settings), settings.gamma(settings.tol2d, panels=2),
                          workers=settings.workers, keep_samples=True).require("deficit")
    _record(trace, "deficit", res)
    delta = 0.5 * res.value
    return DeficitReport(delta, direct, abs(delta - direct), res.samples, res, 0.5 * res.est_error)


def diagnostics(inst: LiebInstance, gammas: Sequence[float],
                settings: QuadSettings = DEFAULT_SETTINGS) -> DiagnosticsReport:
    """Equality-condition residuals on a grid of SNRs.

    The verdict is ``"equality-case"`` when the conditional gap, the pointwise
    score residual and the Fisher deficit all stay below
    ``EQUALITY_THRESHOLD`` at every grid point, and ``"strict"`` otherwise.
    """
    rows = []
    for g in gammas:
        ch1, ch2, _ = inst.channels(g)
        sc = score_convolution_residual(inst, g, settings)
        rows.append(DiagnosticsRow(
            gamma=float(g),
            conditional_gap=conditional_gap(inst, g, settings),
            towering=towering_residual(inst, g, settings),
            score_convolution=sc.convolution,
            score_pointwise=sc.pointwise,
            fisher_residual=abs(fisher_deficit(inst, g, settings)),
            fit_x1=affinity_diagnostic(ch1, settings),
            fit_x2=affinity_diagnostic(ch2, settings),
        ))
    equal = all(max(r.equality_residuals) <= EQUALITY_THRESHOLD for r in rows)
    return DiagnosticsReport(tuple(rows), "equality-case" if equal else "strict")


# -- relative entropy ----------------------------------------------------------

def kl_direct(p: GaussMix, q: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
              trace: Optional[list] = None) -> float:
    """``int p log(p / q)`` in nats."""
    c, hw = p.window()

    def f(x):
        lp = p.logpdf(x)
        return np.exp(lp) * (lp - q.logpdf(x))

    return _record(trace, "kl_direct", integrate_line(f, settings.line(), c, hw).require("kl_direct"))


def _mismatch_mse(p, q, gamma, settings):
    chp, chq = ChannelView(p, gamma), ChannelView(q, gamma)
    c, hw = chp.output.window()

    def f(y):
        d = posterior_mean(chp, y) - posterior_mean(chq, y)
        return d * d * mixture.pdf(chp.output, y)

    return integrate_line(f, settings.line(), c, hw).require("mismatched mse").value


def kl_mismatched(p: GaussMix, q: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
                  trace: Optional[list] = None) -> float:
    """Relative entropy as half the SNR integral of the mismatched-estimation excess."""
    res = integrate_gamma(lambda g: _mismatch_mse(p, q, g, settings), settings.gamma(),
                          workers=settings.workers).require("kl_mismatched")
    return 0.5 * _record(trace, "kl_mismatched", res)


def relative_fisher(p: GaussMix, q: GaussMix, gamma: float,
                    settings: QuadSettings = DEFAULT_SETTINGS) -> float:
    """``E_P[(rho_P(Y) - rho_Q(Y))^2]`` for the two channel output laws at ``gamma``."""
    if not gamma > 0:
        raise ValueError("gamma must be > 0")
    chp, chq = ChannelView(p, gamma), ChannelView(q, gamma)
    c, hw = chp.output.window()

    def f(y):
        d = output_score(chp, y) - output_score(chq, y)
        return d * d * mixture.pdf(chp.output, y)

    return integrate_line(f, settings.line(), c, hw).require("relative_fisher").value


def kl_via_fisher(p: GaussMix, q: GaussMix, settings: QuadSettings = DEFAULT_SETTINGS,
                  trace: Optional[list] = None) -> float:
    """Relative entropy as half the SNR integral of ``relative_fisher / gamma``.

    Below ``gamma = 1e-3`` the ratio is replaced by the quadratic through its
    values at ``1e-3``, ``2e-3`` and ``4e-3`` and integrated exactly.
    """
    g0 = KL_SMALL_GAMMA
    knots = np.array([g0, 2 * g0, 4 * g0])
    ratios = np.array([relative_fisher(p, q, g, settings) / g for g in knots])
    c2, c1, c0 = np.polyfit(knots, ratios, 2)
    head = c0 * g0 + c1 * g0 ** 2 / 2 + c2 * g0 ** 3 / 3
    res = integrate_gamma(lambda g: relative_fisher(p, q, g, settings) / g, settings.gamma(),
                          lower=g0, workers=settings.workers).require("kl_via_fisher")
    _record(trace, "kl_via_fisher", res)
    return 0.5 * (head + res.value)
