"""Self-check suites run by ``epideficit verify``.

Each check yields ``(name, residual, tolerance)`` triples and passes when
``residual <= tolerance``.  The fast suite covers closed forms and the
unconditional identities; the full suite adds randomized deficit instances,
the equality characterization and Monte Carlo cross-checks.

Lower bounds ``value >= threshold`` are encoded as ``threshold / value <= 1``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable, Iterable, Iterator

import numpy as np

from . import channel as chn
from . import identities as ids
from . import mixture as mx
from .channel import ChannelView
from .identities import LiebInstance
from .mixture import GaussMix
from .quadrature import QuadSettings, integrate_line

G = GaussMix.gaussian


@dataclass(frozen=True)
class CheckResult:
    name: str
    residual: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.residual <= self.tolerance)

    def as_dict(self) -> dict:
        residual = self.residual if math.isfinite(self.residual) else None
        return {"name": self.name, "residual": residual,
                "tolerance": self.tolerance, "passed": self.passed}


def random_mixture(rng: np.random.Generator, k_max: int = 3) -> GaussMix:
    """Mixture with ``1..k_max`` components, weights >= 0.1, means in [-2, 2],
    variances in [0.25, 2]."""
    k = int(rng.integers(1, k_max + 1))
    w = 0.1 + (1.0 - 0.1 * k) * rng.dirichlet(np.full(k, 2.0))
    return GaussMix.normalized(w, rng.uniform(-2, 2, k), rng.uniform(0.25, 2.0, k))


def bimodal(spread: float = 1.0, var: float = 1.0) -> GaussMix:
    return GaussMix([0.5, 0.5], [-spread, spread], [var, var])


def sample_mixtures() -> list[GaussMix]:
    rng = np.random.default_rng(20240607)
    return [G(0, 1), G(5, 4), bimodal(), bimodal(2, 0.2),
            GaussMix([0.9, 0.1], [0, 10], [1, 1])] + [random_mixture(rng) for _ in range(3)]


def equality_instances() -> list[LiebInstance]:
    return [LiebInstance(G(0, 1), G(0, 1), 0.5), LiebInstance(G(1, 2), G(-1, 2), 0.3),
            LiebInstance(G(0, 0.5), G(3, 0.5), 0.8), LiebInstance(G(-2, 3), G(2, 3), 0.25),
            LiebInstance(G(0, 4), G(0, 4), 0.6)]


def strict_instances() -> list[LiebInstance]:
    return [LiebInstance(G(0, 1), G(0, 1.25), 0.5), LiebInstance(G(0, 1), G(0, 4), 0.5),
            LiebInstance(bimodal(), G(0, 2), 0.5), LiebInstance(bimodal(2, 0.2), G(0, 1), 0.5),
            LiebInstance(GaussMix([0.2, 0.5, 0.3], [-1.5, 0, 1.5], [0.3, 0.6, 0.3]),
                         GaussMix([0.6, 0.4], [-1, 1], [0.5, 0.8]), 0.25)]


def random_instances(count: int = 12, seed: int = 11) -> list[LiebInstance]:
    rng = np.random.default_rng(seed)
    alphas = (0.25, 0.5, 0.8)
    return [LiebInstance(random_mixture(rng), random_mixture(rng), alphas[i % 3]) for i in range(count)]


def kl_pairs() -> list[tuple[GaussMix, GaussMix]]:
    return [(G(1, 1), G(0, 1)), (G(0, 1), G(0, 4)), (bimodal(), G(0, 2)),
            (bimodal(2, 0.2), G(0, 1)), (G(0, 2), bimodal()),
            (GaussMix([0.3, 0.7], [-1, 1], [0.5, 1.0]), GaussMix([0.5, 0.5], [0, 2], [1.0, 0.5]))]


def rel(a: float, b: float) -> float:
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


# -- checks ----------------------------------------------------------------------

def check_densities(s: QuadSettings) -> Iterator[tuple]:
    rng = np.random.default_rng(1)
    for i, gm in enumerate(sample_mixtures()):
        c, hw = gm.window()
        mass = integrate_line(lambda x: mx.pdf(gm, x), s.line(), c, hw).value
        yield f"pdf_mass[{i}]", abs(mass - 1.0), 1e-9
        x = c + 0.5 * hw * rng.uniform(-1, 1, 64)
        h = 1e-5
        fd = (gm.logpdf(x + h) - gm.logpdf(x - h)) / (2 * h)
        sc = mx.score(gm, x)
        yield f"score_fd[{i}]", float(np.max(np.abs(sc - fd) / np.maximum(np.abs(sc), 1e-2))), 1e-6
        _, var = mx.moments(gm)
        yield f"fisher_cramer_rao[{i}]", max(0.0, 1.0 / var - mx.fisher_direct(gm, s)), 1e-12


def check_gaussian_closed_forms(s: QuadSettings) -> Iterator[tuple]:
    for mean, var in ((0, 1), (5, 4), (-1, 0.3)):
        g = G(mean, var)
        yield f"fisher_gauss[{mean},{var}]", abs(mx.fisher_direct(g, s) - 1 / var), 1e-9
        yield f"entropy_gauss[{mean},{var}]", abs(mx.entropy_direct(g, s) - 0.5 * math.log(2 * math.pi * math.e * var)), 1e-9
    yield "mmse_N01_g1", abs(chn.mmse(ChannelView(G(0, 1), 1.0), s) - 0.5), 1e-9


def check_lieb_combine(s: QuadSettings) -> Iterator[tuple]:
    a, b, alpha = bimodal(1.5, 0.5), GaussMix([0.3, 0.3, 0.4], [-1, 0, 2], [0.4, 1, 0.6]), 0.3
    comb = mx.lieb_combine(a, b, alpha)
    sa, sb = mx.scale(a, math.sqrt(1 - alpha)), mx.scale(b, math.sqrt(alpha))
    xs = np.linspace(-4, 4, 32)
    c, hw = sb.window()
    conv = [integrate_line(lambda t: mx.pdf(sa, x - t) * mx.pdf(sb, t), s.line(), c, hw).value for x in xs]
    yield "lieb_combine_convolution", float(np.max(np.abs(np.array(conv) - mx.pdf(comb, xs)))), 1e-8
    h, h1, h2 = (mx.entropy_direct(g, s) for g in (comb, a, b))
    yield "lieb_entropy_sign", max(0.0, (1 - alpha) * h1 + alpha * h2 - h), 1e-8


def check_channel(s: QuadSettings) -> Iterator[tuple]:
    gammas = (0.0, 0.25, 0.5, 1.0, 2.0, 4.0, 8.0, 16.0)
    rng = np.random.default_rng(5)
    for i, gm in enumerate(sample_mixtures()[:5]):
        _, var = mx.moments(gm)
        prev = math.inf
        worst_j = worst_bound = worst_mono = worst_path = 0.0
        for g in gammas:
            ch = ChannelView(gm, g)
            m = chn.mmse(ch, s)
            worst_mono = max(worst_mono, m - prev)
            prev = m
            bound = min(var, 1 / g) if g > 0 else var
            worst_bound = max(worst_bound, m - bound, -m)
            worst_j = max(worst_j, abs(chn.fisher_output(ch, s) - (1 - g * m)))
            c, hw = ch.output.window()
            y = c + 0.5 * hw * rng.uniform(-1, 1, 64)
            d = np.abs(chn.output_score(ch, y, "analytic") - chn.output_score(ch, y, "posterior"))
            worst_path = max(worst_path, float(np.max(d)))
        yield f"mmse_monotone[{i}]", max(0.0, worst_mono), 1e-9
        yield f"mmse_bounds[{i}]", max(0.0, worst_bound), 1e-9
        yield f"fisher_output_identity[{i}]", worst_j, 1e-7
        yield f"score_paths[{i}]", worst_path, 1e-8


def check_suboptimal(s: QuadSettings) -> Iterator[tuple]:
    gm = bimodal()
    ch = ChannelView(gm, 1.5)
    _, var = mx.moments(gm)
    lin = math.sqrt(ch.gamma) * var / (1 + ch.gamma * var)
    estimators = {"posterior_mean": lambda y: chn.posterior_mean(ch, y),
                  "zero": lambda y: np.zeros_like(y),
                  "linear": lambda y: lin * y}
    for name, f in estimators.items():
        p = chn.suboptimal_penalty(ch, f, s)
        yield f"decomposition[{name}]", abs(p.mmse - (p.mse_f - p.penalty)), 1e-7


def check_affinity(s: QuadSettings) -> Iterator[tuple]:
    for var, g in ((4.0, 1.0), (1.0, 2.0), (0.3, 5.0)):
        fit = ids.affinity_diagnostic(ChannelView(G(1.0, var), g), s)
        yield f"affine_gauss_residual[{var},{g}]", fit.residual, 1e-9
        yield f"affine_gauss_slope[{var},{g}]", abs(fit.slope - math.sqrt(g) * var / (1 + g * var)), 1e-9
    for i, gm in enumerate((bimodal(), bimodal(2, 0.2), GaussMix([0.3, 0.7], [-1, 1], [0.5, 0.5]))):
        fit = ids.affinity_diagnostic(ChannelView(gm, 1.0), s)
        yield f"affine_bimodal_nonlinear[{i}]", 1e-4 / max(fit.residual, 1e-300), 1.0


def check_entropy_immse(s: QuadSettings, mixtures: Iterable[GaussMix] = ()) -> Iterator[tuple]:
    for var in (1.0, 4.0, 0.5):
        g = G(0, var)
        yield f"immse_gauss[{var}]", abs(ids.entropy_immse(g, s) - 0.5 * math.log(2 * math.pi * math.e * var)), 1e-5
    for i, gm in enumerate(mixtures):
        yield f"immse_mixture[{i}]", abs(ids.entropy_immse(gm, s) - mx.entropy_direct(gm, s)), 1e-4


def check_closed_form_deficits(s: QuadSettings) -> Iterator[tuple]:
    inst = LiebInstance(G(0, 1), G(0, 4), 0.5)
    gap = 0.5 * math.log(1.25)
    rep = ids.deficit(inst, s)
    yield "lieb_gap_1_4", abs(ids.lieb_gap_direct(inst, s) - gap), 1e-6
    yield "deficit_1_4", abs(rep.delta - gap), 1e-5
    yield "fisher_deficit_1_4", abs(ids.fisher_deficit(inst, 1.0, s) - 9 / 140), 1e-6
    rep = ids.deficit(LiebInstance(G(0, 1), G(0, 1), 0.7), s)
    yield "deficit_equal_gauss", abs(rep.delta), 1e-7
    yield "epi_gap_gauss", abs(ids.epi_gap(G(0, 1), G(0, 4), s)), 1e-6
    yield "epi_to_lieb_gauss", abs(ids.lieb_gap_direct(ids.epi_to_lieb(G(0, 1), G(0, 4), s), s)), 1e-6


def check_unconditional(s: QuadSettings, instances: Iterable[LiebInstance]) -> Iterator[tuple]:
    for i, inst in enumerate(instances):
        yield f"towering[{i}]", ids.towering_residual(inst, 1.0, s), 1e-7
        yield f"score_convolution[{i}]", ids.score_convolution_residual(inst, 1.0, s).convolution, 1e-7


def check_kl(s: QuadSettings, pairs) -> Iterator[tuple]:
    for i, (p, q) in enumerate(pairs):
        d = ids.kl_direct(p, q, s)
        m = ids.kl_mismatched(p, q, s)
        f = ids.kl_via_fisher(p, q, s)
        yield f"kl_triangle[{i}]", max(rel(d, m), rel(d, f), rel(m, f)), 1e-3


def check_deficit_identity(s: QuadSettings, instances) -> Iterator[tuple]:
    for i, inst in enumerate(instances):
        rep = ids.deficit(inst, s)
        yield f"deficit_identity[{i}]", rep.identity_error, 1e-4 * (1 + abs(rep.direct_gap))
        yield f"deficit_nonnegative[{i}]", max(0.0, -rep.delta), 1e-9


def check_equality(s: QuadSettings, gammas=(0.5, 1.0, 2.0)) -> Iterator[tuple]:
    for i, inst in enumerate(equality_instances()):
        yield f"equality_delta[{i}]", ids.deficit(inst, s).delta, 1e-7
        d = ids.diagnostics(inst, gammas, s)
        worst = max(max(r.equality_residuals) for r in d.rows)
        yield f"equality_residuals[{i}]", worst, 1e-6
    for i, inst in enumerate(strict_instances()):
        yield f"strict_delta[{i}]", 1e-4 / max(ids.deficit(inst, s).delta, 1e-300), 1.0
        d = ids.diagnostics(inst, gammas, s)
        least = min(min(r.equality_residuals) for r in d.rows)
        yield f"strict_residuals[{i}]", 1e-5 / max(least, 1e-300), 1.0


def _mc_mean(values: np.ndarray) -> tuple[float, float]:
    return float(np.mean(values)), float(np.std(values) / math.sqrt(values.size))


def check_monte_carlo(s: QuadSettings, seed: int, n: int) -> Iterator[tuple]:
    """Agreement with simulation, reported in units of standard errors."""
    rng = np.random.default_rng(seed)
    gm = bimodal()
    ch = ChannelView(gm, 1.0)
    x, _ = mx.sample_arrays(gm, int(rng.integers(2 ** 31)), n)
    y = x + rng.standard_normal(n)
    est, se = _mc_mean((x - chn.posterior_mean(ch, y)) ** 2)
    yield "mc_mmse_sigmas", abs(est - chn.mmse(ch, s)) / se, 4.0

    inst = LiebInstance(G(0, 1), G(0, 4), 0.5)
    a, b = inst.coefficients
    g = 1.0
    ch1, ch2, chw = inst.channels(g)
    x1, _ = mx.sample_arrays(inst.x1, int(rng.integers(2 ** 31)), n)
    x2, _ = mx.sample_arrays(inst.x2, int(rng.integers(2 ** 31)), n)
    y1 = math.sqrt(g) * x1 + rng.standard_normal(n)
    y2 = math.sqrt(g) * x2 + rng.standard_normal(n)
    gap = chn.posterior_mean(chw, a * y1 + b * y2) - (a * chn.posterior_mean(ch1, y1) + b * chn.posterior_mean(ch2, y2))
    est, se = _mc_mean(gap ** 2)
    yield "mc_deficit_integrand_sigmas", abs(est - ids.deficit_integrand(inst, g, s)) / se, 4.0

    _, var = mx.moments(gm)
    lin = var / (1 + var)
    p = chn.suboptimal_penalty(ch, lambda t: lin * t, s)
    est, se = _mc_mean((x - lin * y) ** 2)
    yield "mc_decomposition_mse_sigmas", abs(est - p.mse_f) / se, 4.0
    est, se = _mc_mean((lin * y - chn.posterior_mean(ch, y)) ** 2)
    yield "mc_decomposition_penalty_sigmas", abs(est - p.penalty) / se, 4.0


def fast_checks(s: QuadSettings) -> list[Callable[[], Iterable[tuple]]]:
    inst = [LiebInstance(bimodal(), G(0, 1), 0.5), LiebInstance(G(0, 1), G(0, 4), 0.5)]
    return [
        lambda: check_densities(s),
        lambda: check_gaussian_closed_forms(s),
        lambda: check_lieb_combine(s),
        lambda: check_channel(s),
        lambda: check_suboptimal(s),
        lambda: check_affinity(s),
        lambda: check_entropy_immse(s, [bimodal(), bimodal(3, 1)]),
        lambda: check_closed_form_deficits(s),
        lambda: check_unconditional(s, inst),
        lambda: check_kl(s, kl_pairs()[:3]),
    ]


def full_checks(s: QuadSettings, seed: int, samples: int) -> list[Callable[[], Iterable[tuple]]]:
    rng = np.random.default_rng(seed)
    return fast_checks(s) + [
        lambda: check_entropy_immse(s, [random_mixture(rng) for _ in range(8)]),
        lambda: check_unconditional(s, strict_instances() + equality_instances()[:2]),
        lambda: check_kl(s, kl_pairs()[3:]),
        lambda: check_deficit_identity(s, random_instances()),
        lambda: check_equality(s),
        lambda: check_monte_carlo(s, seed, samples),
    ]


def run_suite(suite: str, settings: QuadSettings, seed: int = 1, samples: int = 1_000_000) -> list[CheckResult]:
    """Run every check; a check group that raises is recorded as one failure."""
    if suite == "fast":
        groups = fast_checks(settings)
    elif suite == "full":
        groups = full_checks(settings, seed, samples)
    else:
        raise ValueError(f"unknown suite {suite!r}")
    results = []
    for group in groups:
        try:
            for name, residual, tol in group():
                results.append(CheckResult(name, float(residual), float(tol)))
        except (ArithmeticError, ValueError) as exc:
            results.append(CheckResult(f"error: {exc}", math.inf, 0.0))
    return results
