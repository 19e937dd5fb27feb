"""Acceptance gate: one test per criterion, each reporting a PASS/FAIL line.

Run alone with ``pytest tests/test_acceptance.py``; the verdict lines appear
in the "acceptance criteria" section of the terminal summary.
"""

import json
import math
import subprocess
import sys
import time
from contextlib import contextmanager

import numpy as np

from conftest import ACCEPTANCE_LINES, gauss_entropy
from epideficit import (ChannelView, GaussMix, LiebInstance, affinity_diagnostic, deficit, diagnostics,
                        entropy_direct, entropy_immse, fisher_deficit, fisher_output, kl_direct,
                        kl_mismatched, kl_via_fisher, lieb_gap_direct, mmse, posterior_mean,
                        score_convolution_residual, suboptimal_penalty, towering_residual)
from epideficit import mixture as mx
from epideficit.verify import (bimodal, equality_instances, kl_pairs, random_mixture, strict_instances,
                               random_instances)

G = GaussMix.gaussian
GRID = (0.5, 1.0, 2.0)


@contextmanager
def criterion(number, title):
    detail = {}
    start = time.perf_counter()
    try:
        yield detail
    except BaseException:
        verdict = "FAIL"
        raise
    else:
        verdict = "PASS"
    finally:
        info = ", ".join(f"{k}={v:.3g}" if isinstance(v, float) else f"{k}={v}" for k, v in detail.items())
        line = f"[{verdict}] criterion {number}: {title} ({info}; {time.perf_counter() - start:.1f}s)"
        ACCEPTANCE_LINES.append(line)
        print(line)


def test_criterion_1_deficit_equals_direct_gap():
    with criterion(1, "SNR-integral deficit equals the direct entropy gap") as d:
        start = time.perf_counter()
        ratios = []
        for inst in random_instances(12):
            rep = deficit(inst)
            assert rep.delta >= -1e-9
            ratios.append(rep.identity_error / (1e-4 * (1 + abs(rep.direct_gap))))
        elapsed = time.perf_counter() - start
        d.update(instances=len(ratios), worst_error_over_tol=max(ratios), runtime_s=elapsed)
        assert {inst.alpha for inst in random_instances(12)} == {0.25, 0.5, 0.8}
        assert max(ratios) <= 1.0
        assert elapsed <= 600


def test_criterion_2_immse_entropy():
    with criterion(2, "entropy from the MMSE integral matches direct quadrature") as d:
        start = time.perf_counter()
        gauss = max(abs(entropy_immse(G(m, v)) - gauss_entropy(v))
                    for m, v in ((0, 1), (0, 4), (2, 0.5), (-1, 9)))
        rng = np.random.default_rng(7)
        mixes = [random_mixture(rng) for _ in range(8)]
        mixed = max(abs(entropy_immse(gm) - entropy_direct(gm)) for gm in mixes)
        elapsed = time.perf_counter() - start
        d.update(gauss_err=gauss, mixture_err=mixed, runtime_s=elapsed)
        assert gauss <= 1e-5
        assert mixed <= 1e-4
        assert elapsed <= 120


def test_criterion_3_equality_characterization():
    with criterion(3, "zero deficit exactly for equal-variance Gaussians") as d:
        eq_delta = max(abs(deficit(inst).delta) for inst in equality_instances())
        strict_delta = min(deficit(inst).delta for inst in strict_instances())
        eq_resid = max(max(r.equality_residuals) for inst in equality_instances()
                       for r in diagnostics(inst, GRID).rows)
        strict_resid = min(min(r.equality_residuals) for inst in strict_instances()
                           for r in diagnostics(inst, GRID).rows)
        d.update(max_equal_delta=eq_delta, min_strict_delta=strict_delta,
                 max_equal_residual=eq_resid, min_strict_residual=strict_resid)
        assert len(equality_instances()) == 5 and len(strict_instances()) == 5
        assert eq_delta <= 1e-7
        assert strict_delta >= 1e-4
        assert eq_resid <= 1e-6
        assert strict_resid > 1e-6


def test_criterion_4_closed_forms():
    with criterion(4, "closed-form Gaussian spot values") as d:
        m = mmse(ChannelView(G(0, 1), 1.0))
        j_err = 0.0
        for gm in (G(0, 1), G(2, 0.3), bimodal(), bimodal(2, 0.2), GaussMix([0.9, 0.1], [0, 10], [1, 1])):
            for g in (0.0, 0.1, 0.5, 1.0, 2.0, 10.0, 100.0):
                ch = ChannelView(gm, g)
                j_err = max(j_err, abs(fisher_output(ch) - (1 - g * mmse(ch))))
        pair = LiebInstance(G(0, 1), G(0, 4), 0.5)
        fd = fisher_deficit(pair, 1.0)
        gap = lieb_gap_direct(pair)
        d.update(mmse_err=abs(m - 0.5), j_identity_err=j_err, fisher_deficit_err=abs(fd - 9 / 140),
                 gap_err=abs(gap - 0.5 * math.log(1.25)))
        assert abs(m - 0.5) <= 1e-9
        assert j_err <= 1e-7
        assert abs(fd - 9 / 140) <= 1e-6
        assert abs(gap - 0.5 * math.log(1.25)) <= 1e-6


def test_criterion_5_unconditional_identities():
    with criterion(5, "unconditional identities hold for every input law") as d:
        decomp = 0.0
        for gm, g in ((bimodal(), 1.5), (bimodal(2, 0.2), 1.0), (G(1, 2), 0.7)):
            ch = ChannelView(gm, g)
            var = mx.moments(gm)[1]
            lin = math.sqrt(g) * var / (1 + g * var)
            for f in (lambda y: posterior_mean(ch, y), lambda y: np.zeros_like(y), lambda y: lin * y):
                p = suboptimal_penalty(ch, f)
                decomp = max(decomp, abs(p.mmse - (p.mse_f - p.penalty)))
        tower = conv = 0.0
        for inst in equality_instances() + strict_instances():
            for g in GRID:
                tower = max(tower, towering_residual(inst, g))
                conv = max(conv, score_convolution_residual(inst, g).convolution)
        d.update(decomposition=decomp, towering=tower, convolution=conv)
        assert decomp <= 1e-7
        assert tower <= 1e-7
        assert conv <= 1e-7


def test_criterion_6_affine_dichotomy():
    with criterion(6, "posterior mean affine exactly for Gaussian inputs") as d:
        gauss_resid = slope_err = 0.0
        for mean, var, g in ((0, 1, 1), (3, 4, 0.5), (-1, 0.3, 5), (0, 10, 2)):
            fit = affinity_diagnostic(ChannelView(G(mean, var), g))
            gauss_resid = max(gauss_resid, fit.residual)
            slope_err = max(slope_err, abs(fit.slope - math.sqrt(g) * var / (1 + g * var)))
        separated = min(affinity_diagnostic(ChannelView(gm, 1.0)).residual
                        for gm in (bimodal(2, 0.2), bimodal(1.5, 0.5), GaussMix([0.3, 0.7], [-1, 1], [0.3, 0.3])))
        d.update(gauss_residual=gauss_resid, slope_err=slope_err, min_bimodal_residual=separated)
        assert gauss_resid <= 1e-9
        assert slope_err <= 1e-9
        assert separated >= 1e-4


def test_criterion_7_kl_representations():
    with criterion(7, "three relative entropy representations agree") as d:
        worst = 0.0
        closed = None
        for p, q in kl_pairs():
            vals = [kl_direct(p, q), kl_mismatched(p, q), kl_via_fisher(p, q)]
            worst = max(worst, (max(vals) - min(vals)) / max(map(abs, vals)))
            if p == G(1, 1) and q == G(0, 1):
                closed = max(abs(v - 0.5) / 0.5 for v in vals)
        d.update(pairs=len(kl_pairs()), worst_rel_spread=worst, closed_form_rel_err=closed)
        assert len(kl_pairs()) == 6
        assert closed is not None and closed <= 1e-3
        assert worst <= 1e-3


def _verify_json(workers):
    proc = subprocess.run([sys.executable, "-m", "epideficit", "verify", "--suite", "fast",
                           "--workers", str(workers)], capture_output=True, text=True, check=False)
    return proc.returncode, proc.stdout


def _without_version(text):
    lines = text.splitlines(keepends=True)
    return "".join(line for line in lines if not line.lstrip().startswith('"version"'))


def test_criterion_8_determinism():
    with criterion(8, "fast verification is byte-identical across runs and thread counts") as d:
        code1, out1 = _verify_json(1)
        code4, out4 = _verify_json(4)
        report = json.loads(out1)
        d.update(checks=report["n_checks"], exit_codes=f"{code1}/{code4}")
        assert code1 == 0 and code4 == 0 and report["passed"]
        assert _without_version(out1) == _without_version(out4)
        assert out1 == out4


if __name__ == "__main__":
    import pytest
    sys.exit(pytest.main([__file__, "-q"]))
