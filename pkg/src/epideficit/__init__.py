"""Entropy power deficit and I-MMSE identities for scalar Gaussian mixtures."""

__version__ = "0.1.0"

from .channel import (ChannelView, MmseCurve, fisher_output, mmse, mmse_curve, output_dist,
                      output_score, posterior_mean, suboptimal_penalty)
from .identities import (DeficitReport, DiagnosticsReport, LiebInstance, affinity_diagnostic,
                         conditional_gap, deficit, deficit_integrand, diagnostics, entropy_immse,
                         epi_gap, epi_to_lieb, fisher_deficit, kl_direct, kl_mismatched,
                         kl_via_fisher, lieb_gap_direct, relative_fisher,
                         score_convolution_residual, towering_residual)
from .mixture import (GaussMix, Sample, entropy_direct, fisher_direct, lieb_combine, moments, pdf,
                      sample, score)
from .quadrature import (ConvergenceError, QuadResult, QuadRule, QuadSettings, integrate_gamma,
                         integrate_line, integrate_plane)
