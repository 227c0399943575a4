"""Projected-ecdf tests of uniformity on the sphere."""

from .chi2mix import TailQuery, algorithm1_pvalue, hbe_tail, imhof_tail, mixture_quantile
from .coeffs import ChiSqMixture, a_coeff, b_sequence, coeff_seq, eigen_dim
from .kernels import AD, CvM, DensityCdf, Dirac, Rothman, cap_intersection, parse_weight, psi
from .projdist import proj_cdf, proj_density, proj_quantile
from .uniftests import TestOutcome, UnitSample, asymptotic_pvalue, run_test, stat_projected

__version__ = "0.1.0"
