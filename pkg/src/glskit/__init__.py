"""Gumbel-max list sampling: coupled sampling of one target against K proposals.

Submodules: ``rng`` (counter-based shared randomness), ``coupling`` (GLS and
baseline couplers), ``bounds`` (closed-form matching bounds), ``specdec``
(drafter-invariant speculative decoding over tabular models), ``wz``
(one-encoder K-decoder compression with side information), ``stats`` and
``experiments`` (the runner behind the ``glskit`` command).
"""

__version__ = "0.1.0"

from .bounds import (lml_bound, lml_conditional_bound, lml_relaxed_bound, maximal_coupling_prob,
                     strong_variant_accept_bound, weak_coupling_bound, wz_error_bound)
from .coupling import (Categorical, RaceMatrix, build_races, gls_sample, gls_sample_heterogeneous,
                       make_categorical, tv_distance)
from .errors import GLSError
from .rng import SeedContext, derive_uniform, exp_variate
