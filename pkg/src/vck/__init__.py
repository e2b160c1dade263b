"""Virtually continuous kernels on finite product grids.

Thickness of cell sets, the tau metric, the VC1 norm with duality
certificates, step/finite-rank approximation and matrix-distribution
sampling.
"""

from .approx import (CompactnessCertificate, DefectProfile, FiniteRankFunction, StepFit,
                     StepFunction, compactness_certificate, defect_profile, eval_step,
                     finite_rank_fit, fit_step, fit_step_oracle, midrange_step)
from .core import (DiscreteSpace, MetricViolation, PlanClass, PlanMeasure, ValidationError,
                   gen_kernel, gen_plan, gen_set, level_set, make_space, plan_class,
                   uniform_space, validate_metric)
from .sampling import (ClusterPartition, MDComparison, MDSample, PointsTest, compare_md,
                       random_points_sweep, random_points_test, sample_md)
from .thickness import (CertificateError, Refusal, TauResult, ThicknessCertificate,
                        extract_null_cover, tau_distance, thickness, thickness_oracle,
                        thickness_value)
from .vcnorm import (MarkovResult, NormCertificate, SeparableBound, markov_apply, me_norm,
                     pairing, vc_norm, vc_norm_oracle, vc_norm_value)

__version__ = "0.1.0"
