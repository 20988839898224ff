"""Gaussian-process posterior sampling for sensitivity analysis and optimization.

Function-valued GP samples are drawn with random Fourier features
(weight-space) or pathwise conditioning and used for Sobol' indices and
Thompson-sampling optimization, single- and multi-objective.
"""
__version__ = "0.1.0"

from .errors import (ConfigError, DataError, DegenerateVariance, DimensionMismatch,
                     EmptyCandidates, EmptyData, FitFailed, GPSampleError, InvalidDistribution,
                     IterationFailed, NoFeasiblePoint, NotPositiveDefinite, SingularStiffness)
from .gaussian import (BlockGaussian, GaussianDist, cholesky, condition, matheron_conditional_sample,
                       matheron_update, sample_mvn)
from .kernels import KernelSpec, SpectralDensity, kernel_eval, sample_frequencies, spectral_density_of
from .regression import (Dataset, FittedGP, WeightPosterior, condition_on, fit,
                         log_marginal_likelihood, weight_posterior)
from .features import (FeatureMap, FourierFeatures, HilbertDirichlet, MercerSE, build_feature_map,
                       build_hilbert, build_mercer_se, build_qmc, build_rff)
from .paths import (SamplePath, draw_path, draw_pathwise_path, draw_weight_space_path,
                    exhaustive_sample, pathwise_moments, wasserstein2, weight_space_moments)
from .sobol import (InputDistribution, PickFreeze, SensitivityResult, estimate_indices,
                    generate_pick_freeze, gp_gsa, run_gp_gsa)
from .bo import (AcquisitionSpec, BoCampaign, acquisition_value, gp_ts_so, initial_design,
                 multistart_minimize, new_campaign)
from .moo import (MoCampaign, Nsga2Config, ParetoArchive, gp_ts_mo, hvi, hypervolume,
                  max_hvi_select, new_mo_campaign, nsga2, pareto_sort, reference_point)
from .testbeds import eval_mo_benchmark, eval_so_benchmark, mo_benchmark, so_benchmark
