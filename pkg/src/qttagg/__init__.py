"""Aggregate distributions of weighted sums via QTT Fourier inversion."""

__version__ = "0.1.0"

from .errors import (ConvergenceFailureError, InvalidArgumentError,
                     NumericFailureError, QttaggError, ResourceLimitError)
from .tt import (TensorTrain, TtOperator, apply_operator, bond_cap,
                 tt_add, tt_element, tt_from_bytes, tt_from_dense,
                 tt_from_json, tt_hadamard, tt_hadamard_truncate, tt_inner,
                 tt_norm, tt_scale, tt_to_bytes, tt_to_dense, tt_to_json,
                 tt_truncate)
from .grids import (FrequencyGrid, GridSpec, index_to_point, qtt_chebyshev,
                    qtt_constant, qtt_exponential, qtt_linear, qtt_one_hot,
                    qtt_piecewise_halves, qtt_step, qtt_sum_of_exponentials)
from .fourier import (apply_fourier, dense_dft, dirichlet_kernel_qtt,
                      modulation_qtt, project_lower_half, qft_operator)
from .models import (Bernoulli, Categorical, FilterSpec, Lognormal,
                     WeightedSumModel, categorical_cf_dense,
                     categorical_cf_qtt, filter_eval, filter_qtt,
                     gauss_hermite, gaussian_cf, inv_normal_cdf,
                     lognormal_cf, model_from_json, model_to_json,
                     support_bound_single, support_bound_sum)
from .engine import (CdfApproximation, PdfApproximation, berry_esseen_bound,
                     dense_spectral_cdf, dense_spectral_pdf, error_metrics,
                     gibbs_band_width, qtt_filtered_cf, qtt_spectral_cdf,
                     qtt_spectral_pdf, self_error, subsample_even)
from .risk import (RiskReport, expected_shortfall, qtt_quantile,
                   quadrature_weights_qtt, risk_report, value_at_risk,
                   var_index)
from .baselines import (DiscreteDistribution, SampleSet, exact_cdf,
                        exact_var_es, mc_cdf, mc_sample, mc_var_es,
                        recursive_convolution)
