"""Perfect sampling for nonhomogeneous Markov chains and HMM smoothing laws.

The package couples finite-state chains from the past over independent
random maps: extend the random flow backward until every starting state has
collapsed to one value, and that value is an exact draw from the marginal law
at the target time.  The same driver applied to observation-conditioned
kernels yields exact draws from hidden-Markov smoothing distributions, pulled
lazily from the observation record.
"""

from .chain import (
    AbsoluteProbabilityCheck,
    KernelSequence,
    MinorizationCertificate,
    as_distribution,
    as_kernel,
    backward_product,
    check_absolute_probabilities,
    dobrushin_coefficient,
    find_minorization,
    stenflo_coefficient,
    total_variation,
    weak_ergodicity_series,
)
from .coupling import (
    ComposedMap,
    CouplingCutoffError,
    CouplingOutcome,
    RandomMap,
    cftp,
    compose,
    exact_coalescence_cdf,
    is_coalesced,
    sample_random_map,
)
from .hmm import (
    CachedConditionalKernels,
    ConditionalKernelSource,
    EmissionModel,
    FiniteObservationSampler,
    HmmCouplingOutcome,
    HmmModel,
    LikelihoodState,
    MultiSampleResult,
    ObservationExhaustedError,
    ObservationStream,
    SmootherResult,
    SufficientConditionsReport,
    approximate_smoother,
    beta_bound,
    conditional_kernel,
    conditional_kernel_window,
    finite_obs_cftp,
    hmm_cftp,
    likelihood_backward_step,
    make_conditional_source,
    multi_sample,
    pairwise_dependence,
    sufficient_conditions_report,
)
from .models import (
    GaussianEmission,
    ModelSpec,
    ParityEmission,
    SimulatedPath,
    TabularEmission,
    degenerate_absolute_probs,
    degenerate_rotation,
    drift_obs,
    gaussian_three_state,
    random_walk_obs,
    reducible_block,
    simulate_hmm,
)
from .rng import RngStream

__version__ = "0.1.0"
