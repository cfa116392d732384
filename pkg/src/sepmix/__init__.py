"""Linear classifiers on a two-class Gaussian family: empirical and exact
expected losses for plain, pairwise-mixed, and coordinate-masked training,
optimizers, a hard-margin solver, and experiment harnesses."""

from .model import (
    KAPPA_INF,
    ConditioningError,
    Dataset,
    LabeledSample,
    ProblemSpec,
    bayes_direction,
    cosine_similarity,
    default_spec_d10,
    default_spec_d20,
    sample_dataset,
)
from .losses import (
    BernoulliMaskScheme,
    BetaLaw,
    ExplicitMaskScheme,
    IdentityMap,
    LambdaLaw,
    MaskScheme,
    MidpointMap,
    MixMap,
    MixupScheme,
    PairDraws,
    PointMassLaw,
    TabulatedMap,
    TrainMode,
    UniformLaw,
    erm_grad,
    erm_hess,
    erm_loss,
    logistic_d1,
    logistic_d2,
    logistic_loss,
    make_mask_pairs,
    make_mixup_pairs,
    mask_grad,
    mask_hess,
    mask_loss,
    mixup_grad,
    mixup_hess,
    mixup_loss,
)
from .expected import (
    MaskCoefficients,
    QuadratureConfig,
    expected_erm,
    expected_erm_grad,
    expected_erm_hess,
    expected_mask,
    expected_mask_grad,
    expected_mask_hess,
    expected_mask_infty,
    expected_mask_infty_grad,
    expected_mask_infty_hess,
    expected_mask_mc,
    expected_mixup,
    expected_mixup_grad,
    expected_mixup_hess,
    mask_coefficients,
)
from .minimize import (
    MinimizeResult,
    MinimizeStatus,
    Objective,
    Trace,
    adam_minimize,
    detect_divergence,
    gd_minimize,
    newton_minimize,
)
from .maxmargin import (
    MarginSolution,
    is_separable,
    solve_max_margin,
)
from .harness import (
    METHODS,
    AggregateRow,
    ComplexityResult,
    SweepConfig,
    SweepTable,
    TrainSettings,
    TrialConfig,
    TrialResult,
    estimate_sample_complexity,
    load_problem_spec,
    run_trial,
    sweep,
    trial_seed,
    write_sweep,
)
try:
    from .mlp2d import (
        AdamConfig,
        DecisionGrid,
        ErmTraining,
        MaskMixupTraining,
        MixupTraining,
        SineDataConfig,
        TwoLayerReLU,
        classification_accuracy,
        decision_grid,
        gen_sine_data,
        large_noise_config,
        nonlinearity_score,
        sign_change_counts,
        small_noise_config,
        train_mlp,
        training_loss,
    )
except ModuleNotFoundError:
    # torch ships as the optional "mlp" extra; the linear-model API works
    # without it and the names above simply stay absent
    pass
from .verify import (
    SUITE_NAMES,
    CheckReport,
    PairPartition,
    build_pair_partition,
    check_erm_norm_bounds,
    check_gaussian_norm_bound,
    check_mask_distortion,
    check_mask_limit,
    check_mixup_norm_bounds,
    check_pair_partition,
    check_pointwise_inequalities,
    example_spec_d2,
    run_suite,
    write_reports,
)

__version__ = "0.1.0"
