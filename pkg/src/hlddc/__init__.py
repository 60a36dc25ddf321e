"""Data-driven model-reference control of sampled-data loops.

A discrete controller is identified by Loewner interpolation of the ideal
controller's frequency response, corrected for the zero-order hold, so the
hybrid loop (sampler, controller, hold, continuous plant) matches a
reference model up to the Nyquist frequency.
"""

from .errors import HlddcError, InputError, NumericalError
from .hybrid import (
    HybridLoop,
    Metrics,
    StabilityVerdict,
    closed_loop_response,
    hybrid_stability_check,
    loop_gain_response,
    mismatch_metrics,
    reference_mismatch,
    simulate_hybrid_step,
    trace_distance,
)
from .loewner import (
    InterpolationSet,
    LoewnerPencil,
    build_pencil,
    conjugate_close,
    interpolation_error,
    loewner_fit,
    numerical_order,
    partition,
    realify,
    realize,
)
from .lti import (
    DescriptorSS,
    RationalTF,
    SimulationTrace,
    evaluate,
    freqresp,
    is_stable,
    poles,
    ss_to_tf,
    step_response,
    tf_to_ss,
    to_standard_form,
    tustin_discretize,
    zoh_discretize,
)
from .synthesis import (
    PlantData,
    SynthesisOptions,
    SynthesisReport,
    SynthesisResult,
    balanced_truncation,
    hold_response,
    ideal_ct_controller_response,
    ideal_dt_controller_response,
    reduce_order,
    sample_grid,
    sample_plant,
    stable_projection,
    synthesize_hlddc,
    synthesize_lddc_continuous,
)

__version__ = "0.1.0"
