"""Near-field activity detection and localization with scanning RISs.

Simulator and analytics for a BS that detects unknown active UEs by
sweeping RIS reflection patterns over sub-regions of a room: channel
synthesis, codebook design by penalized gradient ascent, static/scanned
signal separation with matched filtering, and random-access analytics.
"""

__version__ = "0.1.0"

from .access import (
    AccessConfig,
    DetectionKernel,
    collision_prob,
    detection_prob,
    detections_pmf,
    evolve_phases,
    rb_share_pmf,
    simulate_strategy,
    transition_matrix,
)
from .channel import (
    CarrierGrid,
    ChannelSet,
    PilotBook,
    ProtocolError,
    RxFrame,
    UeState,
    bs_ris_channel,
    build_carrier_grid,
    build_channel_set,
    build_pilot_book,
    cascade_matrix,
    noise_power,
    ris_ue_channel,
    static_channel,
    synthesize_frame,
)
from .detection import (
    DetectionReport,
    FilterBankOutput,
    calibrate_threshold,
    energy_detect,
    matched_filter_bank,
    reference_templates,
    split_components,
)
from .geometry import (
    C0,
    AngleOfArrival,
    PlanarArray,
    Region,
    SingularityError,
    SubRegionPartition,
    build_upa,
    element_gain,
    fraunhofer_distance,
    nf_steering,
    partition_region,
    required_bandwidth_for_range_resolution,
    required_elements_for_angular_resolution,
)
from .harness import (
    run_adaptive_protocol,
    run_detection_phase,
    run_sweep,
    table_audit,
)
from .ris_design import (
    DesignParams,
    RisCodebook,
    RisConfiguration,
    build_codebook,
    design_configuration,
    load_codebook,
    objective,
    save_codebook,
)
from .scenario import (
    IntegrityError,
    Scenario,
    ScenarioError,
    load_scenario,
    sample_ues,
    scenario_hash,
)

__all__ = [
    "AccessConfig",
    "AngleOfArrival",
    "C0",
    "CarrierGrid",
    "ChannelSet",
    "DesignParams",
    "DetectionKernel",
    "DetectionReport",
    "FilterBankOutput",
    "IntegrityError",
    "PilotBook",
    "PlanarArray",
    "ProtocolError",
    "Region",
    "RisCodebook",
    "RisConfiguration",
    "RxFrame",
    "Scenario",
    "ScenarioError",
    "SingularityError",
    "SubRegionPartition",
    "UeState",
    "bs_ris_channel",
    "build_carrier_grid",
    "build_channel_set",
    "build_codebook",
    "build_pilot_book",
    "build_upa",
    "calibrate_threshold",
    "cascade_matrix",
    "collision_prob",
    "design_configuration",
    "detection_prob",
    "detections_pmf",
    "element_gain",
    "energy_detect",
    "evolve_phases",
    "fraunhofer_distance",
    "load_codebook",
    "load_scenario",
    "matched_filter_bank",
    "nf_steering",
    "noise_power",
    "objective",
    "partition_region",
    "rb_share_pmf",
    "reference_templates",
    "required_bandwidth_for_range_resolution",
    "required_elements_for_angular_resolution",
    "ris_ue_channel",
    "run_adaptive_protocol",
    "run_detection_phase",
    "run_sweep",
    "sample_ues",
    "save_codebook",
    "scenario_hash",
    "simulate_strategy",
    "split_components",
    "static_channel",
    "synthesize_frame",
    "table_audit",
]
