"""Information backflow under coherently controlled lossy qubit channels.

The package simulates a qubit channel family whose canonical decoherence
rates include an always-negative one, builds two coherent-control
configurations over pairs of channel copies (order superposition and
channel-choice superposition with a control qubit), and detects information
backflow through the time derivative of the probe-pair trace distance.
Closed-form output states, derivative formulas, backflow thresholds and
(a, p) region scans are all cross-checked against direct supermap
simulation and an RK4 master-equation oracle.
"""

from .channel import (
    CanonicalGenerator,
    CptpReport,
    KrausChannel,
    PhiCoefficients,
    apply,
    canonical_rhs,
    choi_matrix,
    completeness_residual,
    compose,
    eternal_nm_generator,
    integrate_canonical,
    phi_t_coefficients,
    phi_t_kraus,
    validate_cptp,
)
from .control import (
    AmplitudeVectors,
    ControlConfig,
    ControlState,
    analytic_state_path,
    analytic_state_switch,
    build_supermap,
    controlled_output,
    default_amplitudes,
    path_config,
    path_coefficients,
    path_kraus,
    switch_config,
    switch_coefficients,
    switch_kraus,
)
from .detect import (
    BACKFLOW_EPS,
    BackflowReport,
    RegionScan,
    analytic_dDdt_path,
    analytic_dDdt_switch,
    asymptotic_threshold,
    bare_dDdt,
    bare_distance,
    central_difference,
    detect_backflow,
    empirical_threshold,
    log_time_grid,
    max_coherent_dDdt_path,
    max_coherent_dDdt_switch,
    path_distance,
    probe_pair,
    scan_region,
    switch_distance,
)
from .qmat import (
    PostSelectionImpossibleError,
    check_density_operator,
    dagger,
    eig_hermitian,
    kron,
    project_control,
    pure_state,
    trace_distance,
)

__all__ = [
    "AmplitudeVectors",
    "BACKFLOW_EPS",
    "BackflowReport",
    "CanonicalGenerator",
    "ControlConfig",
    "ControlState",
    "CptpReport",
    "KrausChannel",
    "PhiCoefficients",
    "PostSelectionImpossibleError",
    "RegionScan",
    "analytic_dDdt_path",
    "analytic_dDdt_switch",
    "analytic_state_path",
    "analytic_state_switch",
    "apply",
    "asymptotic_threshold",
    "bare_dDdt",
    "bare_distance",
    "build_supermap",
    "canonical_rhs",
    "central_difference",
    "check_density_operator",
    "choi_matrix",
    "completeness_residual",
    "compose",
    "controlled_output",
    "dagger",
    "default_amplitudes",
    "detect_backflow",
    "eig_hermitian",
    "empirical_threshold",
    "eternal_nm_generator",
    "integrate_canonical",
    "kron",
    "log_time_grid",
    "max_coherent_dDdt_path",
    "max_coherent_dDdt_switch",
    "path_config",
    "path_coefficients",
    "path_distance",
    "path_kraus",
    "phi_t_coefficients",
    "phi_t_kraus",
    "probe_pair",
    "project_control",
    "pure_state",
    "scan_region",
    "switch_config",
    "switch_coefficients",
    "switch_distance",
    "switch_kraus",
    "trace_distance",
    "validate_cptp",
]
__version__ = "0.1.0"
