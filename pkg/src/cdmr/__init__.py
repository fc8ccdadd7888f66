"""Simulation and fitting toolkit for spin ensembles coupled to a microwave cavity.

Forward model: defect spin transition frequencies (NV and P1 centers in
diamond), optically pumped polarization, ensemble-cavity coupling from a mode
field map, and the saturable spin-induced shift that makes the cavity
reflectivity nonlinear in drive power.  Analysis: weak-drive Kerr expansion,
Duffing bistability onset, shot-noise sensitivity, and least-squares fitting
of orientations and lineshapes.  The ``cdmr`` CLI wraps it all behind JSON
configs for reproducible sweeps.
"""

__version__ = "0.1.0"

from .cavity import (
    CavityMode,
    ComplexShift,
    SpinEnsembleGroup,
    SweepResult,
    cdmr_sweep,
    effective_frequency,
    ensemble_shift,
    extract_effective_resonance,
    intracavity_photon_number,
    per_spin_shift,
    reflectivity,
    reflectivity_db,
)
from .config import (
    ConfigError,
    RunConfig,
    dbm_to_watts,
    group_builder,
    laser_relaxation,
    list_presets,
    load_config,
    load_preset,
    validate_config,
)
from .constants import DEFAULT_CONSTANTS, NV_AXES, NV_AXIS_LABELS, TWO_PI, PhysicalConstants
from .coupling import (
    CouplingResult,
    FieldMap,
    SampleRegion,
    effective_coupling,
    generate_loop_field,
    load_field_map,
    loop_field_at,
    save_field_map,
    single_spin_coupling,
)
from .fitting import (
    FitResult,
    OdmrDataset,
    fit_cavity_lineshape,
    fit_lorentzian_fwhm,
    fit_orientation,
)
from .nonlinear import (
    BistabilityOnset,
    DuffingParams,
    WeakExpansion,
    bistability_onset,
    cooperativity,
    duffing_steady_states,
    sensitivity,
    weak_expansion,
)
from .polarization import (
    OpticalParams,
    RelaxationState,
    effective_relaxation,
    optical_absorption_rate,
    optical_pumping_rate,
    thermal_polarization,
)
from .spins import (
    FieldOrientation,
    NvTransitionTable,
    nv_exact_levels,
    nv_exact_transitions,
    nv_transition_frequencies,
    p1_exact_levels,
    p1_exact_transitions,
    p1_transition_frequencies,
    rotate_to_unit_vector,
)

__all__ = [name for name in dir() if not name.startswith("_")]
