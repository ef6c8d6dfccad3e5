"""kitmon: measurement-only circuits on d=4 qudit Kitaev-type lattices."""

__version__ = "0.1.0"

from .diagnostics import (
    CriticalFit,
    CrossingEstimate,
    EntropyProfile,
    I3Curve,
    MutualInfoResult,
    TopoFit,
    entropy_profile,
    find_crossing,
    fit_critical_collapse,
    fit_topological_entropy,
    mutual_info,
    purification_plateau,
    purification_trace,
)
from .lattice import (
    Bond,
    LatticeGeometry,
    LatticeKind,
    Partition,
    build_geometry,
    check_ensemble,
    partition_cylinders,
    plaquette_operators,
)
from .pauli import PauliString, RegionMask, StabilizerGroup, commutes, gf2_rank, multiply
from .protocol import (
    CircuitConfig,
    MeasurementMix,
    TrajectoryResult,
    flux_purification_time,
    init_state,
    run_step,
    run_trajectory,
    sample_operator,
)
from .simplex import (
    SimplexPoint,
    direction_weights,
    euclidean_radius,
    normalized_point_radius,
    normalized_radius,
    r_edge,
    r_max,
    radius_for_normalized,
    to_probabilities,
)

__all__ = [name for name in dir() if not name.startswith("_")]
