"""Recurrence entanglement purification with noisy local operations.

Simulation and analysis of the two-way purification protocol when every
local operation is itself noisy: exact Bell-label algebra, per-pair
error-flag bookkeeping, the sixteen-coefficient round recurrence with
fixpoint/threshold analysis, finite-population Monte Carlo, and a dense
density-matrix oracle that grounds every label map.
"""

from .bell import (
    BellLabel,
    PauliIndex,
    apply_two_sided_pauli,
    bcnot_map,
    measurement_coincides,
    pauli_shift,
    rotation_step3,
    twirl_dense,
)
from .errors import (
    ConfigError,
    DegenerateRoundError,
    InsufficientTailError,
    NoThresholdError,
    ProtocolHaltError,
    QpurifyError,
)
from .flags import FLAG_UPDATE_TABLE, ErrorFlag, flag_update, record_error, record_two_sided
from .noise import NoiseModel
from .recurrence import (
    BEFORE_BCNOT,
    BEFORE_ROTATION,
    Regime,
    RegimeReport,
    SubensembleState,
    Trajectory,
    classify_regime,
    conditional_fidelity,
    convergence_exponents,
    fidelity,
    find_thresholds,
    iterate,
    one_round,
    scan_werner_grid,
)

__version__ = "0.1.0"

__all__ = [
    "__version__",
    "BellLabel",
    "PauliIndex",
    "ErrorFlag",
    "NoiseModel",
    "SubensembleState",
    "Trajectory",
    "Regime",
    "RegimeReport",
    "pauli_shift",
    "apply_two_sided_pauli",
    "rotation_step3",
    "bcnot_map",
    "measurement_coincides",
    "twirl_dense",
    "record_error",
    "record_two_sided",
    "flag_update",
    "FLAG_UPDATE_TABLE",
    "fidelity",
    "conditional_fidelity",
    "one_round",
    "iterate",
    "classify_regime",
    "find_thresholds",
    "scan_werner_grid",
    "convergence_exponents",
    "BEFORE_ROTATION",
    "BEFORE_BCNOT",
    "QpurifyError",
    "ConfigError",
    "DegenerateRoundError",
    "InsufficientTailError",
    "NoThresholdError",
    "ProtocolHaltError",
]
