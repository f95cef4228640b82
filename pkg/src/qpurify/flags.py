"""Per-pair classical error-flag bookkeeping.

Noisy local operations are modeled as sampled two-sided Pauli rotations.
A bookkeeping layer in the laboratory records, for each pair, two
classical bits: the error phase bit and the error amplitude bit.  A
sigma_x record inverts the amplitude bit, sigma_z the phase bit, sigma_y
both; recording is an XOR group action, so the order of errors never
matters.

When a control pair is kept after a purification step, its flag is
combined with the measured target pair's flag through a fixed 16-entry
table (``FLAG_UPDATE_TABLE``).  The table is normative here; a
derivation cross-check from the label algebra lives in
:func:`qpurify.oracle.derive_flag_update_table`, and the decisive
end-to-end property (flags become perfectly correlated with the Bell
labels in the low-noise regime, i.e. conditional fidelity -> 1) is
exercised by the recurrence and Monte Carlo suites.
"""

from __future__ import annotations

from enum import IntEnum

import numpy as np

from .bell import PAULI_LABEL_SHIFT, PauliIndex

__all__ = [
    "ErrorFlag",
    "FLAG_UPDATE_TABLE",
    "record_error",
    "record_two_sided",
    "flag_update",
]


class ErrorFlag(IntEnum):
    """Two error bits packed as ``(phase << 1) | amplitude``."""

    CLEAN = 0b00
    AMPLITUDE = 0b01
    PHASE = 0b10
    BOTH = 0b11

    @property
    def error_phase_bit(self) -> int:
        return (self >> 1) & 1

    @property
    def error_amplitude_bit(self) -> int:
        return self & 1


#: Updated flag of a kept control pair, indexed [control flag, target flag].
#: Rows and columns run over (00), (01), (10), (11) in packed order.
FLAG_UPDATE_TABLE = np.array(
    [
        [0b00, 0b00, 0b00, 0b10],
        [0b00, 0b01, 0b11, 0b00],
        [0b00, 0b11, 0b01, 0b00],
        [0b10, 0b00, 0b00, 0b00],
    ],
    dtype=np.uint8,
)


def record_error(flag: ErrorFlag | int, mu: PauliIndex | int) -> ErrorFlag:
    """Flag after recording a one-sided Pauli error on the pair."""
    return ErrorFlag(flag ^ PAULI_LABEL_SHIFT[mu])


def record_two_sided(
    flag: ErrorFlag | int, mu: PauliIndex | int, nu: PauliIndex | int
) -> ErrorFlag:
    """Flag after recording sigma_mu on one side and sigma_nu on the other.

    Both sides' errors land on the single per-pair flag.
    """
    return ErrorFlag(flag ^ PAULI_LABEL_SHIFT[mu] ^ PAULI_LABEL_SHIFT[nu])


def flag_update(control_flag: ErrorFlag | int, target_flag: ErrorFlag | int) -> ErrorFlag:
    """Combined flag of a kept control pair after a purification step."""
    return ErrorFlag(int(FLAG_UPDATE_TABLE[control_flag, target_flag]))
