"""Two-qubit Pauli noise channels for the local operations.

A noise model is a joint distribution ``f[mu, nu]`` over the sixteen
rotations sigma_mu x sigma_nu applied to the two qubits that a local
two-qubit operation touches: on the noisy side, ``mu`` lands on the
control pair's qubit and ``nu`` on the target pair's qubit.  ``f[0, 0]``
is the no-error probability.  The channel fires once per pair of pairs
per purification round (see :mod:`qpurify.recurrence` for the placement
convention); since only relative Bell-label shifts matter, noise in one
laboratory is the canonical setup and noise in both labs composes into a
channel of the same form.

Two named families cover the usual parameterizations:

* ``product``: independent one-qubit depolarizing channels on both
  qubits, ``f[mu, nu] = g[mu] * g[nu]`` with ``g = (f0, r, r, r)`` and
  ``r = (1 - f0)/3``.
* ``uniform``: ``f[0, 0] = f00`` with the remaining probability spread
  evenly over the fifteen error rotations.

Models serialize to the configuration forms ``{"family": "product",
"f0": x}``, ``{"family": "uniform", "f00": x}`` and ``{"family":
"explicit", "f": [16 numbers]}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .bell import PAULI_LABEL_SHIFT, PauliIndex

__all__ = [
    "NoiseModel",
    "EVENT_CONTROL_SHIFTS",
    "EVENT_TARGET_SHIFTS",
    "EVENT_COMBINED_SHIFTS",
    "PROBABILITY_ATOL",
]

#: Tolerance on distribution normalization.
PROBABILITY_ATOL = 1e-12

#: Packed label shift that event ``e = mu * 4 + nu`` puts on the control pair.
EVENT_CONTROL_SHIFTS = np.array(
    [PAULI_LABEL_SHIFT[e >> 2] for e in range(16)], dtype=np.uint8
)

#: Packed label shift that event ``e = mu * 4 + nu`` puts on the target pair.
EVENT_TARGET_SHIFTS = np.array(
    [PAULI_LABEL_SHIFT[e & 3] for e in range(16)], dtype=np.uint8
)

#: Combined packed shift when both rotations of event ``e`` land on one pair.
EVENT_COMBINED_SHIFTS = EVENT_CONTROL_SHIFTS ^ EVENT_TARGET_SHIFTS


def _check_probability(value: float, name: str) -> float:
    value = float(value)
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")
    return value


@dataclass(frozen=True, eq=False)
class NoiseModel:
    """Joint distribution over the sixteen two-sided Pauli rotations."""

    f: np.ndarray
    config: dict | None = field(default=None, compare=False)

    def __post_init__(self):
        f = np.array(self.f, dtype=float)
        if f.shape == (16,):
            f = f.reshape(4, 4)
        if f.shape != (4, 4):
            raise ValueError(f"noise table must have 16 entries, got shape {f.shape}")
        if f.min() < 0.0:
            raise ValueError(f"noise probabilities must be nonnegative, min {f.min()}")
        if abs(f.sum() - 1.0) > PROBABILITY_ATOL:
            raise ValueError(f"noise probabilities sum to {f.sum()!r}, not 1")
        f.setflags(write=False)
        object.__setattr__(self, "f", f)

    # -- constructors -------------------------------------------------------

    @classmethod
    def identity(cls) -> "NoiseModel":
        """Deterministic identity channel (no errors)."""
        return cls.from_one_qubit_depolarizing(1.0)

    @classmethod
    def from_one_qubit_depolarizing(cls, f0: float) -> "NoiseModel":
        """Independent depolarizing channel on each of the pair's qubits.

        Each qubit is left alone with probability ``f0`` and rotated by
        each of sigma_x, sigma_y, sigma_z with probability ``(1-f0)/3``.
        """
        f0 = _check_probability(f0, "f0")
        g = np.full(4, (1.0 - f0) / 3.0)
        g[0] = f0
        return cls(np.outer(g, g), config={"family": "product", "f0": f0})

    @classmethod
    def from_uniform_residual(cls, f00: float) -> "NoiseModel":
        """White-noise family: no error with ``f00``, the rest uniform."""
        f00 = _check_probability(f00, "f00")
        f = np.full(16, (1.0 - f00) / 15.0)
        f[0] = f00
        return cls(f, config={"family": "uniform", "f00": f00})

    @classmethod
    def from_probabilities(cls, f) -> "NoiseModel":
        """Explicit 16-entry distribution, mu-major order."""
        f = np.array(f, dtype=float)
        return cls(f, config={"family": "explicit", "f": f.ravel().tolist()})

    @classmethod
    def from_config(cls, doc: dict) -> "NoiseModel":
        """Build a model from one of the three serialized forms."""
        if not isinstance(doc, dict) or "family" not in doc:
            raise ValueError("noise config must be a mapping with a 'family' key")
        family = doc["family"]
        if family == "product":
            return cls.from_one_qubit_depolarizing(doc["f0"])
        if family == "uniform":
            return cls.from_uniform_residual(doc["f00"])
        if family == "explicit":
            return cls.from_probabilities(doc["f"])
        raise ValueError(f"unknown noise family {family!r}")

    def to_config(self) -> dict:
        """Serialized form; preserves the family the model was built from."""
        if self.config is not None:
            return dict(self.config)
        return {"family": "explicit", "f": self.f.ravel().tolist()}

    # -- queries ------------------------------------------------------------

    @property
    def no_error_probability(self) -> float:
        return float(self.f[0, 0])

    def sample(self, rng: np.random.Generator) -> tuple[PauliIndex, PauliIndex]:
        """Draw one (mu, nu) rotation pair from the joint distribution."""
        event = int(rng.choice(16, p=self.f.ravel()))
        return PauliIndex(event >> 2), PauliIndex(event & 3)

    def sample_events(self, rng: np.random.Generator, size: int) -> np.ndarray:
        """Draw ``size`` event indices ``mu * 4 + nu`` at once."""
        return rng.choice(16, size=size, p=self.f.ravel())

    def label_shift_distribution(self) -> np.ndarray:
        """Probability of each combined packed label shift.

        Marginalizes the joint (mu, nu) distribution onto the XOR of the
        two one-sided shifts: the effective action when both rotations
        of an event land on the same pair (e.g. after composing noise
        from both laboratories).
        """
        return np.bincount(EVENT_COMBINED_SHIFTS, weights=self.f.ravel(), minlength=4)
