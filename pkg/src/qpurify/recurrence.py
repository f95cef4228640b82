"""Exact evolution of the sixteen per-flag Bell coefficients.

The joint state of the bookkeeping is a distribution ``p[flag, bell]``
over the four error flags and the four Bell labels.  One purification
round draws a control and a target category independently from ``p``
(the ensemble is randomly re-paired every round, so the product form is
exact in the large-population limit), draws one noise event for the pair
of pairs, and pushes everything through the label algebra:

1. the noise event (sigma_mu on the control pair's qubit, sigma_nu on
   the target pair's qubit) shifts each pair's Bell label and is
   recorded on its flag; with placement ``before_rotation`` (default)
   this happens before the bilateral rotation, with ``before_bcnot``
   between the rotation and the CNOT;
2. the bilateral half-x rotation relabels both pairs;
3. the bilateral CNOT mixes the two labels;
4. the pair of pairs is kept iff the target measurement coincides, in
   which case the surviving control pair carries the combined flag.

The round map is generated by exhaustively enumerating every
(control category, target category, noise event) combination; no
closed-form recurrence is transcribed anywhere.  The per-round cost is
a 16x16x16 weighted histogram.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from functools import lru_cache
from typing import Callable, Sequence

import numpy as np

from .bell import rotation_step3
from .errors import DegenerateRoundError, InsufficientTailError, NoThresholdError
from .flags import FLAG_UPDATE_TABLE
from .noise import EVENT_CONTROL_SHIFTS, EVENT_TARGET_SHIFTS, NoiseModel

__all__ = [
    "BEFORE_ROTATION",
    "BEFORE_BCNOT",
    "PLACEMENTS",
    "KEEP_PROBABILITY_FLOOR",
    "SubensembleState",
    "fidelity",
    "conditional_fidelity",
    "one_round",
    "TrajectoryPoint",
    "Trajectory",
    "iterate",
    "Regime",
    "RegimeReport",
    "classify_regime",
    "ThresholdScan",
    "find_thresholds",
    "scan_werner_grid",
    "ExponentFit",
    "convergence_exponents",
]

BEFORE_ROTATION = "before_rotation"
BEFORE_BCNOT = "before_bcnot"
PLACEMENTS = (BEFORE_ROTATION, BEFORE_BCNOT)

#: Below this keep probability the post-selected state is undefined.
KEEP_PROBABILITY_FLOOR = 1e-9

#: Fidelity of the completely depolarized state, the high-noise attractor.
DEPOLARIZED_FIDELITY = 0.25

_STATE_ATOL = 1e-12
_DISCARD_CELL = 16

_ROT3 = np.array([int(rotation_step3(b)) for b in range(4)], dtype=np.int64)


def _check_placement(placement: str) -> str:
    if placement not in PLACEMENTS:
        raise ValueError(f"placement must be one of {PLACEMENTS}, got {placement!r}")
    return placement


@lru_cache(maxsize=None)
def _event_cell_table(placement: str) -> np.ndarray:
    """Output cell for every (control, target, noise event) combination.

    Index axes are (control category, target category, noise event);
    categories pack ``flag * 4 + bell`` and events pack ``mu * 4 + nu``,
    with sigma_mu shifting the control pair and sigma_nu the target
    pair.  Entries are the surviving ``flag * 4 + bell`` cell, or 16
    for a discarded pair of pairs.
    """
    _check_placement(placement)
    j1 = np.arange(16).reshape(16, 1, 1)
    j2 = np.arange(16).reshape(1, 16, 1)
    s1 = EVENT_CONTROL_SHIFTS.astype(np.int64).reshape(1, 1, 16)
    s2 = EVENT_TARGET_SHIFTS.astype(np.int64).reshape(1, 1, 16)
    flag1, bell1 = j1 >> 2, j1 & 3
    flag2, bell2 = j2 >> 2, j2 & 3
    if placement == BEFORE_ROTATION:
        bell1 = _ROT3[bell1 ^ s1]
        bell2 = _ROT3[bell2 ^ s2]
    else:
        bell1 = _ROT3[bell1] ^ s1
        bell2 = _ROT3[bell2] ^ s2
    flag1 = flag1 ^ s1
    flag2 = flag2 ^ s2
    source = bell1 ^ (bell2 & 0b10)
    target = bell2 ^ (bell1 & 0b01)
    new_flag = FLAG_UPDATE_TABLE.astype(np.int64)[flag1, flag2]
    cell = np.where((target & 1) == 0, new_flag * 4 + source, _DISCARD_CELL)
    return np.broadcast_to(cell, (16, 16, 16)).copy()


@dataclass(frozen=True, eq=False)
class SubensembleState:
    """Joint distribution ``p[flag, bell]`` over flags and Bell labels.

    The bell marginal carries the ensemble-level coefficients (the
    fidelity is the Phi+ column summed over flags); the diagonal
    ``p[k, k]`` carries the flag/label correlation that the conditional
    fidelity measures.
    """

    p: np.ndarray

    def __post_init__(self):
        p = np.array(self.p, dtype=float)
        if p.shape == (16,):
            p = p.reshape(4, 4)
        if p.shape != (4, 4):
            raise ValueError(f"state must have 16 coefficients, got shape {p.shape}")
        if p.min() < -_STATE_ATOL:
            raise ValueError(f"state has negative coefficient {p.min():.3e}")
        p = np.clip(p, 0.0, None)
        if abs(p.sum() - 1.0) > _STATE_ATOL:
            raise ValueError(f"state coefficients sum to {p.sum()!r}, not 1")
        p.setflags(write=False)
        object.__setattr__(self, "p", p)

    @classmethod
    def from_bell_probs(cls, bell_probs, flag_mode: str = "fixed") -> "SubensembleState":
        """Bell-diagonal input with flags all (00) or uniform over flags.

        ``bell_probs`` is indexed by packed label (Phi+, Psi+, Phi-,
        Psi-) and is renormalized after a loose validity check.
        """
        probs = np.array(bell_probs, dtype=float)
        if probs.shape != (4,):
            raise ValueError("bell_probs must have exactly 4 entries")
        if probs.min() < 0.0 or probs.sum() <= 0.0 or abs(probs.sum() - 1.0) > 1e-9:
            raise ValueError(f"bell_probs is not a probability distribution: {probs}")
        probs = probs / probs.sum()
        p = np.zeros((4, 4))
        if flag_mode == "fixed":
            p[0] = probs
        elif flag_mode == "random":
            p[:] = probs / 4.0
        else:
            raise ValueError(f"flag_mode must be 'fixed' or 'random', got {flag_mode!r}")
        return cls(p)

    @classmethod
    def werner(cls, fid: float, flag_mode: str = "fixed") -> "SubensembleState":
        """Werner-like input: weight ``fid`` on Phi+, the rest spread evenly."""
        if not 0.0 <= fid <= 1.0:
            raise ValueError(f"fidelity must lie in [0, 1], got {fid}")
        rest = (1.0 - fid) / 3.0
        return cls.from_bell_probs([fid, rest, rest, rest], flag_mode=flag_mode)

    def bell_marginal(self) -> np.ndarray:
        """Ensemble coefficients (Phi+, Psi+, Phi-, Psi-), flags summed out."""
        return self.p.sum(axis=0)

    def flag_marginal(self) -> np.ndarray:
        return self.p.sum(axis=1)


def fidelity(state: SubensembleState) -> float:
    """Overlap of the ensemble with Phi+ (the bell marginal's first entry)."""
    return float(state.p[:, 0].sum())


def conditional_fidelity(state: SubensembleState) -> float:
    """Fidelity attainable if the error flags were disclosed.

    Weight on cells whose flag equals the Bell label, i.e. the pairs a
    flag-conditioned correcting rotation would map onto Phi+.
    """
    return float(np.trace(state.p))


def one_round(
    state: SubensembleState,
    noise: NoiseModel,
    placement: str = BEFORE_ROTATION,
) -> tuple[SubensembleState, float]:
    """Apply one noisy purification round to the category distribution.

    Returns the renormalized post-selected state and the keep
    probability.  Raises :class:`DegenerateRoundError` when the keep
    probability falls below ``KEEP_PROBABILITY_FLOOR``: the conditional
    state is then undefined.  (This is reachable, e.g. a channel that
    always flips exactly one pair's amplitude makes every measurement
    anti-coincide.)
    """
    table = _event_cell_table(_check_placement(placement))
    v = state.p.ravel()
    weights = np.einsum("i,j,e->ije", v, v, noise.f.ravel())
    totals = np.bincount(
        table.ravel(), weights=weights.ravel(), minlength=_DISCARD_CELL + 1
    )
    keep = float(totals[:_DISCARD_CELL].sum())
    if keep < KEEP_PROBABILITY_FLOOR:
        raise DegenerateRoundError(
            f"keep probability {keep:.3e} below {KEEP_PROBABILITY_FLOOR:.0e}"
        )
    return SubensembleState(totals[:_DISCARD_CELL].reshape(4, 4) / keep), keep


@dataclass(frozen=True)
class TrajectoryPoint:
    round_index: int
    fidelity: float
    conditional_fidelity: float
    keep_probability: float
    state: SubensembleState


@dataclass
class Trajectory:
    """Per-round records of one fixpoint iteration (round 0 = input)."""

    points: list[TrajectoryPoint]
    converged: bool
    final_change: float
    placement: str

    @property
    def rounds(self) -> int:
        return len(self.points) - 1

    @property
    def final_state(self) -> SubensembleState:
        return self.points[-1].state

    @property
    def limiting_fidelity(self) -> float:
        """Fidelity at the last recorded round (the F_max estimate)."""
        return self.points[-1].fidelity

    @property
    def limiting_conditional_fidelity(self) -> float:
        return self.points[-1].conditional_fidelity

    def fidelities(self) -> np.ndarray:
        return np.array([pt.fidelity for pt in self.points])

    def conditional_fidelities(self) -> np.ndarray:
        return np.array([pt.conditional_fidelity for pt in self.points])

    def keep_probabilities(self) -> np.ndarray:
        return np.array([pt.keep_probability for pt in self.points])

    def rows(self) -> list[list[float]]:
        """CSV rows: round, F, F_cond, keep probability, 16 coefficients."""
        return [
            [
                pt.round_index,
                pt.fidelity,
                pt.conditional_fidelity,
                pt.keep_probability,
                *pt.state.p.ravel().tolist(),
            ]
            for pt in self.points
        ]


def iterate(
    state: SubensembleState,
    noise: NoiseModel,
    max_rounds: int = 500,
    fixpoint_tol: float = 1e-12,
    placement: str = BEFORE_ROTATION,
) -> Trajectory:
    """Run rounds until the coefficients stop moving or the cap is hit.

    Convergence means the sup-norm change of the sixteen coefficients
    drops below ``fixpoint_tol``.  The trajectory always starts with a
    round-0 record of the input state (keep probability 1 by convention).
    """
    points = [TrajectoryPoint(0, fidelity(state), conditional_fidelity(state), 1.0, state)]
    converged = False
    change = np.inf
    current = state
    for n in range(1, max_rounds + 1):
        new_state, keep = one_round(current, noise, placement)
        change = float(np.max(np.abs(new_state.p - current.p)))
        points.append(
            TrajectoryPoint(n, fidelity(new_state), conditional_fidelity(new_state), keep, new_state)
        )
        current = new_state
        if change < fixpoint_tol:
            converged = True
            break
    return Trajectory(points, converged, change, placement)


class Regime(str, Enum):
    NO_PURIFICATION = "NO_PURIFICATION"
    PURIFY_INSECURE = "PURIFY_INSECURE"
    PURIFY_SECURE = "PURIFY_SECURE"


@dataclass
class RegimeReport:
    regime: Regime
    f_max: float
    conditional_limit: float
    rounds: int
    converged: bool
    initial_fidelity: float
    degenerate: bool = False
    trajectory: Trajectory | None = field(default=None, repr=False)

    def as_dict(self) -> dict:
        return {
            "regime": self.regime.value,
            "f_max": self.f_max,
            "conditional_limit": self.conditional_limit,
            "rounds": self.rounds,
            "converged": self.converged,
            "initial_fidelity": self.initial_fidelity,
            "degenerate": self.degenerate,
        }


def classify_regime(
    noise: NoiseModel,
    initial: SubensembleState,
    secure_tol: float = 1e-6,
    purify_margin: float = 1e-4,
    max_rounds: int = 500,
    fixpoint_tol: float = 1e-12,
    placement: str = BEFORE_ROTATION,
) -> RegimeReport:
    """Label the noise/initial-state combination by its limiting behavior.

    In the high-noise regime the iteration collapses to the completely
    depolarized state, so purifying means the limiting fidelity stays
    above the depolarized value 1/4 by ``purify_margin``.  (Near the
    purification boundary the attracting fixpoint lies well below a
    Werner-0.85 input fidelity, so comparing against the input would
    mislabel a large purifying band; the collapse gap is ~0.5 and makes
    this criterion sharp.)  Secure additionally requires the conditional
    fidelity to reach 1 within ``secure_tol``.  A degenerate round maps
    to NO_PURIFICATION.
    """
    f0 = fidelity(initial)
    try:
        traj = iterate(initial, noise, max_rounds, fixpoint_tol, placement)
    except DegenerateRoundError:
        return RegimeReport(
            Regime.NO_PURIFICATION, float("nan"), float("nan"), 0, False, f0, degenerate=True
        )
    f_max = traj.limiting_fidelity
    cond_limit = traj.limiting_conditional_fidelity
    purifies = f_max > DEPOLARIZED_FIDELITY + purify_margin
    secure = purifies and (1.0 - cond_limit) < secure_tol
    if secure:
        regime = Regime.PURIFY_SECURE
    elif purifies:
        regime = Regime.PURIFY_INSECURE
    else:
        regime = Regime.NO_PURIFICATION
    return RegimeReport(regime, f_max, cond_limit, traj.rounds, traj.converged, f0, trajectory=traj)


@dataclass
class ThresholdScan:
    """Bisection result for one noise family and one initial state.

    ``f_purify`` and ``f_secure`` are bracket midpoints; either may be
    None when the corresponding boundary lies outside the scanned range
    (the other one is then still valid).
    """

    f_purify: float | None
    f_secure: float | None
    purify_bracket: tuple[float, float] | None
    secure_bracket: tuple[float, float] | None
    evaluations: list[tuple[float, str]]
    lo: float
    hi: float
    bisect_tol: float

    def as_dict(self) -> dict:
        return {
            "f_purify": self.f_purify,
            "f_secure": self.f_secure,
            "purify_bracket": self.purify_bracket,
            "secure_bracket": self.secure_bracket,
            "range": [self.lo, self.hi],
            "bisect_tol": self.bisect_tol,
            "evaluations": [{"parameter": x, "regime": r} for x, r in self.evaluations],
        }


def find_thresholds(
    family: Callable[[float], NoiseModel],
    initial: SubensembleState,
    lo: float = 0.88,
    hi: float = 0.92,
    bisect_tol: float = 1e-5,
    secure_tol: float = 1e-6,
    purify_margin: float = 1e-4,
    max_rounds: int = 2000,
    placement: str = BEFORE_ROTATION,
) -> ThresholdScan:
    """Bisect the purification and security boundaries of a noise family.

    ``family`` maps a parameter in [lo, hi] to a noise model and must be
    monotone (larger parameter = cleaner operations).  Raises
    :class:`NoThresholdError` when both endpoints classify into the same
    regime, since no boundary is bracketed at all.
    """
    if not lo < hi:
        raise ValueError(f"need lo < hi, got [{lo}, {hi}]")
    evaluations: list[tuple[float, str]] = []

    def regime_at(x: float) -> Regime:
        report = classify_regime(
            family(x),
            initial,
            secure_tol=secure_tol,
            purify_margin=purify_margin,
            max_rounds=max_rounds,
            placement=placement,
        )
        evaluations.append((x, report.regime.value))
        return report.regime

    regime_lo = regime_at(lo)
    regime_hi = regime_at(hi)
    if regime_lo == regime_hi:
        raise NoThresholdError(
            f"regime {regime_lo.value} at both ends of [{lo}, {hi}]"
        )

    def bisect(predicate: Callable[[Regime], bool]) -> tuple[float, float] | None:
        """Bracket the flip of a monotone predicate; None when not bracketed."""
        at_lo = predicate(regime_lo)
        at_hi = predicate(regime_hi)
        if at_lo == at_hi:
            return None
        a, b = lo, hi
        while b - a > bisect_tol:
            mid = 0.5 * (a + b)
            if predicate(regime_at(mid)) == at_hi:
                b = mid
            else:
                a = mid
        return a, b

    purify_bracket = bisect(lambda r: r != Regime.NO_PURIFICATION)
    secure_bracket = bisect(lambda r: r == Regime.PURIFY_SECURE)
    f_purify = None if purify_bracket is None else 0.5 * sum(purify_bracket)
    f_secure = None if secure_bracket is None else 0.5 * sum(secure_bracket)
    return ThresholdScan(
        f_purify, f_secure, purify_bracket, secure_bracket, evaluations, lo, hi, bisect_tol
    )


def scan_werner_grid(
    family: Callable[[float], NoiseModel],
    fidelities: Sequence[float] = (0.75, 0.85, 0.95),
    flag_mode: str = "fixed",
    **kwargs,
) -> dict[float, ThresholdScan | None]:
    """Thresholds over a grid of Werner inputs; None marks no-threshold."""
    results: dict[float, ThresholdScan | None] = {}
    for fid in fidelities:
        initial = SubensembleState.werner(fid, flag_mode=flag_mode)
        try:
            results[fid] = find_thresholds(family, initial, **kwargs)
        except NoThresholdError:
            results[fid] = None
    return results


@dataclass
class ExponentFit:
    """Least-squares tail slopes of the two log distance curves.

    Rates are positive per-round decay constants of ``F_inf - F_n`` and
    ``1 - F_cond_n``.  ``slope_drift_*`` compares fits over the two
    halves of the tail window relative to the full slope; a large value
    flags non-geometric (for example super-exponential) convergence.
    """

    rate_fidelity: float
    rate_conditional: float
    residual_fidelity: float
    residual_conditional: float
    slope_drift_fidelity: float
    slope_drift_conditional: float
    points_fidelity: int
    points_conditional: int


def _fit_tail(values: np.ndarray, floor: float, tail_length: int, min_points: int, label: str):
    rounds = np.arange(len(values), dtype=float)
    mask = values > floor
    if mask.sum() < min_points:
        raise InsufficientTailError(
            f"{label}: only {int(mask.sum())} points above the {floor:.0e} floor, need {min_points}"
        )
    idx = np.nonzero(mask)[0][-tail_length:]
    if len(idx) < min_points:
        raise InsufficientTailError(
            f"{label}: tail has {len(idx)} usable points, need {min_points}"
        )
    x = rounds[idx]
    y = np.log(values[idx])
    slope, intercept = np.polyfit(x, y, 1)
    residual = float(np.sqrt(np.mean((y - (slope * x + intercept)) ** 2)))
    half = len(idx) // 2
    slope_a = np.polyfit(x[:half], y[:half], 1)[0] if half >= 2 else slope
    slope_b = np.polyfit(x[half:], y[half:], 1)[0] if len(idx) - half >= 2 else slope
    drift = float(abs(slope_a - slope_b) / max(abs(slope), 1e-30))
    return -float(slope), residual, drift, len(idx)


def convergence_exponents(
    trajectory: Trajectory,
    floor: float = 1e-14,
    tail_length: int = 12,
    min_points: int = 6,
) -> ExponentFit:
    """Estimate the geometric decay rates of F and F_cond toward their limits.

    The limits are read from the final recorded round; values at or
    below ``floor`` are excluded as floating-point noise.  Raises
    :class:`InsufficientTailError` when either curve has too few usable
    points (e.g. constant trajectories, or convergence so fast that the
    curve immediately hits the floor).
    """
    f = trajectory.fidelities()
    fc = trajectory.conditional_fidelities()
    dist_f = f[-1] - f
    dist_fc = 1.0 - fc
    rate_f, res_f, drift_f, n_f = _fit_tail(
        dist_f, floor, tail_length, min_points, "F distance"
    )
    rate_fc, res_fc, drift_fc, n_fc = _fit_tail(
        dist_fc, floor, tail_length, min_points, "F_cond distance"
    )
    return ExponentFit(rate_f, rate_fc, res_f, res_fc, drift_f, drift_fc, n_f, n_fc)
