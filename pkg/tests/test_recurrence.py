"""Round map, fixpoint iteration, regimes, thresholds, exponents."""

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

import qpurify.recurrence as recurrence
from qpurify.bell import PauliIndex
from qpurify.errors import DegenerateRoundError, InsufficientTailError, NoThresholdError
from qpurify.noise import NoiseModel
from qpurify.recurrence import (
    BEFORE_BCNOT,
    BEFORE_ROTATION,
    Regime,
    SubensembleState,
    classify_regime,
    conditional_fidelity,
    convergence_exponents,
    fidelity,
    find_thresholds,
    iterate,
    one_round,
    scan_werner_grid,
)

WERNER_085 = [0.85, 0.05, 0.05, 0.05]


def flagless_round(bell_probs, noise, placement=BEFORE_ROTATION):
    """Independent flag-free enumeration of the bell-marginal dynamics.

    Walks every (control label, target label, noise event) combination
    with plain Python ints; used as the oracle for the reduced
    4-variable recurrence.
    """
    rot = [0, 1, 3, 2]
    shift = [0, 1, 3, 2]
    out = [0.0] * 4
    keep = 0.0
    for b1 in range(4):
        for b2 in range(4):
            for mu in range(4):
                for nu in range(4):
                    w = bell_probs[b1] * bell_probs[b2] * noise.f[mu, nu]
                    if placement == BEFORE_ROTATION:
                        c1 = rot[b1 ^ shift[mu]]
                        c2 = rot[b2 ^ shift[nu]]
                    else:
                        c1 = rot[b1] ^ shift[mu]
                        c2 = rot[b2] ^ shift[nu]
                    src = c1 ^ (c2 & 2)
                    tgt = c2 ^ (c1 & 1)
                    if tgt & 1:
                        continue
                    out[src] += w
                    keep += w
    return np.array(out) / keep, keep


def ideal_recurrence(bell_probs):
    """Noiseless closed form with coefficients (A, B, C, D) attached to
    (Phi+, Psi-, Psi+, Phi-): A' = (A^2+B^2)/N, B' = 2CD/N,
    C' = (C^2+D^2)/N, D' = 2AB/N, N = (A+B)^2 + (C+D)^2.

    Input and output use the packed-label vector order
    (Phi+, Psi+, Phi-, Psi-), i.e. (A, C, D, B).
    """
    a, c, d, b = bell_probs
    n = (a + b) ** 2 + (c + d) ** 2
    out = np.array(
        [(a * a + b * b) / n, (c * c + d * d) / n, 2 * a * b / n, 2 * c * d / n]
    )
    return out, n


def random_state(seed):
    rng = np.random.default_rng(seed)
    return SubensembleState(rng.dirichlet(np.ones(16)).reshape(4, 4))


def random_noise(seed):
    rng = np.random.default_rng(seed + 1000)
    return NoiseModel.from_probabilities(rng.dirichlet(np.ones(16)))


class TestSubensembleState:
    def test_rejects_negative(self):
        p = np.full(16, 1.0 / 16.0)
        p[0] = -0.05
        p[1] += 0.05 + 1.0 / 16.0
        with pytest.raises(ValueError, match="negative"):
            SubensembleState(p)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="sum"):
            SubensembleState(np.full((4, 4), 0.1))

    def test_werner_and_marginals(self):
        state = SubensembleState.werner(0.85)
        assert np.allclose(state.bell_marginal(), WERNER_085, atol=1e-15)
        assert np.allclose(state.flag_marginal(), [1, 0, 0, 0], atol=1e-15)

    def test_random_flag_mode(self):
        state = SubensembleState.from_bell_probs(WERNER_085, flag_mode="random")
        assert np.allclose(state.flag_marginal(), 0.25, atol=1e-15)
        assert np.allclose(state.bell_marginal(), WERNER_085, atol=1e-15)

    def test_rejects_bad_flag_mode(self):
        with pytest.raises(ValueError, match="flag_mode"):
            SubensembleState.from_bell_probs(WERNER_085, flag_mode="banana")


class TestFidelities:
    def test_concentrated_clean(self):
        p = np.zeros((4, 4))
        p[0, 0] = 1.0
        state = SubensembleState(p)
        assert fidelity(state) == 1.0
        assert conditional_fidelity(state) == 1.0

    def test_flag_predicts_state(self):
        p = np.zeros((4, 4))
        p[3, 3] = 1.0  # flag (11), Bell Psi-
        state = SubensembleState(p)
        assert fidelity(state) == 0.0
        assert conditional_fidelity(state) == 1.0

    def test_uniform(self):
        state = SubensembleState(np.full((4, 4), 1.0 / 16.0))
        assert fidelity(state) == pytest.approx(0.25, abs=1e-15)
        assert conditional_fidelity(state) == pytest.approx(0.25, abs=1e-15)


class TestOneRound:
    def test_noiseless_matches_ideal_recurrence(self):
        rng = np.random.default_rng(42)
        identity = NoiseModel.identity()
        for _ in range(20):
            probs = rng.dirichlet(np.ones(4))
            state = SubensembleState.from_bell_probs(probs)
            out, keep = one_round(state, identity)
            expected, expected_keep = ideal_recurrence(probs)
            assert np.max(np.abs(out.bell_marginal() - expected)) < 1e-12
            assert abs(keep - expected_keep) < 1e-12

    def test_noiseless_pure_input_is_fixed_point(self):
        state = SubensembleState.from_bell_probs([1, 0, 0, 0])
        out, keep = one_round(state, NoiseModel.identity())
        assert keep == pytest.approx(1.0, abs=1e-15)
        assert out.p[0, 0] == pytest.approx(1.0, abs=1e-15)

    @pytest.mark.parametrize("placement", [BEFORE_ROTATION, BEFORE_BCNOT])
    @pytest.mark.parametrize("seed", range(6))
    def test_bell_marginal_matches_flagless_enumeration(self, placement, seed):
        # flags uniform and independent of bells: the bell marginal must
        # follow the reduced flag-free dynamics exactly
        rng = np.random.default_rng(seed)
        probs = rng.dirichlet(np.ones(4))
        state = SubensembleState.from_bell_probs(probs, flag_mode="random")
        noise = random_noise(seed)
        out, keep = one_round(state, noise, placement)
        expected, expected_keep = flagless_round(probs, noise, placement)
        assert np.max(np.abs(out.bell_marginal() - expected)) < 1e-12
        assert abs(keep - expected_keep) < 1e-12

    @settings(max_examples=60, deadline=None)
    @given(st.integers(0, 10_000))
    def test_normalization_and_nonnegativity(self, seed):
        out, keep = one_round(random_state(seed), random_noise(seed))
        assert abs(out.p.sum() - 1.0) < 1e-12
        assert out.p.min() >= 0.0
        assert 0.0 < keep <= 1.0 + 1e-15

    def test_degenerate_round_raises(self):
        # a channel that always amplitude-flips exactly the target pair
        # makes every measurement anti-coincide: keep probability 0
        f = np.zeros(16)
        f[PauliIndex.X] = 1.0  # (mu, nu) = (I, X)
        noise = NoiseModel.from_probabilities(f)
        state = SubensembleState.from_bell_probs([1, 0, 0, 0])
        with pytest.raises(DegenerateRoundError):
            one_round(state, noise)

    def test_control_target_relabeling_symmetry(self):
        # both categories are drawn i.i.d. from the same distribution, so
        # relabeling the draw slots cannot change the outcome
        state, noise = random_state(5), random_noise(5)
        table = recurrence._event_cell_table(BEFORE_ROTATION)
        v = state.p.ravel()
        w_direct = np.einsum("i,j,e->ije", v, v, noise.f.ravel())
        w_relabel = np.einsum("j,i,e->ije", v, v, noise.f.ravel())
        direct = np.bincount(table.ravel(), weights=w_direct.ravel(), minlength=17)
        relabel = np.bincount(table.ravel(), weights=w_relabel.ravel(), minlength=17)
        assert np.max(np.abs(direct - relabel)) < 1e-15

    def test_rejects_unknown_placement(self):
        with pytest.raises(ValueError, match="placement"):
            one_round(random_state(0), random_noise(0), "after_measurement")


class TestIterate:
    def test_noiseless_werner_07_converges_to_unity(self):
        traj = iterate(SubensembleState.werner(0.7), NoiseModel.identity(), max_rounds=200)
        assert traj.converged
        assert traj.limiting_fidelity == pytest.approx(1.0, abs=1e-9)
        f = traj.fidelities()
        assert np.all(np.diff(f) >= -1e-12)

    def test_noiseless_werner_03_fails_to_purify(self):
        traj = iterate(SubensembleState.werner(0.3), NoiseModel.identity(), max_rounds=200)
        assert traj.limiting_fidelity == pytest.approx(0.25, abs=1e-6)

    def test_product_097_purifies_and_is_secure(self):
        noise = NoiseModel.from_one_qubit_depolarizing(0.97)
        traj = iterate(SubensembleState.werner(0.85), noise)
        assert traj.converged
        assert traj.limiting_fidelity > 0.85
        assert 1.0 - traj.limiting_conditional_fidelity < 1e-9

    def test_round_zero_records_input(self):
        traj = iterate(SubensembleState.werner(0.85), NoiseModel.identity(), max_rounds=3)
        assert traj.points[0].round_index == 0
        assert traj.points[0].fidelity == pytest.approx(0.85, abs=1e-15)
        assert traj.points[0].keep_probability == 1.0
        assert traj.rounds == 3

    def test_secure_regime_conditional_tail_is_geometric(self):
        noise = NoiseModel.from_uniform_residual(0.97)
        traj = iterate(SubensembleState.werner(0.85), noise, max_rounds=40)
        fc = traj.conditional_fidelities()
        assert np.all(np.diff(fc[2:]) >= -1e-12)
        dist = 1.0 - fc
        valid = dist > 1e-12
        ratios = dist[valid][1:] / dist[valid][:-1]
        tail = ratios[4:]
        assert np.all(tail < 1.0)
        assert np.max(np.abs(tail - np.median(tail))) < 0.2

    def test_rows_schema(self):
        traj = iterate(SubensembleState.werner(0.85), NoiseModel.identity(), max_rounds=2)
        rows = traj.rows()
        assert len(rows) == 3
        assert all(len(row) == 20 for row in rows)


class TestClassifyRegime:
    def test_low_noise_is_secure(self):
        report = classify_regime(
            NoiseModel.from_one_qubit_depolarizing(0.999), SubensembleState.werner(0.85)
        )
        assert report.regime == Regime.PURIFY_SECURE

    def test_high_noise_no_purification(self):
        report = classify_regime(
            NoiseModel.from_one_qubit_depolarizing(0.80), SubensembleState.werner(0.85)
        )
        assert report.regime == Regime.NO_PURIFICATION
        assert report.f_max == pytest.approx(0.25, abs=1e-6)

    def test_intermediate_regime_at_08985(self):
        report = classify_regime(
            NoiseModel.from_one_qubit_depolarizing(0.8985),
            SubensembleState.werner(0.85),
            max_rounds=3000,
        )
        assert report.regime == Regime.PURIFY_INSECURE
        assert report.f_max > 0.5
        assert 1.0 - report.conditional_limit > 1e-3

    def test_degenerate_maps_to_no_purification(self):
        f = np.zeros(16)
        f[PauliIndex.X] = 1.0
        report = classify_regime(
            NoiseModel.from_probabilities(f), SubensembleState.from_bell_probs([1, 0, 0, 0])
        )
        assert report.regime == Regime.NO_PURIFICATION
        assert report.degenerate

    def test_noiseless_limit_is_secure(self):
        report = classify_regime(
            NoiseModel.from_one_qubit_depolarizing(1.0), SubensembleState.werner(0.85)
        )
        assert report.regime == Regime.PURIFY_SECURE


class TestThresholds:
    def test_product_family_brackets_reference_interval(self):
        scan = find_thresholds(
            NoiseModel.from_one_qubit_depolarizing,
            SubensembleState.werner(0.85),
            lo=0.895,
            hi=0.905,
            bisect_tol=1e-5,
            max_rounds=3000,
        )
        assert scan.f_purify == pytest.approx(0.8983, abs=5e-4)
        assert scan.f_secure == pytest.approx(0.8988, abs=5e-4)
        assert 0.0 < scan.f_secure - scan.f_purify < 1e-3

    def test_all_secure_range_raises(self):
        with pytest.raises(NoThresholdError):
            find_thresholds(
                NoiseModel.from_one_qubit_depolarizing,
                SubensembleState.werner(0.85),
                lo=0.99,
                hi=1.0,
            )

    def test_uniform_family_has_its_own_thresholds(self):
        scan = find_thresholds(
            NoiseModel.from_uniform_residual,
            SubensembleState.werner(0.85),
            lo=0.82,
            hi=0.92,
            bisect_tol=1e-4,
            max_rounds=2000,
        )
        assert scan.f_purify is not None and scan.f_secure is not None
        assert scan.f_purify <= scan.f_secure

    def test_werner_grid(self):
        grid = scan_werner_grid(
            NoiseModel.from_one_qubit_depolarizing,
            fidelities=(0.85, 0.95),
            lo=0.895,
            hi=0.905,
            bisect_tol=1e-4,
            max_rounds=2000,
        )
        assert set(grid) == {0.85, 0.95}
        for scan in grid.values():
            assert scan is not None
            assert scan.f_purify == pytest.approx(0.8983, abs=1e-3)

    def test_rejects_inverted_range(self):
        with pytest.raises(ValueError, match="lo < hi"):
            find_thresholds(
                NoiseModel.from_one_qubit_depolarizing,
                SubensembleState.werner(0.85),
                lo=0.9,
                hi=0.9,
            )


class TestConvergenceExponents:
    def test_fig1_rates_agree_within_ten_percent(self):
        noise = NoiseModel.from_uniform_residual(0.97)
        traj = iterate(SubensembleState.werner(0.85), noise, max_rounds=500)
        fit = convergence_exponents(traj)
        assert fit.rate_fidelity > 0 and fit.rate_conditional > 0
        rel = abs(fit.rate_fidelity - fit.rate_conditional) / fit.rate_fidelity
        assert rel < 0.10
        assert fit.slope_drift_fidelity < 0.3

    def test_noiseless_superexponential_flagged_by_drift(self):
        traj = iterate(SubensembleState.werner(0.99), NoiseModel.identity(), max_rounds=200)
        fit = convergence_exponents(traj)
        assert fit.slope_drift_fidelity > 0.5

    def test_constant_trajectory_raises(self):
        traj = iterate(
            SubensembleState.from_bell_probs([1, 0, 0, 0]),
            NoiseModel.identity(),
            max_rounds=30,
        )
        with pytest.raises(InsufficientTailError):
            convergence_exponents(traj)
