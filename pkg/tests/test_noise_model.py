"""Noise-channel construction, sampling and serialization."""

import numpy as np
import pytest
from hypothesis import given, strategies as st

from qpurify.bell import PauliIndex
from qpurify.noise import EVENT_COMBINED_SHIFTS, NoiseModel


class TestProductFamily:
    def test_noiseless(self):
        model = NoiseModel.from_one_qubit_depolarizing(1.0)
        assert model.f[0, 0] == 1.0
        assert model.f.sum() == 1.0

    def test_f0_097_entries(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.97)
        assert model.f[0, 0] == pytest.approx(0.9409, abs=1e-15)
        for j in range(1, 4):
            assert model.f[0, j] == pytest.approx(0.0097, abs=1e-15)
            assert model.f[j, 0] == pytest.approx(0.0097, abs=1e-15)
            for k in range(1, 4):
                assert model.f[j, k] == pytest.approx(0.0001, abs=1e-15)

    def test_boundary_f0_zero(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.0)
        assert model.f[0, 0] == 0.0
        for j in range(1, 4):
            for k in range(1, 4):
                assert model.f[j, k] == pytest.approx(1.0 / 9.0, abs=1e-15)

    @pytest.mark.parametrize("bad", [-0.01, 1.01, 2.0])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            NoiseModel.from_one_qubit_depolarizing(bad)


class TestUniformFamily:
    def test_noiseless(self):
        model = NoiseModel.from_uniform_residual(1.0)
        assert model.f[0, 0] == 1.0

    def test_f00_097(self):
        model = NoiseModel.from_uniform_residual(0.97)
        residual = model.f.ravel()[1:]
        assert np.allclose(residual, 0.002, atol=1e-15)

    def test_maximal_noise_is_uniform(self):
        model = NoiseModel.from_uniform_residual(1.0 / 16.0)
        assert np.allclose(model.f, 1.0 / 16.0, atol=1e-15)

    @pytest.mark.parametrize("bad", [-0.5, 1.5])
    def test_out_of_range(self, bad):
        with pytest.raises(ValueError):
            NoiseModel.from_uniform_residual(bad)


@given(st.floats(0.0, 1.0))
def test_both_constructors_always_yield_distributions(parameter):
    for model in (
        NoiseModel.from_one_qubit_depolarizing(parameter),
        NoiseModel.from_uniform_residual(parameter),
    ):
        assert model.f.min() >= 0.0
        assert abs(model.f.sum() - 1.0) <= 1e-12


class TestValidation:
    def test_rejects_negative(self):
        f = np.full(16, 1.0 / 16.0)
        f[3] = -0.01
        f[4] += 0.01
        with pytest.raises(ValueError, match="nonnegative"):
            NoiseModel(f)

    def test_rejects_unnormalized(self):
        with pytest.raises(ValueError, match="sum"):
            NoiseModel(np.full(16, 0.1))

    def test_rejects_wrong_shape(self):
        with pytest.raises(ValueError, match="16 entries"):
            NoiseModel(np.full(8, 0.125))


class TestSampling:
    def test_identity_channel_always_identity(self):
        model = NoiseModel.identity()
        rng = np.random.default_rng(0)
        for _ in range(50):
            assert model.sample(rng) == (PauliIndex.I, PauliIndex.I)

    def test_fixed_seed_is_reproducible(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.9)
        draws1 = [model.sample(np.random.default_rng(123)) for _ in range(1)]
        seq1 = model.sample_events(np.random.default_rng(123), 1000)
        seq2 = model.sample_events(np.random.default_rng(123), 1000)
        assert np.array_equal(seq1, seq2)
        assert draws1 == [model.sample(np.random.default_rng(123))]

    def test_empirical_frequencies_within_5_sigma(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.9)
        events = model.sample_events(np.random.default_rng(7), 1_000_000)
        counts = np.bincount(events, minlength=16)
        n = events.size
        for e in range(16):
            p = model.f.ravel()[e]
            sigma = np.sqrt(n * p * (1 - p))
            assert abs(counts[e] - n * p) < 5 * sigma

    def test_sample_returns_pauli_indices(self):
        model = NoiseModel.from_uniform_residual(0.5)
        mu, nu = model.sample(np.random.default_rng(5))
        assert isinstance(mu, PauliIndex) and isinstance(nu, PauliIndex)


class TestShiftDistribution:
    def test_identity(self):
        assert np.array_equal(
            NoiseModel.identity().label_shift_distribution(), [1.0, 0.0, 0.0, 0.0]
        )

    def test_product_097_no_shift_probability(self):
        q = NoiseModel.from_one_qubit_depolarizing(0.97).label_shift_distribution()
        # f00 plus the three mu == nu != 0 events whose shifts cancel
        assert q[0] == pytest.approx(0.9412, abs=1e-15)

    def test_uniform_channel_gives_uniform_shifts(self):
        q = NoiseModel.from_uniform_residual(1.0 / 16.0).label_shift_distribution()
        assert np.allclose(q, 0.25, atol=1e-15)

    @given(st.floats(0.0, 1.0))
    def test_normalization(self, f0):
        q = NoiseModel.from_one_qubit_depolarizing(f0).label_shift_distribution()
        assert abs(q.sum() - 1.0) <= 1e-12

    def test_matches_empirical_shift_histogram(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.9)
        events = model.sample_events(np.random.default_rng(11), 500_000)
        shifts = EVENT_COMBINED_SHIFTS[events]
        counts = np.bincount(shifts, minlength=4)
        q = model.label_shift_distribution()
        n = events.size
        for s in range(4):
            sigma = np.sqrt(n * q[s] * (1 - q[s]))
            assert abs(counts[s] - n * q[s]) < 5 * sigma


class TestSerialization:
    def test_product_round_trip(self):
        model = NoiseModel.from_one_qubit_depolarizing(0.93)
        doc = model.to_config()
        assert doc == {"family": "product", "f0": 0.93}
        rebuilt = NoiseModel.from_config(doc)
        assert np.array_equal(rebuilt.f, model.f)

    def test_uniform_round_trip(self):
        doc = NoiseModel.from_uniform_residual(0.42).to_config()
        assert doc == {"family": "uniform", "f00": 0.42}
        assert np.array_equal(NoiseModel.from_config(doc).f, NoiseModel.from_uniform_residual(0.42).f)

    def test_explicit_round_trip(self):
        rng = np.random.default_rng(3)
        f = rng.dirichlet(np.ones(16))
        model = NoiseModel.from_probabilities(f)
        doc = model.to_config()
        assert doc["family"] == "explicit" and len(doc["f"]) == 16
        assert np.allclose(NoiseModel.from_config(doc).f, model.f, atol=0)

    def test_rejects_unknown_family(self):
        with pytest.raises(ValueError, match="unknown noise family"):
            NoiseModel.from_config({"family": "amplitude_damping", "gamma": 0.1})

    def test_rejects_non_mapping(self):
        with pytest.raises(ValueError, match="mapping"):
            NoiseModel.from_config([1, 2, 3])
