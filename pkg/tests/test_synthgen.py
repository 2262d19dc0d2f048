import numpy as np
import pytest

from mthu.datamodel import ValidationError, validate_abundance
from mthu.synthgen import (SpectraBank, Synth1Config, Synth2Config,
                           add_noise_snr, builtin_bank, generate_synthetic1,
                           generate_synthetic2, piecewise_scaling)
from mthu.datamodel import HyperCubeSequence


def measured_snr_db(clean, noisy):
    clean = clean.astype(np.float64)
    noise = noisy.astype(np.float64) - clean
    return 10.0 * np.log10(np.mean(clean**2) / np.mean(noise**2))


class TestPiecewiseScaling:
    def test_degenerate_interval_all_ones(self, rng):
        v = piecewise_scaling(64, (1.0, 1.0), 5, rng)
        np.testing.assert_allclose(v, 1.0)

    def test_bounds(self, rng):
        for _ in range(20):
            v = piecewise_scaling(224, (0.85, 1.15), 5, rng)
            assert v.min() >= 0.85 - 1e-12 and v.max() <= 1.15 + 1e-12

    def test_two_knot_closed_form(self):
        # oracle: straight line between the two endpoint values
        rng = np.random.default_rng(3)
        v = piecewise_scaling(17, (0.5, 2.0), 2, rng)
        v0, v1 = v[0], v[-1]
        i = np.arange(17)
        np.testing.assert_allclose(v, v0 + (v1 - v0) * i / 16, atol=1e-12)

    def test_knots_below_two_rejected(self, rng):
        with pytest.raises(ValidationError):
            piecewise_scaling(10, (0.9, 1.1), 1, rng)


class TestAddNoise:
    def test_infinite_snr_is_identity(self, rng):
        cube = HyperCubeSequence(np.ones((2, 3, 4, 4)))
        assert add_noise_snr(cube, np.inf, rng) is cube
        assert add_noise_snr(cube, None, rng) is cube

    def test_measured_snr_matches(self):
        rng = np.random.default_rng(11)
        clean = rng.uniform(0.1, 1.0, size=(6, 224, 50, 50)).astype(np.float32)
        cube = HyperCubeSequence(clean)
        noisy = add_noise_snr(cube, 30.0, np.random.default_rng(99))
        assert measured_snr_db(cube.data, noisy.data) == pytest.approx(30.0, abs=0.2)

    def test_seeded_determinism(self):
        cube = HyperCubeSequence(np.ones((2, 3, 4, 4)))
        a = add_noise_snr(cube, 20.0, np.random.default_rng(5))
        b = add_noise_snr(cube, 20.0, np.random.default_rng(5))
        assert np.array_equal(a.data, b.data)

    def test_zero_cube_rejected(self, rng):
        cube = HyperCubeSequence(np.zeros((1, 2, 2, 2)))
        with pytest.raises(ValidationError):
            add_noise_snr(cube, 30.0, rng)


SMALL1 = dict(t_phases=4, height=12, width=12, bands=40, mutation_phases=(2, 3),
              mutation_radius_px=3)


class TestSynth1:
    def test_gt_abundances_valid(self):
        b = generate_synthetic1(Synth1Config(seed=1, **SMALL1))
        assert validate_abundance(b.gt_abundances, tol=1e-5) == []

    def test_noiseless_mixture_oracle(self):
        b = generate_synthetic1(Synth1Config(seed=2, snr_db=None, **SMALL1))
        mpx = b.gt_endmembers.per_pixel.astype(np.float64)
        a = b.gt_abundances.flat().astype(np.float64)
        recon = np.einsum("tnlp,tpn->tln", mpx, a)
        assert np.abs(recon - b.observed.flat()).max() <= 1e-6

    def test_same_seed_bit_identical(self):
        b1 = generate_synthetic1(Synth1Config(seed=3, **SMALL1))
        b2 = generate_synthetic1(Synth1Config(seed=3, **SMALL1))
        assert np.array_equal(b1.observed.data, b2.observed.data)
        assert np.array_equal(b1.gt_endmembers.per_pixel, b2.gt_endmembers.per_pixel)
        assert np.array_equal(b1.gt_abundances.data, b2.gt_abundances.data)

    def test_scaling_stays_in_amplitude_interval(self):
        cfg = Synth1Config(seed=4, snr_db=None, **SMALL1)
        b = generate_synthetic1(cfg)
        mpx = b.gt_endmembers.per_pixel.astype(np.float64)
        # recover the applied scaling against the per-phase reference spectra
        lo, hi = cfg.scale_amplitude
        refs = mpx.mean(axis=1)  # (T, L, P); mean over pixels ~ reference
        ratio = mpx / refs[:, None]
        assert ratio.min() >= lo / hi - 1e-6 and ratio.max() <= hi / lo + 1e-6

    def test_mutation_creates_dominant_disk(self):
        cfg = Synth1Config(seed=5, **SMALL1)
        b = generate_synthetic1(cfg)
        for phase in cfg.mutation_phases:
            assert b.gt_abundances.data[phase - 1].max() >= 0.8

    def test_measured_snr(self):
        cfg = Synth1Config(seed=6, **SMALL1)
        clean = generate_synthetic1(Synth1Config(seed=6, snr_db=None, **SMALL1))
        noisy = generate_synthetic1(cfg)
        snr = measured_snr_db(clean.observed.data, noisy.observed.data)
        assert snr == pytest.approx(30.0, abs=0.2)

    def test_mutation_phase_outside_range_rejected(self):
        with pytest.raises(ValidationError):
            Synth1Config(t_phases=3, mutation_phases=(5,))


class TestSynth2:
    CFG = dict(t_phases=5, height=10, width=10, bands=60)

    def test_membership_in_bank(self):
        cfg = Synth2Config(seed=7, **self.CFG)
        b = generate_synthetic2(cfg)
        bank = builtin_bank(cfg.bands)
        mpx = b.gt_endmembers.per_pixel
        for p, name in enumerate(cfg.class_names):
            pool = bank.spectra(name)
            drawn = mpx[:, :, :, p].reshape(-1, cfg.bands)
            # every drawn spectrum must be one of the bank rows, bit-exact
            matches = (drawn[:, None, :] == pool[None]).all(axis=2).any(axis=1)
            assert matches.all()

    def test_default_shape_matches_recipe(self):
        b = generate_synthetic2(Synth2Config(seed=8, height=6, width=6,
                                             t_phases=15, bands=198))
        assert b.observed.T == 15
        assert b.observed.L == 198

    def test_noiseless_mixture_oracle(self):
        b = generate_synthetic2(Synth2Config(seed=9, snr_db=None, **self.CFG))
        mpx = b.gt_endmembers.per_pixel.astype(np.float64)
        a = b.gt_abundances.flat().astype(np.float64)
        recon = np.einsum("tnlp,tpn->tln", mpx, a)
        assert np.abs(recon - b.observed.flat()).max() <= 1e-6

    def test_empty_class_bank_rejected(self):
        with pytest.raises(ValidationError):
            SpectraBank({"water": np.empty((0, 10))})

    def test_user_bank_roundtrip(self, tmp_path, rng):
        bank = SpectraBank({"a": rng.uniform(0.1, 1, (3, 20)).astype(np.float32),
                            "b": rng.uniform(0.1, 1, (4, 20)).astype(np.float32)})
        bank.to_json(tmp_path / "bank.json")
        loaded = SpectraBank.from_json(tmp_path / "bank.json")
        for k in bank.classes:
            np.testing.assert_array_equal(bank.classes[k], loaded.classes[k])
        cfg = Synth2Config(seed=1, t_phases=2, height=4, width=4, bands=20,
                           class_names=("a", "b"), bank=loaded)
        b = generate_synthetic2(cfg)
        assert b.observed.L == 20
