"""Closed-form ACF / S-curve / gain against brute-force and simulation oracles."""

import numpy as np
import pytest

from nrranging.grid import CellIdentity, generate_pbch_dmrs, signed_bins
from nrranging.theory import (
    AcfParams,
    discriminator_gain,
    first_null_seconds,
    gnss_one_chip_seconds,
    ideal_acf_approx,
    ideal_acf_exact,
    s_curve,
    s_curve_exact,
    sinc,
)

PARAMS = AcfParams()  # kappa=4, n_p=60, n_fft=256, p0=2, amp=1

# limit of discriminator_gain(xi)/xi for xi -> 0, i.e. (4/3) pi^2 beta^2 A^2,
# frozen from the series expansion of the closed form at beta = 0.9375
KD_SLOPE_LIMIT = 11.565942657526591


def brute_force_acf(params, epsilon):
    """Direct pilot-sum evaluation of the ideal ACF."""
    p = params.p0 + params.kappa * np.arange(params.n_p)
    return params.amp * np.mean(np.exp(2j * np.pi * p * epsilon / params.n_fft))


class TestIdealAcf:
    def test_defaults_give_cited_beta(self):
        assert PARAMS.beta == 0.9375

    def test_alpha_near_one(self):
        assert PARAMS.alpha == 0.9375
        assert AcfParams(p0=4).alpha == 0.953125

    def test_peak_value(self):
        assert ideal_acf_exact(PARAMS, 0.0) == pytest.approx(PARAMS.amp, abs=1e-15)

    def test_first_null(self):
        null = PARAMS.first_null
        assert null == pytest.approx(256 / 240)
        assert abs(ideal_acf_exact(PARAMS, null)) < 1e-12

    def test_matches_brute_force_sum(self):
        eps = np.concatenate([np.linspace(-3, 3, 601), [0.0, 256 / 240, 64.0]])
        for e in eps:
            assert abs(ideal_acf_exact(PARAMS, e) - brute_force_acf(PARAMS, e)) <= 1e-12

    def test_approx_within_one_percent_of_exact(self):
        eps = np.linspace(-2, 2, 801)
        diff = np.abs(ideal_acf_approx(PARAMS, eps) - ideal_acf_exact(PARAMS, eps))
        assert diff.max() < 0.01 * PARAMS.amp

    def test_sinc_zero_handled(self):
        assert sinc(0.0) == 1.0
        assert ideal_acf_approx(PARAMS, 0.0) == pytest.approx(PARAMS.amp)

    def test_amp_scales_linearly(self):
        p2 = AcfParams(amp=2.5)
        np.testing.assert_allclose(ideal_acf_exact(p2, 0.3),
                                   2.5 * ideal_acf_exact(PARAMS, 0.3))


class TestSCurve:
    def test_zero_at_origin(self):
        for xi in (0.1, 0.25, 0.5):
            assert s_curve(0.0, xi) == 0.0
            assert s_curve_exact(PARAMS, 0.0, xi) == 0.0

    def test_odd_symmetry(self):
        eps = np.linspace(-1.5, 1.5, 301)
        np.testing.assert_allclose(s_curve(-eps, 0.5), -s_curve(eps, 0.5), atol=1e-15)
        np.testing.assert_allclose(s_curve_exact(PARAMS, -eps, 0.5),
                                   -s_curve_exact(PARAMS, eps, 0.5), atol=1e-15)

    def test_exact_matches_pilot_comb_correlator(self):
        """Early/late correlators over real DM-RS pilots reproduce the closed form."""
        cell = CellIdentity.from_cell_id(602)
        pilots = generate_pbch_dmrs(cell)
        sel = pilots.symbols == 1
        c = pilots.values[sel]
        nu = signed_bins(pilots.indices[sel])
        xi = 0.5

        def correlator_sim(eps):
            replica = c * np.exp(-2j * np.pi * nu * eps / 256)
            early = replica * np.exp(+2j * np.pi * nu * xi / 256)
            late = replica * np.exp(-2j * np.pi * nu * xi / 256)
            r_e = np.mean(c * np.conj(early))
            r_l = np.mean(c * np.conj(late))
            return abs(r_e) ** 2 - abs(r_l) ** 2

        eps = np.linspace(-2, 2, 401)
        sim = np.array([correlator_sim(e) for e in eps])
        closed = s_curve_exact(PARAMS, eps, xi)
        assert np.max(np.abs(sim - closed)) <= 1e-6 * np.max(np.abs(closed))

    def test_sinc_form_close_to_exact(self):
        eps = np.linspace(-2, 2, 401)
        diff = np.abs(s_curve(eps, 0.5) - s_curve_exact(PARAMS, eps, 0.5))
        assert diff.max() < 0.01 * PARAMS.amp ** 2

    def test_zero_crossing_unique_in_pull_in_region(self):
        xi = 0.5
        eps = np.linspace(-2 * xi + 1e-3, 2 * xi - 1e-3, 2001)
        s = s_curve(eps, xi) / discriminator_gain(xi)
        signs = np.sign(s[np.abs(eps) > 1e-9])
        assert np.all(signs == np.sign(eps[np.abs(eps) > 1e-9]))

    def test_spacing_validation(self):
        with pytest.raises(ValueError):
            s_curve(0.1, 0.0)
        with pytest.raises(ValueError):
            s_curve(0.1, 0.7)


class TestDiscriminatorGain:
    @pytest.mark.parametrize("xi", [0.05, 0.1, 0.25, 0.4, 0.5])
    def test_matches_finite_difference(self, xi):
        h = 1e-5
        fd = (s_curve(h, xi) - s_curve(-h, xi)) / (2 * h)
        assert discriminator_gain(xi) == pytest.approx(fd, rel=1e-3)

    def test_normalized_slope_is_unity(self):
        h = 1e-5
        for xi in (0.1, 0.5):
            kd = discriminator_gain(xi)
            slope = (s_curve(h, xi) - s_curve(-h, xi)) / (2 * h) / kd
            assert slope == pytest.approx(1.0, rel=5e-3)

    def test_positive_over_spacing_range(self):
        for xi in np.linspace(1e-3, 0.5, 200):
            assert discriminator_gain(float(xi)) > 0

    def test_small_spacing_series_limit(self):
        for xi in (1e-5, 1e-4, 1e-3):
            assert discriminator_gain(xi) / xi == pytest.approx(KD_SLOPE_LIMIT, rel=1e-4)

    def test_series_and_direct_branches_agree(self):
        # branch switch sits at pi*beta*xi = 0.1
        for xi in (0.03, 0.034, 0.04):
            x = np.pi * 0.9375 * xi
            direct = 2 * (1 - np.cos(2 * x) - x * np.sin(2 * x)) / (np.pi ** 2 * 0.9375 ** 2 * xi ** 3)
            assert discriminator_gain(xi) == pytest.approx(direct, rel=1e-7)

    def test_amp_scaling(self):
        assert discriminator_gain(0.5, amp=3.0) == pytest.approx(9 * discriminator_gain(0.5))


def test_mainlobe_narrower_than_gnss_codes():
    """The 5G comb null (~0.139 us at 7.68 Msps) beats the GPS C/A chip width."""
    null_s = first_null_seconds(PARAMS, 7.68e6)
    assert null_s == pytest.approx((256 / 240) / 7.68e6)
    assert null_s < gnss_one_chip_seconds("gps_l1_ca")
    assert null_s < gnss_one_chip_seconds("galileo_e1b")
