import json
import math
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy import stats
from scipy.integrate import quad

from density import DensityModel, eval_gaussian
from errors import DomainError, EmptySampleError
from spectral_stats import (
    SpectrumSample,
    chi2_gof,
    haar_test,
    histogram,
    ks_distance,
    moment,
    nns,
    read_samples_csv,
    read_samples_json,
    small_s_exponent,
    spacing_histogram,
    wigner_surmise,
    wigner_surmise_cdf,
    write_samples_csv,
    write_samples_json,
)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def gaussian_spectra(rng):
    """Independent sorted N(0, 1) spectra: the beta = 0 stationary law."""
    return [SpectrumSample(float(k), np.sort(rng.standard_normal(40))) for k in range(500)]


class TestSpectrumSample:
    def test_rejects_unsorted(self):
        """Test that spectra must be ascending."""
        with pytest.raises(DomainError):
            SpectrumSample(0.0, [1.0, 0.0])

    def test_ties_allowed(self):
        """Test that equal neighbours are still ascending."""
        assert SpectrumSample(0.0, [0.0, 0.0, 1.0]).n_dim == 3


class TestHistogram:
    def test_left_closed_bins(self):
        """Test that a point on a bin edge lands in the right-hand bin."""
        curve = histogram([SpectrumSample(0.0, [0.0])], 10, (-1.0, 1.0))
        np.testing.assert_array_equal(curve.values, [0.0] * 5 + [5.0] + [0.0] * 4)
        np.testing.assert_allclose(curve.lambda_grid, np.linspace(-0.9, 0.9, 10), atol=1e-15)

    def test_unit_mass(self, gaussian_spectra):
        """Test that the bin heights times the width sum to one."""
        curve = histogram(gaussian_spectra, 50, (-5.0, 5.0))
        assert curve.values.sum() * 0.2 == pytest.approx(1.0, abs=1e-12)

    def test_matches_sampler(self, rng):
        """Test a large normal sample against the Gaussian density."""
        draws = rng.standard_normal(1_000_000)
        samples = [SpectrumSample(0.0, np.sort(draws))]
        curve = histogram(samples, 50, (-5.0, 5.0))
        assert np.max(np.abs(curve.values - eval_gaussian(1.0, curve.lambda_grid))) < 0.01

    def test_empty(self):
        """Test that no samples is an error."""
        with pytest.raises(EmptySampleError):
            histogram([], 10, (-1.0, 1.0))

    def test_nothing_in_range(self):
        """Test that a range missing every eigenvalue is an error."""
        with pytest.raises(EmptySampleError):
            histogram([SpectrumSample(0.0, [5.0])], 10, (-1.0, 1.0))

    def test_degenerate_range(self):
        """Test that lo >= hi is rejected."""
        with pytest.raises(DomainError):
            histogram([SpectrumSample(0.0, [0.0])], 10, (1.0, 1.0))

    @pytest.mark.parametrize("bins", [0, 9])
    def test_too_few_bins(self, bins):
        """Test that fewer than ten bins are rejected."""
        with pytest.raises(DomainError):
            histogram([SpectrumSample(0.0, [0.0])], bins, (-1.0, 1.0))


class TestNns:
    def test_equally_spaced(self):
        """Test that a picket fence gives spacings all equal to one."""
        samples = [SpectrumSample(0.0, np.arange(20.0) * 0.3)]
        result = nns(samples)
        np.testing.assert_allclose(result.spacings, 1.0, rtol=1e-12)

    def test_mean_is_one(self, gaussian_spectra):
        """Test the normalisation after unfolding."""
        result = nns(gaussian_spectra, model=DensityModel("gaussian"))
        assert result.spacings.mean() == pytest.approx(1.0, abs=1e-12)

    def test_poisson_limit(self, rng):
        """Test that independent points unfold to exponential spacings."""
        samples = [SpectrumSample(0.0, np.sort(rng.standard_normal(40))) for _ in range(1100)]
        result = nns(samples, model=DensityModel("gaussian"))
        assert len(result.spacings) >= 10_000
        assert ks_distance(result.spacings, stats.expon.cdf) < 0.03

    def test_bulk_window(self):
        """Test that the middle half of N = 8 keeps four levels, three spacings."""
        result = nns([SpectrumSample(0.0, np.arange(8.0))], bulk_fraction=0.5)
        assert len(result.spacings) == 3
        assert result.metadata()["bulk_fraction"] == 0.5

    def test_zero_spacings_dropped(self):
        """Test that coincident levels are dropped and counted."""
        lam = np.array([0.0, 1.0, 2.0, 2.0, 3.0, 4.0, 5.0, 6.0])
        result = nns([SpectrumSample(0.0, lam)], bulk_fraction=1.0)
        assert result.dropped == 1
        assert len(result.spacings) == 6

    def test_small_spectrum(self):
        """Test that N < 4 is rejected."""
        with pytest.raises(DomainError):
            nns([SpectrumSample(0.0, [0.0, 1.0, 2.0])])

    def test_local_unfolding_needs_a_model(self):
        """Test that the default only rescales globally and a corrected model unfolds locally."""
        lam = np.array([-3.0, -1.5, -0.8, -0.2, 0.3, 0.9, 1.6, 3.2])
        samples = [SpectrumSample(0.0, lam)]
        plain = nns(samples, bulk_fraction=1.0)
        assert plain.unfolding == "none"
        np.testing.assert_allclose(plain.spacings, np.diff(lam) / np.diff(lam).mean(), rtol=1e-12)
        local = nns(samples, bulk_fraction=1.0, model=DensityModel("corrected", beta=1.0, n_dim=8))
        assert local.unfolding == "corrected"
        assert not np.allclose(local.spacings, plain.spacings)


class TestWignerSurmise:
    def test_goe_value(self):
        """Test P(1) = (pi/2) e^{-pi/4} at beta = 1."""
        assert wigner_surmise(1.0, 1.0) == pytest.approx(math.pi / 2 * math.exp(-math.pi / 4), rel=1e-12)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0, 4.0])
    def test_unit_mass_and_mean(self, beta):
        """Test the two normalising constraints by quadrature."""
        mass = quad(lambda s: wigner_surmise(beta, s), 0, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
        mean = quad(lambda s: s * wigner_surmise(beta, s), 0, np.inf, epsabs=1e-13, epsrel=1e-13)[0]
        assert mass == pytest.approx(1.0, abs=1e-8)
        assert mean == pytest.approx(1.0, abs=1e-8)

    @pytest.mark.parametrize("beta", [0.5, 1.0, 2.0])
    def test_small_s_slope(self, beta):
        """Test that the log-log slope at s = 1e-3 equals beta."""
        s, h = 1e-3, 1e-6
        slope = (math.log(wigner_surmise(beta, s + h)) - math.log(wigner_surmise(beta, s - h))) / (
            math.log(s + h) - math.log(s - h)
        )
        assert slope == pytest.approx(beta, abs=1e-3)

    def test_cdf_consistent(self):
        """Test that the CDF integrates the density."""
        mass = quad(lambda s: wigner_surmise(0.5, s), 0, 1.3)[0]
        assert wigner_surmise_cdf(0.5, 1.3) == pytest.approx(mass, rel=1e-9)

    def test_beta_positive(self):
        """Test that beta <= 0 is rejected."""
        with pytest.raises(DomainError):
            wigner_surmise(0.0, 1.0)


class TestKsDistance:
    def test_own_law(self, rng):
        """Test data from the reference law stays below the 99% bound."""
        data = rng.standard_normal(10_000)
        assert ks_distance(data, stats.norm.cdf) < 1.63 / math.sqrt(10_000)

    def test_single_point_at_median(self):
        """Test one point at the median gives 1/2."""
        assert ks_distance([0.0], stats.norm.cdf) == pytest.approx(0.5)

    def test_wrong_law(self, rng):
        """Test uniform data against a Gaussian CDF."""
        assert ks_distance(rng.uniform(-1, 1, 5000), stats.norm.cdf) > 0.05

    def test_empty(self):
        """Test that no data is an error."""
        with pytest.raises(EmptySampleError):
            ks_distance([], stats.norm.cdf)


class TestMoment:
    def test_zero_spectra(self):
        """Test that all-zero spectra have zero moments."""
        samples = [SpectrumSample(0.0, np.zeros(5)) for _ in range(10)]
        est = moment(samples, 2)
        assert est.value == 0.0
        assert est.stderr == 0.0

    def test_standard_normal(self, gaussian_spectra):
        """Test m2 = 1 within three standard errors."""
        est = moment(gaussian_spectra, 2)
        assert abs(est.value - 1.0) <= 3 * est.stderr
        assert est.n_blocks == 64

    def test_stderr_scale(self, gaussian_spectra):
        """Test the jackknife error against sqrt(Var(x^2)/n) for independent draws."""
        est = moment(gaussian_spectra, 2)
        naive = math.sqrt(2.0 / (500 * 40))
        assert 0.5 * naive < est.stderr < 2.0 * naive

    def test_order(self):
        """Test that k < 1 is rejected."""
        with pytest.raises(DomainError):
            moment([SpectrumSample(0.0, [1.0])], 0)

    def test_single_sample_has_no_error(self):
        """Test that one sample gives no jackknife error."""
        assert math.isnan(moment([SpectrumSample(0.0, [1.0, 2.0])], 2).stderr)


class TestSmallSExponent:
    def test_power_law(self, rng):
        """Test recovery of beta from draws with P(s) ~ s^beta near zero."""
        beta = 0.5
        # s = u^{1/(beta+1)} has CDF s^{beta+1} on [0, 1]
        s = rng.uniform(size=200_000) ** (1.0 / (beta + 1.0))
        assert small_s_exponent(s) == pytest.approx(beta, abs=0.02)

    def test_too_few_points(self):
        """Test that an empty window is an error."""
        with pytest.raises(EmptySampleError):
            small_s_exponent(np.array([1.0, 2.0]))


class TestChi2Gof:
    def test_own_law_not_rejected(self, rng):
        """Test that data from the reference law gives a non-tiny p-value."""
        data = rng.standard_normal(20_000)
        result = chi2_gof(data, stats.norm.cdf, 40, (-4.0, 4.0))
        assert result.pvalue > 1e-3

    def test_wrong_law_rejected(self, rng):
        """Test that a scaled Gaussian is rejected."""
        data = 1.3 * rng.standard_normal(20_000)
        assert chi2_gof(data, stats.norm.cdf, 40, (-4.0, 4.0)).pvalue < 1e-6

    def test_sparse_bins_merged(self, rng):
        """Test that every merged bin expects at least twenty counts."""
        data = rng.standard_normal(500)
        result = chi2_gof(data, stats.norm.cdf, 100, (-4.0, 4.0))
        assert result.dof <= 500 // 20


class TestHaarTest:
    def test_haar_vectors_pass(self, rng):
        """Test overlaps of Haar-random vectors."""
        n = 10
        q = [np.linalg.qr(rng.standard_normal((n, n)))[0] for _ in range(2000)]
        overlaps = np.array([m[0, 0] ** 2 for m in q])
        report = haar_test(overlaps, n)
        assert report.passed
        assert report.expected_mean == pytest.approx(0.1)

    def test_frozen_basis_fails(self):
        """Test that axis-aligned vectors fail."""
        overlaps = np.tile([1.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0], 100)
        assert not haar_test(overlaps, 10).passed


class TestSpacingHistogram:
    def test_mass_in_range(self):
        """Test that heights integrate to the fraction of spacings in range."""
        spacings = nns([SpectrumSample(0.0, np.arange(20.0))])
        curve = spacing_histogram(spacings, bins=40, s_max=4.0)
        assert curve.values.sum() * 0.1 == pytest.approx(1.0)


class TestSampleFiles:
    def test_csv_layout(self, temp_dir):
        """Test header and row layout of the samples CSV."""
        samples = [SpectrumSample(1.0, [-0.5, 0.25]), SpectrumSample(2.0, [0.0, 1.0])]
        path = temp_dir / "samples.csv"
        write_samples_csv(samples, path)
        text = path.read_bytes().decode()
        assert text == "t,lambda_1,lambda_2\n1,-0.5,0.25\n2,0,1\n"

    def test_csv_round_trip(self, temp_dir, gaussian_spectra):
        """Test that samples come back bit for bit."""
        path = temp_dir / "samples.csv"
        write_samples_csv(gaussian_spectra[:5], path)
        back = read_samples_csv(path)
        assert [s.t for s in back] == [s.t for s in gaussian_spectra[:5]]
        for a, b in zip(back, gaussian_spectra[:5]):
            assert np.array_equal(a.lambdas, b.lambdas)

    def test_json_with_metadata(self, temp_dir):
        """Test that the JSON form carries its metadata."""
        path = temp_dir / "samples.json"
        write_samples_json([SpectrumSample(0.5, [1.0, 2.0])], path, metadata={"seed": 7})
        payload = json.loads(path.read_text())
        assert payload["metadata"] == {"seed": 7}
        assert read_samples_json(path)[0].lambdas.tolist() == [1.0, 2.0]

    def test_empty_write(self, temp_dir):
        """Test that writing no samples is an error."""
        with pytest.raises(EmptySampleError):
            write_samples_csv([], temp_dir / "x.csv")
