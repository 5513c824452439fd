import math
import shutil
import tempfile
from pathlib import Path

import numpy as np
import pytest
from scipy.special import erfcx

from density import (
    DensityCurve,
    DensityModel,
    eval_corrected,
    eval_gaussian,
    eval_kerov,
    eval_kerov_limit,
    eval_kerov_wronskian,
    eval_semicircle,
    kerov_moment,
    ode_residual,
    semicircle_residual,
    stieltjes_numeric,
    stieltjes_semicircle,
    tabulate,
    tail_exponent_check,
)
from errors import DomainError

RESIDUAL_POINTS = (1.5j, 2.0 + 1.5j, -1.0 + 2.0j)


@pytest.fixture
def temp_dir():
    """Create a temporary directory for testing."""
    temp_dir = tempfile.mkdtemp()
    yield Path(temp_dir)
    shutil.rmtree(temp_dir)


@pytest.fixture(scope="module")
def kerov_curves():
    """Tabulated rho_c on the default grid for the crossover values under test."""
    return {c: tabulate(DensityModel("kerov", c=c)) for c in (0.0, 0.5, 1.0, 2.0, 4.0)}


class TestEvalGaussian:
    def test_peak(self):
        """Test the peak value 1/(sigma sqrt(2 pi))."""
        assert eval_gaussian(2.0, 0.0) == pytest.approx(1.0 / (2.0 * math.sqrt(2 * math.pi)))

    def test_bad_sigma(self):
        """Test that sigma <= 0 is rejected."""
        with pytest.raises(DomainError):
            eval_gaussian(0.0, 1.0)


class TestEvalSemicircle:
    def test_zero_outside_support(self):
        """Test rho = 0 beyond the edge sigma sqrt(2 beta N)."""
        edge = math.sqrt(2 * 0.5 * 50)
        assert eval_semicircle(0.5, 50, 1.0, edge + 0.1) == 0.0

    def test_normalised(self):
        """Test unit mass on a fine grid."""
        curve = tabulate(DensityModel("semicircle", beta=1.0, n_dim=10), count=20001)
        assert curve.integral() == pytest.approx(1.0, abs=1e-5)


class TestEvalKerov:
    def test_c0_is_gaussian(self):
        """Test rho_0 against the unit Gaussian pointwise."""
        lam = np.linspace(-10.0, 10.0, 401)
        np.testing.assert_allclose(eval_kerov(0.0, lam), eval_gaussian(1.0, lam), atol=1e-8)

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0, 4.0])
    def test_normalised(self, kerov_curves, c):
        """Test unit mass."""
        assert kerov_curves[c].integral() == pytest.approx(1.0, abs=1e-5)

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0, 4.0])
    def test_second_moment(self, kerov_curves, c):
        """Test m2 = 1 + c."""
        assert kerov_curves[c].moment(2) == pytest.approx(1.0 + c, rel=1e-4)

    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0, 4.0])
    def test_fourth_moment(self, kerov_curves, c):
        """Test m4 = (1 + c)(2c + 3)."""
        assert kerov_curves[c].moment(4) == pytest.approx((1.0 + c) * (2.0 * c + 3.0), rel=1e-3)

    def test_even(self):
        """Test rho_c(-u) = rho_c(u)."""
        assert eval_kerov(1.5, -2.0) == eval_kerov(1.5, 2.0)

    def test_negative_order_normalised(self):
        """Test the continuation below c = 0 still has unit mass."""
        curve = tabulate(DensityModel("kerov", c=-0.5))
        assert curve.integral() == pytest.approx(1.0, abs=1e-5)

    def test_scalar_returns_float(self):
        """Test that scalar input gives a float."""
        assert isinstance(eval_kerov(1.0, 0.5), float)

    def test_collapse_rejected(self):
        """Test that c <= -1 is rejected."""
        with pytest.raises(DomainError):
            eval_kerov(-1.0, 0.0)


class TestEvalKerovWronskian:
    @pytest.mark.parametrize("c", [0.5, 1.0, 3.0])
    def test_matches_direct_form(self, c):
        """Test that -W/(c pi |y|^2) equals 1/(sqrt(2 pi) Gamma(1+c) |y|^2)."""
        lam = np.linspace(-6.0, 6.0, 25)
        np.testing.assert_allclose(eval_kerov_wronskian(c, lam), eval_kerov(c, lam), rtol=1e-10)

    def test_c0_undefined(self):
        """Test that the 0/0 form is refused at c = 0."""
        with pytest.raises(DomainError):
            eval_kerov_wronskian(0.0, 1.0)


class TestSemicircleLimit:
    def test_large_c(self):
        """Test the sup distance to (1/2 pi c) sqrt(4c - u^2) at c = 100."""
        c = 100.0
        u = np.linspace(-18.0, 18.0, 721)
        limit = eval_kerov_limit(c, u)
        gap = np.max(np.abs(eval_kerov(c, u) - limit))
        assert gap <= 0.05 * limit.max()

    def test_large_c_past_underflow(self):
        """Test c = 500, where D_-c(0) underflows in linear form, against the same limit."""
        c = 500.0
        u = np.linspace(-40.0, 40.0, 801)
        limit = eval_kerov_limit(c, u)
        gap = np.max(np.abs(eval_kerov(c, u) - limit))
        assert gap <= 0.05 * limit.max()


class TestEvalCorrected:
    def test_beta_zero_is_gaussian(self):
        """Test that beta = 0 gives the Gaussian of rms sigma."""
        lam = np.linspace(-5.0, 5.0, 41)
        np.testing.assert_allclose(eval_corrected(0.0, 10, 1.3, lam), eval_gaussian(1.3, lam), atol=1e-9)

    def test_second_moment_is_exact_finite_n(self):
        """Test m2 = sigma^2 (beta N/2 + 1 - beta/2)."""
        curve = tabulate(DensityModel("corrected", beta=0.5, n_dim=50))
        assert curve.integral() == pytest.approx(1.0, abs=1e-5)
        assert curve.moment(2) == pytest.approx(0.25 * 50 + 1 - 0.25, rel=1e-4)

    def test_sigma_scaling(self):
        """Test rho_sigma(lambda) = rho_1(lambda/sigma)/sigma."""
        assert eval_corrected(0.5, 20, 2.0, 3.0) == pytest.approx(eval_corrected(0.5, 20, 1.0, 1.5) / 2.0, rel=1e-12)

    @pytest.mark.parametrize("beta", [2.0, -0.1])
    def test_beta_range(self, beta):
        """Test that beta outside [0, 2) is rejected."""
        with pytest.raises(DomainError):
            eval_corrected(beta, 10, 1.0, 0.0)

    @pytest.mark.parametrize(("beta", "n_dim"), [(1.0, 400), (1.9, 20)])
    def test_large_crossover_parameter(self, beta, n_dim):
        """Test normalisation and m2 where c = beta N/(2 - beta) is in the hundreds."""
        curve = tabulate(DensityModel("corrected", beta=beta, n_dim=n_dim))
        assert curve.integral() == pytest.approx(1.0, abs=1e-4)
        assert curve.moment(2) == pytest.approx(beta * n_dim / 2 + 1 - beta / 2, rel=1e-3)

    def test_approaches_semicircle_as_n_grows(self):
        """Test that the bulk gap to the semicircle shrinks for N = 25, 50, 100, 200 at beta = 1/2."""
        gaps = []
        for n_dim in (25, 50, 100, 200):
            edge = math.sqrt(2 * 0.5 * n_dim)
            lam = np.linspace(-0.8 * edge, 0.8 * edge, 401)
            gaps.append(np.max(np.abs(eval_corrected(0.5, n_dim, 1.0, lam) - eval_semicircle(0.5, n_dim, 1.0, lam))))
        assert all(later < earlier for earlier, later in zip(gaps, gaps[1:]))

    def test_small_beta_at_fixed_beta_n_is_kerov(self):
        """Test beta -> 0 with beta N = 2 held fixed against rho_1."""
        lam = np.linspace(-6.0, 6.0, 121)
        target = eval_kerov(1.0, lam)
        gaps = [np.max(np.abs(eval_corrected(2.0 / n, n, 1.0, lam) - target)) for n in (100, 1000)]
        assert gaps[1] < gaps[0]
        assert gaps[1] <= 2e-3


class TestDensityModel:
    def test_kind_dispatch(self):
        """Test that evaluate routes to the matching closed form."""
        assert DensityModel("kerov", c=1.0).evaluate(0.3) == eval_kerov(1.0, 0.3)
        assert DensityModel("gaussian", sigma=2.0).evaluate(0.3) == eval_gaussian(2.0, 0.3)

    def test_crossover_parameters(self):
        """Test alpha = 2/(2 - beta) and c = beta N/(2 - beta)."""
        model = DensityModel("corrected", beta=0.5, n_dim=50)
        assert model.alpha == pytest.approx(4.0 / 3.0)
        assert model.crossover_c == pytest.approx(50.0 / 3.0)

    def test_missing_parameters(self):
        """Test that a corrected model needs beta and N."""
        with pytest.raises(DomainError):
            DensityModel("corrected", beta=0.5)

    def test_unknown_kind(self):
        """Test that unknown kinds are rejected."""
        with pytest.raises(DomainError):
            DensityModel("poisson")


class TestDensityCurve:
    def test_csv_round_trip(self, temp_dir):
        """Test that a curve survives CSV write and read bit for bit."""
        curve = tabulate(DensityModel("kerov", c=2.0), np.linspace(-8.0, 8.0, 2001))
        path = temp_dir / "rho.csv"
        curve.to_csv(path)
        lines = path.read_text().splitlines()
        assert lines[0] == "lambda,value"
        assert len(lines) == 2002
        back = DensityCurve.from_csv(path)
        assert np.array_equal(back.lambda_grid, curve.lambda_grid)
        assert np.array_equal(back.values, curve.values)

    def test_cdf(self):
        """Test the CDF of a symmetric density at its ends and centre."""
        cdf = tabulate(DensityModel("gaussian")).cdf()
        assert cdf(0.0) == pytest.approx(0.5, abs=1e-6)
        assert cdf(-20.0) == 0.0
        assert cdf(20.0) == 1.0

    def test_rejects_negative_values(self):
        """Test that densities must be non-negative."""
        with pytest.raises(DomainError):
            DensityCurve(np.array([0.0, 1.0]), np.array([0.5, -0.1]))

    def test_rejects_unsorted_grid(self):
        """Test that the grid must ascend."""
        with pytest.raises(DomainError):
            DensityCurve(np.array([1.0, 0.0]), np.array([0.5, 0.5]))


class TestStieltjes:
    def test_gaussian_closed_form(self):
        """Test G(iy) = i sqrt(pi/2) erfcx(y/sqrt 2) for the unit Gaussian."""
        curve = tabulate(DensityModel("gaussian"))
        y = 2.0
        expected = 1j * math.sqrt(math.pi / 2) * erfcx(y / math.sqrt(2))
        assert abs(stieltjes_numeric(curve, 1j * y) - expected) <= 1e-6

    def test_large_z_series(self):
        """Test G(z) ~ -1/z - m2/z^3 far from the support."""
        curve = tabulate(DensityModel("gaussian"))
        z = 20j
        assert abs(stieltjes_numeric(curve, z) - (-1 / z - 1 / z**3)) <= 1e-5

    def test_real_axis_rejected(self):
        """Test that z on the real axis is rejected."""
        with pytest.raises(DomainError):
            stieltjes_numeric(tabulate(DensityModel("gaussian")), 1.0)

    def test_semicircle_closed_form_decays(self):
        """Test the branch of the closed form: G ~ -1/z."""
        z = 1000j
        assert abs(stieltjes_semicircle(1.0, 10, 1.0, z) * z + 1.0) <= 1e-3

    def test_semicircle_equation(self):
        """Test that the tabulated semicircle solves the large-N Stieltjes equation."""
        curve = tabulate(DensityModel("semicircle", beta=1.0, n_dim=8), count=20001)
        assert semicircle_residual(1.0, 8, 1.0, curve, [2j, 1.0 + 3j]) <= 1e-3

    def test_semicircle_numeric_matches_closed_form(self):
        """Test the trapezoid transform against the closed form."""
        curve = tabulate(DensityModel("semicircle", beta=1.0, n_dim=8), count=20001)
        z = 1.0 + 2.0j
        assert abs(stieltjes_numeric(curve, z) - stieltjes_semicircle(1.0, 8, 1.0, z)) <= 1e-4


class TestOdeResidual:
    @pytest.mark.parametrize("c", [0.0, 0.5, 1.0, 2.0, 4.0])
    def test_exact_density_solves_equation(self, kerov_curves, c):
        """Test c G^2 + z G + G' + 1 = 0 for rho_c."""
        assert ode_residual(c, kerov_curves[c], RESIDUAL_POINTS) <= 5e-3

    def test_c1_on_clipped_grid(self):
        """Test the residual on [-8, 8] with 2000 points."""
        curve = tabulate(DensityModel("kerov", c=1.0), np.linspace(-8.0, 8.0, 2000))
        assert ode_residual(1.0, curve, [1.5j, 2.0 + 1.5j, -1.0 + 2.0j]) <= 5e-3

    def test_wrong_density_fails(self):
        """Test that a semicircle with the same m2 does not solve the c = 1 equation."""
        curve = tabulate(DensityModel("semicircle", beta=1.0, n_dim=4), count=20001)
        assert curve.moment(2) == pytest.approx(2.0, rel=1e-3)
        assert ode_residual(1.0, curve, [0.5j, 1.0j]) > 0.05

    def test_near_axis_rejected(self):
        """Test that samples with |Im z| < 0.5 are refused."""
        with pytest.raises(DomainError):
            ode_residual(1.0, tabulate(DensityModel("kerov", c=1.0)), [0.1j])


class TestKerovMoment:
    def test_values(self):
        """Test m2 and m4 at c = 2."""
        assert kerov_moment(2.0, 2) == 3.0
        assert kerov_moment(2.0, 4) == 21.0

    def test_unsupported_order(self):
        """Test that only k in {2, 4} is exposed."""
        with pytest.raises(DomainError):
            kerov_moment(1.0, 6)


class TestTailExponent:
    @pytest.mark.parametrize("c", [1.0, 2.0, 3.0])
    def test_exponent_is_2c(self, c):
        """Test rho_c(u) ~ u^{2c} e^{-u^2/2}."""
        assert tail_exponent_check(c) == pytest.approx(2.0 * c, abs=0.1)

    def test_gaussian_tail(self):
        """Test that c = 0 has no power-law prefactor."""
        assert tail_exponent_check(0.0) == pytest.approx(0.0, abs=1e-4)
