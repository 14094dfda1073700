import math

import numpy as np
import pytest

from covertower import (
    BundleParams,
    DomainError,
    TestForm,
    bootstrap_var_stderr,
    build_frame,
    derive_rng,
    empirical_pairings,
    empirical_stats,
    expected_pairing_theory,
    gtilde,
    gtilde_integral,
    locate_zeros,
    make_product_tower,
    onb_mean_square_deviation,
    pair_current,
    preset_forms,
    sample_sphere,
    summability_partial_sums,
    variance_paper_bound,
    variance_theory,
)

SQPI = math.sqrt(math.pi)

# frozen oracle values (60+ term series evaluated with 30-digit arithmetic)
LI2_QUARTER = 0.267652639082732606919183828489
GTILDE_HALF = 0.00677972054921447557880028699426


@pytest.fixture(scope="module")
def tower():
    return make_product_tower(SQPI, 2, 4)


@pytest.fixture(scope="module")
def p2():
    return BundleParams(N=2, d0=1)


@pytest.fixture(scope="module")
def forms(tower):
    return preset_forms(tower.base)


class TestTestForm:
    def test_periodicity(self, tower, forms):
        lat = tower.base
        rng = np.random.default_rng(0)
        z = (rng.random(20) + 1j * rng.random(20)) * 3 - (1.5 + 1.5j)
        for form in forms.values():
            for g in (lat.g1, lat.g2, lat.g1 - 2 * lat.g2):
                assert np.allclose(form.value(z + g), form.value(z), atol=1e-12)

    def test_laplacian_against_finite_differences(self, forms):
        h = 1e-4
        z = 0.37 + 0.89j
        for form in forms.values():
            stencil = (
                form.value(z + h)
                + form.value(z - h)
                + form.value(z + 1j * h)
                + form.value(z - 1j * h)
                - 4 * form.value(z)
            ) / h**2
            assert form.laplacian(z) == pytest.approx(float(stencil), abs=1e-4)

    def test_laplacian_mean_zero(self, tower, forms):
        lat = tower.base
        t = (np.arange(64) + 0.5) / 64
        S, T = np.meshgrid(t, t, indexing="ij")
        Z = (S * lat.g1 + T * lat.g2).ravel()
        for form in forms.values():
            assert abs(float(form.laplacian(Z).sum())) / Z.size < 1e-10

    def test_curvature_l1_single_cosine(self, tower):
        # int |cos| over a full period is 2/pi of the cell mass
        form = preset_forms(tower.base)["k10"]
        lam2 = 1.0 / math.pi  # |dual vector|^2 for the (1,0) frequency
        want = 4 * math.pi**2 * lam2 / 2 * (2 / math.pi) * tower.base.area
        assert form.curvature_l1(grid=512) == pytest.approx(want, rel=1e-4)


class TestGtilde:
    def test_endpoints(self):
        assert gtilde(0.0) == 0.0
        assert gtilde(1.0) == pytest.approx(1 / 24, abs=1e-12)

    def test_half_against_frozen_dilog(self):
        assert gtilde(0.5) == pytest.approx(GTILDE_HALF, abs=1e-14)
        assert gtilde(0.5) == pytest.approx(
            LI2_QUARTER / (4 * math.pi**2), abs=1e-14
        )

    def test_series_vs_integral_on_grid(self):
        ts = np.linspace(0, 1, 1001)
        series = gtilde(ts)
        integral = np.array([gtilde_integral(float(t)) for t in ts])
        assert float(np.max(np.abs(series - integral))) <= 1e-10

    def test_parabola_bound_and_monotonicity(self):
        ts = np.linspace(0, 1, 1000)
        vals = gtilde(ts)
        assert np.all(vals <= ts**2 / 24 + 1e-15)
        assert np.all(np.diff(vals) >= 0)

    def test_domain(self):
        with pytest.raises(DomainError):
            gtilde(1.5)
        with pytest.raises(DomainError):
            gtilde(-0.1)
        with pytest.raises(DomainError):
            gtilde_integral(2.0)


class TestPairing:
    def test_constant_form_is_degree(self, tower, p2, forms):
        frame = build_frame(tower, p2, 1)
        for k in range(5):
            zs = locate_zeros(sample_sphere(frame, derive_rng(1, "pc", k)))
            assert pair_current(zs, tower, forms["const"]) == pytest.approx(
                p2.N * p2.d0, abs=1e-12
            )

    def test_single_zero_level0(self, tower, p2, forms):
        frame = build_frame(tower, p2, 0)
        zs = locate_zeros(sample_sphere(frame, derive_rng(2, "p1", 0)))
        z1, z2 = zs.points()
        got = pair_current(zs, tower, forms["k10"])
        from covertower import reduce

        want = forms["k10"].value(reduce(tower.base, z1)) + forms["k10"].value(
            reduce(tower.base, z2)
        )
        assert got == pytest.approx(float(want))


class TestExpectedPairing:
    def test_constant_form_mass(self, tower, p2, forms):
        for j in range(3):
            got = expected_pairing_theory(tower, p2, j, forms["const"], grid=48)
            assert got == pytest.approx(p2.N * p2.d0, rel=1e-9)

    def test_odd_frequency_exactly_zero(self, tower, p2, forms):
        # the kernel diagonal only carries even dual frequencies, so the
        # lowest-frequency forms pair to zero at every level
        for j in range(3):
            got = expected_pairing_theory(tower, p2, j, forms["k10"], grid=48)
            assert abs(got) < 1e-10

    def test_mix_form_nonzero_then_decays(self, tower, p2, forms):
        vals = [
            expected_pairing_theory(tower, p2, j, forms["mix"], grid=48)
            for j in range(4)
        ]
        assert abs(vals[0]) > 1e-3
        # deep-level limit is (N/pi) * cell integral of psi = 0 here
        assert abs(vals[-1]) < 1e-9


class TestVarianceTheory:
    def test_constant_form_is_zero(self, tower, p2, forms):
        assert variance_theory(tower, p2, 0, forms["const"], grid=8) == 0.0

    def test_quadratic_scaling(self, tower, p2):
        base = TestForm("b", tower.base, ((1, 0, 1.0, 0.0),))
        doubled = TestForm("d", tower.base, ((1, 0, 2.0, 0.0),))
        v1 = variance_theory(tower, p2, 0, base, grid=12)
        v4 = variance_theory(tower, p2, 0, doubled, grid=12)
        assert v4 == pytest.approx(4 * v1, rel=1e-12)

    def test_decreasing_along_tower(self, tower, p2, forms):
        for name in ("k10", "k11", "mix"):
            vals = [
                variance_theory(tower, p2, j, forms[name], grid=12) for j in range(4)
            ]
            assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_grid_convergence(self, tower, p2, forms):
        v = [variance_theory(tower, p2, 1, forms["k10"], grid=g) for g in (8, 12, 16)]
        assert abs(v[2] - v[1]) < 1e-3 * abs(v[2])

    def test_nonnegative(self, tower, p2, forms):
        assert variance_theory(tower, p2, 2, forms["k11"], grid=8) >= 0


class TestPaperBound:
    def test_constant_form_zero(self, tower, forms):
        assert variance_paper_bound(tower, 0, forms["const"], c_hat=1.0) == 0.0

    def test_decays_to_zero(self, tower, forms):
        vals = [
            variance_paper_bound(tower, j, forms["k10"], c_hat=1.0) for j in range(4)
        ]
        assert all(a > b for a, b in zip(vals, vals[1:]))

    def test_dominates_theory_after_level0_calibration(self, tower, p2, forms):
        form = forms["k10"]
        theo = [variance_theory(tower, p2, j, form, grid=12) for j in range(4)]
        bound = [variance_paper_bound(tower, j, form, c_hat=1.0) for j in range(4)]
        c = theo[0] / bound[0]
        assert all(t <= c * b * (1 + 1e-9) for t, b in zip(theo, bound))


class TestEmpirical:
    def test_constant_form_exact(self, tower, p2, forms):
        stats = empirical_stats(
            tower, p2, 0, forms["const"], n_samples=50, master_seed=77, grid=8
        )
        assert stats.var == 0.0
        assert stats.mean == pytest.approx(p2.N * p2.d0, abs=1e-12)

    def test_deterministic_for_fixed_seed(self, tower, p2, forms):
        a = empirical_pairings(tower, p2, 0, [forms["k10"]], 20, 123)
        b = empirical_pairings(tower, p2, 0, [forms["k10"]], 20, 123)
        assert np.array_equal(a, b)

    def test_mean_matches_theory(self, tower, p2, forms):
        stats = empirical_stats(
            tower, p2, 0, forms["mix"], n_samples=600, master_seed=901, grid=12
        )
        assert abs(stats.mean - stats.theory_mean) <= 3.5 * stats.stderr

    def test_variance_matches_theory(self, tower, p2, forms):
        vals = empirical_pairings(
            tower, p2, 0, [forms["k10"]], 800, 311, experiment_id="vt"
        )[:, 0]
        emp = float(vals.var(ddof=1))
        theo = variance_theory(tower, p2, 0, forms["k10"], grid=16)
        err = bootstrap_var_stderr(vals, seed=1)
        assert abs(emp - theo) <= 3.5 * err

    def test_rotation_invariance_in_law(self, tower, p2, forms):
        # applying a fixed unitary before normalization leaves the pairing
        # statistics unchanged in law
        frame = build_frame(tower, p2, 0)
        rng = np.random.default_rng(5)
        x = rng.standard_normal((2, 2)) + 1j * rng.standard_normal((2, 2))
        q, r = np.linalg.qr(x)
        q = q * (np.diagonal(r) / np.abs(np.diagonal(r)))[None, :]
        from covertower.sections import Section

        def pairing_mean(unitary):
            acc = []
            for k in range(400):
                g = derive_rng(42, "rot", k)
                v = g.standard_normal(2) + 1j * g.standard_normal(2)
                if unitary is not None:
                    v = unitary @ v
                sec = Section(frame=frame, coef=v / np.linalg.norm(v), norm=1.0)
                acc.append(pair_current(locate_zeros(sec), tower, forms["k10"]))
            return np.array(acc)

        plain = pairing_mean(None)
        rotated = pairing_mean(q)
        se = math.sqrt(plain.var(ddof=1) / plain.size + rotated.var(ddof=1) / rotated.size)
        assert abs(plain.mean() - rotated.mean()) <= 4 * se

    def test_onb_mode_deviation_decreases(self, tower, p2, forms):
        d0 = onb_mean_square_deviation(tower, p2, 0, forms["k10"], 40, 17)
        d1 = onb_mean_square_deviation(tower, p2, 1, forms["k10"], 10, 17)
        assert d1 < d0


class TestSummability:
    def test_partial_sums_and_ratio(self, tower):
        partial, ratios = summability_partial_sums(tower, s=1.0)
        assert np.all(np.diff(partial) > 0)
        gate = math.exp(-tower.level(0).tau)
        assert np.all(ratios <= gate + 1e-12)
        assert gate < 1

    def test_any_positive_exponent(self, tower):
        for s in (0.1, 1.0, 3.0):
            _, ratios = summability_partial_sums(tower, s=s)
            assert np.all(ratios < 1)


class TestVarianceBudget:
    def test_mc_fallback_close_to_quadrature(self, tower, p2, forms):
        exact = variance_theory(tower, p2, 0, forms["k10"], grid=16)
        mc = variance_theory(tower, p2, 0, forms["k10"], grid=16, budget=50_000)
        assert abs(mc - exact) / exact < 0.15

    def test_mc_deterministic(self, tower, p2, forms):
        a = variance_theory(tower, p2, 0, forms["k10"], grid=16, budget=50_000)
        b = variance_theory(tower, p2, 0, forms["k10"], grid=16, budget=50_000)
        assert a == b
