import math

import numpy as np
import pytest

from covertower import (
    BundleParams,
    Rect,
    build_frame,
    derive_rng,
    eval_section_weighted,
    locate_zeros,
    make_product_tower,
    pushforward_zeros,
    reduce,
    sample_onb,
    sample_sphere,
    winding_count,
)

SQPI = math.sqrt(math.pi)


@pytest.fixture(scope="module")
def tower():
    return make_product_tower(SQPI, 2, 3)


@pytest.fixture(scope="module")
def p2():
    return BundleParams(N=2, d0=1)


@pytest.fixture(scope="module")
def frames(tower, p2):
    return {j: build_frame(tower, p2, j) for j in range(3)}


class TestWindingCount:
    def test_zero_free_rectangle(self, frames):
        s = sample_sphere(frames[0], derive_rng(1, "w", 0))
        zs = locate_zeros(s).points()
        # a tiny rectangle away from every zero
        far = Rect(
            z0=complex(np.real(zs).min() - 0.45, np.imag(zs).mean()),
            width=0.01,
            height=0.01,
        )
        assert winding_count(s, far) == 0

    def test_full_cell_counts_degree(self, frames, tower, p2):
        for j in (0, 1):
            lat = tower.level(j).lattice
            d = p2.N * p2.d0 * tower.level(j).index_I
            for k in range(10):
                s = sample_sphere(frames[j], derive_rng(2, f"wc{j}", k))
                rect = Rect(
                    z0=0.013 * lat.g1 + 0.007 * lat.g2,
                    width=lat.g1.real,
                    height=lat.g2.imag,
                )
                assert winding_count(s, rect) == d

    def test_additivity_under_split(self, frames):
        s = sample_sphere(frames[1], derive_rng(3, "add", 1))
        a = 2 * SQPI
        rect = Rect(z0=0.017 + 0.011j, width=a, height=a)
        left = Rect(z0=rect.z0, width=a * 0.53, height=a)
        right = Rect(z0=rect.z0 + a * 0.53, width=a * 0.47, height=a)
        assert winding_count(s, rect) == winding_count(s, left) + winding_count(
            s, right
        )

    def test_boundary_zero_dilation_retry(self, frames):
        s = sample_sphere(frames[0], derive_rng(4, "bz", 0))
        z0 = locate_zeros(s).points()[0]
        # rectangle with its left edge exactly through a zero
        rect = Rect(z0=z0 - 0.25j, width=0.5, height=0.5)
        count = winding_count(s, rect)
        assert count >= 1


class TestLocateZeros:
    def test_degree_exact_over_seeds(self, frames, tower, p2):
        for j in (0, 1):
            d = p2.N * p2.d0 * tower.level(j).index_I
            for k in range(100):
                s = sample_sphere(frames[j], derive_rng(5, f"deg{j}", k))
                zs = locate_zeros(s)
                assert zs.total == d
                assert all(m == 1 for _, m in zs.zeros)
                assert not zs.flags
                # distinct zeros
                pts = zs.points()
                dist = np.abs(pts[:, None] - pts[None, :]) + np.eye(d)
                assert dist.min() > 1e-5

    def test_residuals_certified(self, frames):
        s = sample_sphere(frames[1], derive_rng(6, "resid", 0))
        zs = locate_zeros(s, tol=1e-9)
        vals = np.abs(eval_section_weighted(s, zs.points()))
        assert np.max(vals) <= 1e-9
        assert np.all(zs.newton_ratios <= 0.5)

    def test_onb_first_vector(self, frames, tower, p2):
        basis = sample_onb(frames[1], derive_rng(7, "onbz", 0))
        d = p2.N * p2.d0 * tower.level(1).index_I
        assert locate_zeros(basis[0]).total == d

    def test_zeros_closed_under_automorphy(self, frames, tower):
        lat = tower.level(1).lattice
        s = sample_sphere(frames[1], derive_rng(8, "autoz", 0))
        pts = locate_zeros(s, tol=1e-10).points()
        for g in (lat.g1, -lat.g2):
            shifted = np.abs(eval_section_weighted(s, pts + g))
            assert np.max(shifted) <= 1e-8


class TestPushforward:
    def test_level0_identity(self, frames, tower):
        s = sample_sphere(frames[0], derive_rng(9, "pf", 0))
        zs = locate_zeros(s)
        assert np.allclose(pushforward_zeros(zs, tower), zs.points())

    def test_translate_reduces(self, frames, tower):
        s = sample_sphere(frames[1], derive_rng(10, "pf1", 0))
        zs = locate_zeros(s)
        pushed = pushforward_zeros(zs, tower)
        want = reduce(tower.base, zs.points())
        assert np.allclose(pushed, want)
        base = tower.base
        inv = base.inv_basis
        ss = inv[0, 0] * pushed.real + inv[0, 1] * pushed.imag
        tt = inv[1, 0] * pushed.real + inv[1, 1] * pushed.imag
        assert np.all((ss >= 0) & (ss < 1) & (tt >= 0) & (tt < 1))

    def test_cardinality_preserved(self, frames, tower):
        s = sample_sphere(frames[1], derive_rng(11, "pf2", 0))
        zs = locate_zeros(s)
        assert pushforward_zeros(zs, tower).size == zs.total
