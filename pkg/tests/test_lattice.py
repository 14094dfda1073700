import math

import numpy as np
import pytest

from covertower import (
    DepthError,
    Lattice,
    LevelOutOfRange,
    QuantizationError,
    coset_reps,
    make_matrix_tower,
    make_product_tower,
    packing_count_bound,
    points_in_disk,
    reduce,
    shortest_vector,
)

SQPI = math.sqrt(math.pi)


def brute_points_in_disk(lat, center, radius):
    """Independent enumeration over a generous coefficient box.

    A unit step in the first coefficient moves the point by the cell height
    area/|g2| perpendicular to g2 (and vice versa), which bounds how many
    steps can stay inside the disk."""
    pts = []
    mbound = int(math.ceil(radius * abs(lat.g2) / lat.area)) + 2
    nbound = int(math.ceil(radius * abs(lat.g1) / lat.area)) + 2
    inv = lat.inv_basis
    c = np.array([center.real, center.imag])
    m0, n0 = (inv @ c).round().astype(int)
    for m in range(m0 - mbound, m0 + mbound + 1):
        for n in range(n0 - nbound, n0 + nbound + 1):
            g = m * lat.g1 + n * lat.g2
            if abs(g - center) <= radius:
                pts.append(g)
    return sorted(pts, key=lambda g: (abs(g - center), g.real, g.imag))


class TestLattice:
    def test_orientation_required(self):
        with pytest.raises(ValueError):
            Lattice(1.0 + 0j, 1.0 + 0j)
        with pytest.raises(ValueError):
            Lattice(0j + 1j, 1.0 + 0j)  # negatively oriented

    def test_area(self):
        assert Lattice(2.0, 3j).area == pytest.approx(6.0)


class TestShortestVector:
    def test_unit_square(self):
        assert shortest_vector(Lattice(1.0, 1j)) == pytest.approx(1.0)

    def test_scaled_square_via_enumeration(self):
        lat = Lattice(SQPI, SQPI * 1j)
        best = min(
            abs(m * lat.g1 + n * lat.g2)
            for m in range(-2, 3)
            for n in range(-2, 3)
            if (m, n) != (0, 0)
        )
        assert shortest_vector(lat) == pytest.approx(best)
        assert shortest_vector(lat) == pytest.approx(1.7724539, abs=1e-6)

    def test_hexagonal(self):
        lat = Lattice(1.0, (1.0 + 1j * math.sqrt(3.0)) / 2.0)
        assert shortest_vector(lat) == pytest.approx(1.0)

    def test_skew_basis_matches_enumeration(self):
        rng = np.random.default_rng(7)
        for _ in range(50):
            g1 = complex(rng.uniform(0.5, 2), rng.uniform(-1, 1))
            g2 = complex(rng.uniform(-1, 1), rng.uniform(0.5, 2))
            if np.imag(np.conj(g1) * g2) <= 0.05:
                continue
            lat = Lattice(g1, g2)
            best = min(
                abs(m * g1 + n * g2)
                for m in range(-6, 7)
                for n in range(-6, 7)
                if (m, n) != (0, 0)
            )
            assert shortest_vector(lat) == pytest.approx(best, rel=1e-12)


class TestPointsInDisk:
    def test_unit_square_radius(self):
        lat = Lattice(1.0, 1j)
        pts = points_in_disk(lat, 0j, 1.2)
        assert len(pts) == 5
        assert set(np.round(pts, 12)) == {0j, 1 + 0j, -1 + 0j, 1j, -1j}
        assert pts[0] == 0j  # sorted nearest first

    def test_radius_zero(self):
        assert list(points_in_disk(Lattice(1.0, 1j), 0j, 0.0)) == [0j]

    def test_offset_center(self):
        pts = points_in_disk(Lattice(1.0, 1j), 0.5 + 0j, 0.6)
        assert set(np.round(pts, 12)) == {0j, 1 + 0j}

    def test_random_against_brute_force(self):
        rng = np.random.default_rng(12345)
        for _ in range(100):
            g1 = complex(rng.uniform(0.5, 2), rng.uniform(-0.5, 0.5))
            g2 = complex(rng.uniform(-0.5, 0.5), rng.uniform(0.5, 2))
            if np.imag(np.conj(g1) * g2) <= 0.1:
                continue
            lat = Lattice(g1, g2)
            center = complex(rng.uniform(-3, 3), rng.uniform(-3, 3))
            radius = rng.uniform(0, 10)
            got = points_in_disk(lat, center, radius)
            want = brute_points_in_disk(lat, center, radius)
            assert len(got) == len(want)
            assert np.allclose(got, want)

    def test_packing_bound(self):
        lat = Lattice(1.0, 1j)
        for radius in (0.7, 1.5, 3.2, 6.0):
            count = len(points_in_disk(lat, 0.2 + 0.1j, radius))
            assert count <= packing_count_bound(1.0, radius)


class TestReduce:
    def test_unit_square_example(self):
        assert reduce(Lattice(1.0, 1j), 2.3 + 0.7j) == pytest.approx(0.3 + 0.7j)

    def test_identity_on_cell(self):
        lat = Lattice(SQPI, SQPI * 1j)
        z = 0.4 + 1.1j
        assert reduce(lat, z) == pytest.approx(z)

    def test_negative_input(self):
        lat = Lattice(SQPI, SQPI * 1j)
        out = reduce(lat, -0.1 + 0j)
        assert 0 <= out.real < SQPI
        assert out.real == pytest.approx(SQPI - 0.1)

    def test_idempotent_random(self):
        rng = np.random.default_rng(3)
        lat = Lattice(1.3 + 0.2j, -0.1 + 0.9j)
        zs = rng.uniform(-20, 20, 200) + 1j * rng.uniform(-20, 20, 200)
        red = reduce(lat, zs)
        again = reduce(lat, red)
        assert np.allclose(red, again)
        # results lie in the fundamental cell
        inv = lat.inv_basis
        s = inv[0, 0] * red.real + inv[0, 1] * red.imag
        t = inv[1, 0] * red.real + inv[1, 1] * red.imag
        assert np.all((s >= 0) & (s < 1) & (t >= 0) & (t < 1))


class TestProductTower:
    def test_example_depth3(self):
        tower = make_product_tower(SQPI, 2, 3)
        assert tower.d0 == 1
        assert [lvl.tau for lvl in tower.levels] == pytest.approx(
            [SQPI, 2 * SQPI, 4 * SQPI]
        )
        assert [lvl.index_I for lvl in tower.levels] == [1, 4, 16]

    def test_degree_two(self):
        tower = make_product_tower(math.sqrt(2 * math.pi), 2, 1)
        assert tower.d0 == 2
        assert tower.levels[0].tau == pytest.approx(math.sqrt(2 * math.pi))

    def test_ratio3_level1_via_enumeration(self):
        tower = make_product_tower(SQPI, 3, 2)
        lvl = tower.levels[1]
        assert lvl.index_I == 9
        lat = lvl.lattice
        best = min(
            abs(g) for g in points_in_disk(lat, 0j, 3 * SQPI + 1e-9) if abs(g) > 0
        )
        assert lvl.tau == pytest.approx(best)
        assert lvl.tau == pytest.approx(3 * SQPI)

    def test_quantization_error(self):
        with pytest.raises(QuantizationError):
            make_product_tower(1.0, 2, 2)

    def test_depth_error(self):
        with pytest.raises(DepthError):
            make_product_tower(SQPI, 2, 0)

    def test_tau_ratio_and_index_multiplicativity(self):
        tower = make_product_tower(SQPI, 2, 5)
        taus = [lvl.tau for lvl in tower.levels]
        idx = [lvl.index_I for lvl in tower.levels]
        for j in range(4):
            assert taus[j + 1] == pytest.approx(2 * taus[j])
            assert taus[j + 1] >= 2 * taus[j] - 1e-12
            assert idx[j + 1] == 4 * idx[j]


class TestCosetReps:
    def test_level0(self):
        tower = make_product_tower(SQPI, 2, 3)
        assert coset_reps(tower, 0) == [0j]

    def test_ratio2_level1(self):
        tower = make_product_tower(SQPI, 2, 2)
        reps = coset_reps(tower, 1)
        a = SQPI
        assert len(reps) == 4
        assert set(np.round(reps, 10)) == set(
            np.round([0j, a + 0j, 1j * a, a + 1j * a], 10)
        )

    def test_ratio3_level1(self):
        tower = make_product_tower(SQPI, 3, 2)
        reps = coset_reps(tower, 1)
        a = SQPI
        want = {complex(m * a, n * a) for m in range(3) for n in range(3)}
        assert len(reps) == 9
        assert set(np.round(reps, 10)) == set(np.round(sorted(want, key=abs), 10)) or {
            complex(round(r.real, 10), round(r.imag, 10)) for r in reps
        } == {complex(round(w.real, 10), round(w.imag, 10)) for w in want}

    def test_pairwise_noncongruent(self):
        tower = make_product_tower(SQPI, 2, 3)
        for j in range(3):
            reps = coset_reps(tower, j)
            lat = tower.level(j).lattice
            red = [reduce(lat, r) for r in reps]
            for i in range(len(red)):
                for k in range(i + 1, len(red)):
                    assert abs(red[i] - red[k]) > 1e-9

    def test_level_out_of_range(self):
        tower = make_product_tower(SQPI, 2, 2)
        with pytest.raises(LevelOutOfRange):
            coset_reps(tower, 5)


class TestMatrixTower:
    def test_rotated_index2_chain(self):
        # step matrix [[1, 1], [-1, 1]] has determinant 2
        step = [[1, 1], [-1, 1]]
        tower = make_matrix_tower(SQPI, SQPI * 1j, [step, step])
        assert [lvl.index_I for lvl in tower.levels] == [1, 2, 4]
        taus = [lvl.tau for lvl in tower.levels]
        assert taus == sorted(taus)
        assert taus[1] == pytest.approx(math.sqrt(2) * SQPI)
        assert len(coset_reps(tower, 2)) == 4

    def test_index_below_two_rejected(self):
        with pytest.raises(ValueError):
            make_matrix_tower(SQPI, SQPI * 1j, [[[1, 0], [0, 1]]])
