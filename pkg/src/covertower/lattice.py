"""Rank-2 lattices in the complex plane and nested covering towers.

A lattice is spanned by two complex generators with positively oriented
basis.  A tower is a finite nested chain of sublattices; each level stores
its covering index, the length of its shortest nonzero vector and a full
set of coset representatives of the base lattice modulo the level lattice.
Everything downstream (periodized kernels, sections, zero statistics) is
driven by the enumeration and reduction primitives in this module.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from .errors import DepthError, LevelOutOfRange, QuantizationError

__all__ = [
    "Lattice",
    "TowerLevel",
    "Tower",
    "make_product_tower",
    "make_matrix_tower",
    "shortest_vector",
    "points_in_disk",
    "reduce",
    "nearest_point",
    "coset_reps",
    "packing_count_bound",
]


@dataclass(frozen=True)
class Lattice:
    """Lattice ``{m*g1 + n*g2 : m, n integers}`` with Im(conj(g1)*g2) > 0."""

    g1: complex
    g2: complex

    def __post_init__(self):
        a = float(np.imag(np.conj(self.g1) * self.g2))
        if not math.isfinite(a) or a <= 0.0:
            raise ValueError("generators must form a positively oriented basis")

    @property
    def area(self) -> float:
        """Covolume of the fundamental parallelogram."""
        return float(np.imag(np.conj(self.g1) * self.g2))

    @cached_property
    def basis_matrix(self) -> np.ndarray:
        """Columns are the generators as real 2-vectors."""
        return np.array(
            [[self.g1.real, self.g2.real], [self.g1.imag, self.g2.imag]], dtype=float
        )

    @cached_property
    def inv_basis(self) -> np.ndarray:
        return np.linalg.inv(self.basis_matrix)

    def scaled(self, factor: float) -> "Lattice":
        return Lattice(self.g1 * factor, self.g2 * factor)

    def sublattice(self, mat) -> "Lattice":
        """Sublattice generated by integer rows ``mat`` in this basis.

        ``mat`` is a 2x2 integer matrix with determinant >= 1; row k gives the
        coordinates of the new generator k in the (g1, g2) basis.
        """
        m = np.asarray(mat, dtype=int)
        if m.shape != (2, 2):
            raise ValueError("sublattice matrix must be 2x2")
        det = int(round(float(np.linalg.det(m))))
        if det == 0:
            raise ValueError("sublattice matrix is singular")
        h1 = m[0, 0] * self.g1 + m[0, 1] * self.g2
        h2 = m[1, 0] * self.g1 + m[1, 1] * self.g2
        if det < 0:
            h1, h2 = h2, h1
        return Lattice(h1, h2)


def _lagrange_reduced(lat: Lattice) -> tuple[complex, complex]:
    """Lagrange-reduced basis (u, v) with |u| <= |v| and |v +- u| >= |v|."""
    u, v = lat.g1, lat.g2
    if abs(u) > abs(v):
        u, v = v, u
    for _ in range(256):
        q = round((v * np.conj(u)).real / abs(u) ** 2)
        v = v - q * u
        if abs(v) >= abs(u):
            return u, v
        u, v = v, u
    raise RuntimeError("lattice reduction did not converge")


def shortest_vector(lat: Lattice) -> float:
    """Length of the shortest nonzero lattice vector."""
    u, v = _lagrange_reduced(lat)
    cands = [abs(u), abs(v), abs(u + v), abs(u - v)]
    return float(min(cands))


def points_in_disk(lat: Lattice, center: complex, radius: float) -> np.ndarray:
    """All lattice points within ``radius`` of ``center``, nearest first.

    Ties in distance are broken by (real, imag) so the ordering is
    deterministic.  Enumeration runs over the exact coefficient box obtained
    from the inverse basis, so no point is missed.
    """
    if radius < 0:
        return np.empty(0, dtype=complex)
    inv = lat.inv_basis
    c = np.array([np.real(center), np.imag(center)])
    mc, nc = inv @ c
    # |coeff - coeff_center| <= ||row(inv)|| * radius for each coefficient
    rm = float(np.linalg.norm(inv[0])) * radius
    rn = float(np.linalg.norm(inv[1])) * radius
    ms = np.arange(math.floor(mc - rm) - 1, math.ceil(mc + rm) + 2)
    ns = np.arange(math.floor(nc - rn) - 1, math.ceil(nc + rn) + 2)
    mm, nn = np.meshgrid(ms, ns, indexing="ij")
    pts = mm.ravel() * lat.g1 + nn.ravel() * lat.g2
    dist = np.abs(pts - center)
    keep = dist <= radius
    pts, dist = pts[keep], dist[keep]
    order = np.lexsort((pts.imag, pts.real, dist))
    return pts[order]


def reduce(lat: Lattice, z) -> np.ndarray | complex:
    """Translate ``z`` by a lattice vector into the half-open cell
    ``{s*g1 + t*g2 : 0 <= s, t < 1}``.  Idempotent."""
    zarr = np.asarray(z, dtype=complex)
    inv = lat.inv_basis
    s = inv[0, 0] * zarr.real + inv[0, 1] * zarr.imag
    t = inv[1, 0] * zarr.real + inv[1, 1] * zarr.imag
    s -= np.floor(s)
    t -= np.floor(t)
    # guard against s/t rounding up to exactly 1.0
    s = np.where(s >= 1.0, s - 1.0, s)
    t = np.where(t >= 1.0, t - 1.0, t)
    out = s * lat.g1 + t * lat.g2
    return out if isinstance(z, np.ndarray) else complex(out)

def nearest_point(lat: Lattice, z) -> np.ndarray | complex:
    """Lattice point near ``z`` (coefficient rounding; remainder is bounded
    by half the basis-vector lengths, which is all callers rely on)."""
    zarr = np.asarray(z, dtype=complex)
    inv = lat.inv_basis
    s = np.round(inv[0, 0] * zarr.real + inv[0, 1] * zarr.imag)
    t = np.round(inv[1, 0] * zarr.real + inv[1, 1] * zarr.imag)
    out = s * lat.g1 + t * lat.g2
    return out if isinstance(z, np.ndarray) else complex(out)


def packing_count_bound(tau: float, radius: float) -> float:
    """Upper bound on the number of lattice points in a disk of ``radius``,
    from disjointness of the tau/2-disks around lattice points."""
    return (2.0 * radius / tau + 1.0) ** 2


@dataclass(frozen=True)
class TowerLevel:
    """One level of a covering tower."""

    j: int
    lattice: Lattice
    index_I: int
    tau: float
    coset_reps: tuple = field(repr=False)


@dataclass(frozen=True)
class Tower:
    """Finite nested chain of sublattices, level 0 outermost.

    ``d0`` is the line-bundle degree at level 0, i.e. area(level 0)/pi,
    which the constructors require to be a positive integer.
    """

    levels: tuple
    d0: int

    @property
    def depth(self) -> int:
        return len(self.levels)

    @property
    def base(self) -> Lattice:
        return self.levels[0].lattice

    def level(self, j: int) -> TowerLevel:
        if not 0 <= j < len(self.levels):
            raise LevelOutOfRange(f"level {j} not in tower of depth {len(self.levels)}")
        return self.levels[j]


def _degree_from_area(area: float) -> int:
    d0 = area / math.pi
    d0_int = round(d0)
    if d0_int < 1 or abs(d0 - d0_int) > 1e-9 * max(1.0, d0):
        raise QuantizationError(
            f"lattice area {area:.12g} is not a positive integer multiple of pi"
        )
    return d0_int


def _hnf_coset_reps(base: Lattice, cumulative: np.ndarray) -> list[complex]:
    """Coset representatives of base/(sublattice with rows ``cumulative``).

    Row-reduce the integer matrix to upper-triangular form [[a, b], [0, c]];
    the quotient is then enumerated by residues 0 <= p < a, 0 <= q < |c|.
    """
    a11, a12 = int(cumulative[0, 0]), int(cumulative[0, 1])
    a21, a22 = int(cumulative[1, 0]), int(cumulative[1, 1])
    g, x, y = _xgcd(a11, a21)
    if g == 0:
        raise ValueError("degenerate sublattice matrix")
    r1 = (g, x * a12 + y * a22)
    r2 = (0, (a11 // g) * a22 - (a21 // g) * a12)
    a, c = abs(r1[0]), abs(r2[1])
    return [p * base.g1 + q * base.g2 for p in range(a) for q in range(c)]


def _xgcd(a: int, b: int) -> tuple[int, int, int]:
    old_r, r = a, b
    old_s, s = 1, 0
    old_t, t = 0, 1
    while r != 0:
        q = old_r // r
        old_r, r = r, old_r - q * r
        old_s, s = s, old_s - q * s
        old_t, t = t, old_t - q * t
    if old_r < 0:
        old_r, old_s, old_t = -old_r, -old_s, -old_t
    return old_r, old_s, old_t


def _build_tower(base: Lattice, step_mats: list[np.ndarray]) -> Tower:
    d0 = _degree_from_area(base.area)
    levels = []
    lat = base
    cumulative = np.eye(2, dtype=int)
    index = 1
    prev_tau = 0.0
    for j in range(len(step_mats) + 1):
        tau = shortest_vector(lat)
        if tau < prev_tau - 1e-12:
            raise ValueError("tower gaps tau_j must be nondecreasing")
        prev_tau = tau
        reps = [reduce(lat, r) for r in _hnf_coset_reps(base, cumulative)]
        if len(reps) != index:
            raise RuntimeError("coset enumeration disagrees with the index")
        levels.append(
            TowerLevel(j=j, lattice=lat, index_I=index, tau=tau, coset_reps=tuple(reps))
        )
        if j == len(step_mats):
            break
        m = np.asarray(step_mats[j], dtype=int)
        det = abs(int(round(float(np.linalg.det(m)))))
        if det < 2:
            raise ValueError("each tower step must have index >= 2")
        lat = lat.sublattice(m)
        cumulative = m @ cumulative
        index *= det
    return Tower(levels=tuple(levels), d0=d0)


def make_product_tower(scale: float, ratio: int, depth: int) -> Tower:
    """Tower of dilated square lattices ``ratio**j * scale * (Z + iZ)``.

    Level j has index ratio**(2j) and shortest vector ratio**j * scale.
    ``scale**2`` must be a positive integer multiple of pi so the degree
    quantizes.
    """
    if depth < 1 or int(depth) != depth:
        raise DepthError(f"depth must be a positive integer, got {depth}")
    if int(ratio) != ratio or ratio < 2:
        raise ValueError(f"ratio must be an integer >= 2, got {ratio}")
    base = Lattice(complex(scale), complex(0, scale))
    step = np.array([[ratio, 0], [0, ratio]], dtype=int)
    return _build_tower(base, [step] * (int(depth) - 1))


def make_matrix_tower(g1: complex, g2: complex, step_mats) -> Tower:
    """Tower from explicit integer step matrices.

    ``step_mats[j]`` expresses the generators of level j+1 in the basis of
    level j; its determinant is the index of that step (>= 2 in absolute
    value).  Normality is automatic: translation groups are abelian.
    """
    mats = [np.asarray(m, dtype=int) for m in step_mats]
    return _build_tower(Lattice(g1, g2), mats)


def coset_reps(tower: Tower, j: int) -> list[complex]:
    """Representatives of (level 0)/(level j), reduced into the level-j cell."""
    return list(tower.level(j).coset_reps)
