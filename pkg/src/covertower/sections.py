"""Coherent-state frames and random holomorphic sections.

The section space of level j has dimension d = N * d0 * I_j and is spanned
by kernel columns ("coherent states") centered on a grid in the level-j
cell.  The Gram matrix of the constant-rescaled columns is the gauge-fixed
kernel at pairs of centers, a well-conditioned Gaussian-overlap matrix;
whitening it yields an orthonormal basis in which sampling is trivial:
uniform sphere vectors for single sections, unitarily invariant QR factors
for random orthonormal bases.

Grid centers deliberately use asymmetric in-cell offsets: on a torus the
zeros of a section are constrained to a fixed sum, and centrally symmetric
grids land exactly on such degenerate configurations (rank-deficient Gram).
"""

from __future__ import annotations

import hashlib
import json
import math
from dataclasses import dataclass, field

import numpy as np

from .errors import FrameDegenerate
from .fock import BundleParams
from .lattice import Tower
from .quotient import (
    DEFAULT_TRUNCATION,
    TruncationPolicy,
    weighted_kernel,
    weighted_kernel_dz,
)

__all__ = [
    "CoherentFrame",
    "Section",
    "build_frame",
    "derive_rng",
    "sample_sphere",
    "sample_onb",
    "eval_section",
    "eval_section_weighted",
    "eval_section_deriv",
    "eval_section_deriv_weighted",
    "dump_samples",
    "load_samples",
]

_COND_LIMIT = 1e8
_GRID_OFFSETS = (0.31, 0.47)


def derive_rng(master_seed: int, experiment_id: str, sample_index: int):
    """Counter-based generator for (experiment, sample) streams.

    Philox keyed by the master seed and a spawn key derived from the
    experiment id and sample index: reproducible bit-for-bit regardless of
    evaluation order or parallel schedule.
    """
    tag = int.from_bytes(hashlib.sha256(experiment_id.encode()).digest()[:4], "big")
    ss = np.random.SeedSequence(entropy=master_seed, spawn_key=(tag, sample_index))
    return np.random.Generator(np.random.Philox(ss))


@dataclass
class CoherentFrame:
    """Whitened coherent-state frame of the level-j section space."""

    tower: Tower
    params: BundleParams
    j: int
    points: np.ndarray
    gram: np.ndarray
    whitener: np.ndarray
    cond: float
    trunc: TruncationPolicy
    _grid_cache: dict = field(default_factory=dict, repr=False)

    @property
    def dim(self) -> int:
        return self.points.size

    def node_matrix(self, nodes: np.ndarray) -> np.ndarray:
        """Gauge-fixed kernel columns at ``nodes`` (rows) x centers (cols)."""
        vals, _ = weighted_kernel(
            self.tower, self.params, self.j, nodes[:, None], self.points[None, :],
            self.trunc,
        )
        return vals

    def cached_node_matrix(self, key, nodes: np.ndarray) -> np.ndarray:
        mat = self._grid_cache.get(key)
        if mat is None or mat.shape[0] != nodes.size:
            mat = self.node_matrix(nodes)
            self._grid_cache[key] = mat
        return mat


@dataclass
class Section:
    """Holomorphic section in whitened-frame coordinates; unit coefficient
    vectors have unit Hermitian norm."""

    frame: CoherentFrame
    coef: np.ndarray
    norm: float


def _frame_points(tower: Tower, p: BundleParams, j: int, jitter: complex) -> np.ndarray:
    level = tower.level(j)
    d = p.N * p.d0 * level.index_I
    r = 1
    for k in range(1, int(math.isqrt(d)) + 1):
        if d % k == 0:
            r = k
    c = d // r
    ox, oy = _GRID_OFFSETS
    g1, g2 = level.lattice.g1, level.lattice.g2
    pts = np.array(
        [((i + ox) / r) * g1 + ((k + oy) / c) * g2 for i in range(r) for k in range(c)],
        dtype=complex,
    )
    return pts + jitter


def build_frame(
    tower: Tower,
    p: BundleParams,
    j: int,
    trunc: TruncationPolicy = DEFAULT_TRUNCATION,
) -> CoherentFrame:
    """Build and whiten the coherent-state frame for level j.

    The stored Gram is the gauge-fixed (weighted) kernel at center pairs, so
    its entries are bounded and its conditioning reflects the actual frame
    geometry.  If the grid is degenerate (cond > 1e8) the centers are
    translated once by the documented jitter 0.01 * tau_j and rebuilt;
    a second failure raises FrameDegenerate.
    """
    level = tower.level(j)
    jitters = [0.0 + 0.0j, 0.01 * level.tau * (1.0 + 1.0j) / math.sqrt(2.0)]
    last_cond = math.inf
    for jitter in jitters:
        pts = _frame_points(tower, p, j, jitter)
        gram, _ = weighted_kernel(
            tower, p, j, pts[:, None], pts[None, :], trunc
        )
        gram = (gram + gram.conj().T) / 2.0
        try:
            cond = float(np.linalg.cond(gram))
        except np.linalg.LinAlgError:
            cond = math.inf
        last_cond = cond
        if not math.isfinite(cond) or cond > _COND_LIMIT:
            continue
        chol = np.linalg.cholesky(gram)
        whitener = np.linalg.inv(chol).conj().T
        return CoherentFrame(
            tower=tower, params=p, j=j, points=pts, gram=gram,
            whitener=whitener, cond=cond, trunc=trunc,
        )
    raise FrameDegenerate(
        f"frame Gram condition number {last_cond:.3g} exceeds {_COND_LIMIT:g} "
        "after jitter retry"
    )


def sample_sphere(frame: CoherentFrame, rng) -> Section:
    """Uniform draw from the unit sphere of the section space."""
    d = frame.dim
    g = rng.standard_normal(d) + 1j * rng.standard_normal(d)
    coef = g / np.linalg.norm(g)
    return Section(frame=frame, coef=coef, norm=1.0)


def sample_onb(frame: CoherentFrame, rng) -> list[Section]:
    """Haar-random orthonormal basis of the section space.

    QR factor of a complex Gaussian matrix, with the phase convention that
    makes the triangular factor's diagonal positive (which makes the unitary
    factor Haar distributed).
    """
    d = frame.dim
    x = rng.standard_normal((d, d)) + 1j * rng.standard_normal((d, d))
    q, r = np.linalg.qr(x)
    ph = np.diagonal(r).copy()
    ph /= np.abs(ph)
    q = q * ph[None, :]
    return [Section(frame=frame, coef=q[:, k].copy(), norm=1.0) for k in range(d)]


def eval_section_weighted(section: Section, z) -> np.ndarray | complex:
    """Weighted value s(z) e^{-N|z|^2/2}; its modulus is the pointwise norm."""
    frame = section.frame
    zarr = np.atleast_1d(np.asarray(z, dtype=complex))
    cols, _ = weighted_kernel(
        frame.tower, frame.params, frame.j, zarr[:, None], frame.points[None, :],
        frame.trunc,
    )
    out = cols @ (frame.whitener @ section.coef)
    return out if np.ndim(z) else complex(out[0])


def eval_section_deriv_weighted(section: Section, z):
    """(s(z), s'(z)) both carrying the weight e^{-N|z|^2/2}.

    Ratios of the pair are weight-free, which is all Newton steps and
    winding integrands need."""
    frame = section.frame
    zarr = np.atleast_1d(np.asarray(z, dtype=complex))
    cols, dcols, _ = weighted_kernel_dz(
        frame.tower, frame.params, frame.j, zarr[:, None], frame.points[None, :],
        frame.trunc,
    )
    ctil = frame.whitener @ section.coef
    a = cols @ ctil
    b = dcols @ ctil
    if np.ndim(z):
        return a, b
    return complex(a[0]), complex(b[0])


def eval_section(section: Section, z):
    """Raw holomorphic frame coefficient s(z) (can overflow far out)."""
    N = section.frame.params.N
    zarr = np.atleast_1d(np.asarray(z, dtype=complex))
    a = eval_section_weighted(section, zarr)
    with np.errstate(over="ignore"):
        out = a * np.exp(N * np.abs(zarr) ** 2 / 2.0)
    return out if np.ndim(z) else complex(out[0])


def eval_section_deriv(section: Section, z):
    """Raw holomorphic derivative s'(z) (can overflow far out)."""
    N = section.frame.params.N
    zarr = np.atleast_1d(np.asarray(z, dtype=complex))
    _, b = eval_section_deriv_weighted(section, zarr)
    with np.errstate(over="ignore"):
        out = b * np.exp(N * np.abs(zarr) ** 2 / 2.0)
    return out if np.ndim(z) else complex(out[0])


def dump_samples(path, level: int, seed: int, sections) -> None:
    """Append sections as JSON lines (level, seed, coef[]) for replay."""
    with open(path, "a") as handle:
        for sec in sections:
            rec = {
                "level": level,
                "seed": seed,
                "coef": [[c.real, c.imag] for c in sec.coef],
            }
            handle.write(json.dumps(rec) + "\n")


def load_samples(path, frame: CoherentFrame) -> list[Section]:
    """Rebuild sections from a JSON-lines dump against a matching frame."""
    out = []
    with open(path) as handle:
        for line in handle:
            if not line.strip():
                continue
            rec = json.loads(line)
            if rec["level"] != frame.j:
                raise ValueError(
                    f"dump level {rec['level']} does not match frame level {frame.j}"
                )
            coef = np.array([complex(re, im) for re, im in rec["coef"]])
            if coef.size != frame.dim:
                raise ValueError("coefficient length does not match the frame")
            out.append(Section(frame=frame, coef=coef, norm=float(np.linalg.norm(coef))))
    return out
