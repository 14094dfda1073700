"""Certified zero location for holomorphic sections via winding numbers.

Zero counts come from the argument principle: the winding of s around a
contour equals the number of enclosed zeros with multiplicity.  Phases are
tracked along refined polyline segments; a segment is accepted only when
the phase step is below pi/2, the magnitude ratio is moderate, and the
midpoint does not dip below the endpoints.  The three criteria fail in
complementary ways near a zero (a close passage always either swings the
phase, tilts the magnitudes, or dips the midpoint), so aliasing a full turn
past the tracker requires a conspiracy that the exact-count invariant would
still catch: located totals must equal the line-bundle degree N*d0*I_j,
with zero tolerance, or the search retries with a fresh grid offset.

Simple zeros are polished by Newton iteration started from the centers of
winding-one cells and accepted only inside their own cell; escapes trigger
local subdivision.  Cells at the minimum size with winding >= 2 are
reported as one point with multiplicity and flagged.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import (
    BoundaryZeroError,
    NonIntegerWinding,
    ZeroCountMismatch,
)
from .lattice import Tower, reduce as reduce_cell
from .sections import Section, eval_section_deriv_weighted, eval_section_weighted

__all__ = ["Rect", "ZeroSet", "winding_count", "locate_zeros", "pushforward_zeros"]

_PHASE_STEP = math.pi / 2
_MAG_STEP = math.log(4.0)
_DIP_RATIO = 0.75
_MAX_EDGE_DEPTH = 52
_SNAP_TOL = 0.25


@dataclass
class ZeroSet:
    """Zeros of one section inside its level-j cell, with multiplicities."""

    j: int
    zeros: list
    total: int
    flags: list = field(default_factory=list)
    residuals: np.ndarray = field(default=None, repr=False)
    newton_ratios: np.ndarray = field(default=None, repr=False)

    def points(self) -> np.ndarray:
        """Zero locations expanded with multiplicity."""
        return np.array([z for z, m in self.zeros for _ in range(m)], dtype=complex)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle: corner, width, height."""

    z0: complex
    width: float
    height: float

    def corners(self) -> list:
        return [
            self.z0,
            self.z0 + self.width,
            self.z0 + self.width + 1j * self.height,
            self.z0 + 1j * self.height,
        ]

    def dilated(self, factor: float) -> "Rect":
        center = self.z0 + (self.width + 1j * self.height) / 2.0
        w, h = self.width * factor, self.height * factor
        return Rect(center - (w + 1j * h) / 2.0, w, h)


def _gauge_ref(z, m, N):
    # exp(-i N Im(z conj(m))): unit reference rotating with the weight gauge
    return np.exp(-1j * N * (z.imag * m.real - z.real * m.imag))


def _trace_phases(evalf, z0s, z1s, a0s, a1s, N):
    """Total phase increments along segments, adaptively bisected.

    The weighted section value rotates at rate ~ N|z| from the gauge alone,
    which would alias whole turns past any sampler far from the origin.
    Each segment is therefore traced in the rotating frame tied to its own
    midpoint, where only the slow zero-driven phase remains, and the exact
    gauge compensation N Im(dz conj(m)) is added back at the end.

    Raises BoundaryZeroError when a segment cannot be certified above the
    refinement depth cap (a zero on or next to the contour).
    """
    n = z0s.size
    z0 = z0s.astype(complex).ravel().copy()
    z1 = z1s.astype(complex).ravel().copy()
    mref = (z0 + z1) / 2.0
    # compensation: arg A = arg(referenced value) + N Im(z conj(m))
    tot = N * (
        (z1.imag - z0.imag) * mref.real - (z1.real - z0.real) * mref.imag
    )
    idx = np.arange(n)
    a0 = a0s.astype(complex).ravel() * _gauge_ref(z0, mref, N)
    a1 = a1s.astype(complex).ravel() * _gauge_ref(z1, mref, N)
    depth = 0
    while idx.size:
        if depth > _MAX_EDGE_DEPTH:
            raise BoundaryZeroError("phase tracking hit the refinement depth cap")
        zm = (z0 + z1) / 2.0
        am = evalf(zm) * _gauge_ref(zm, mref, N)
        r1 = am / a0
        r2 = a1 / am
        p1 = np.angle(r1)
        p2 = np.angle(r2)
        with np.errstate(divide="ignore", invalid="ignore"):
            ok = (
                (np.abs(p1) < _PHASE_STEP)
                & (np.abs(p2) < _PHASE_STEP)
                & (np.abs(np.log(np.abs(r1))) < _MAG_STEP)
                & (np.abs(np.log(np.abs(r2))) < _MAG_STEP)
                & (np.abs(am) > _DIP_RATIO * np.minimum(np.abs(a0), np.abs(a1)))
            )
        ok &= np.isfinite(p1) & np.isfinite(p2)
        np.add.at(tot, idx[ok], p1[ok] + p2[ok])
        bad = ~ok
        if not np.any(bad):
            break
        idx = np.concatenate([idx[bad], idx[bad]])
        z0, z1 = (
            np.concatenate([z0[bad], zm[bad]]),
            np.concatenate([zm[bad], z1[bad]]),
        )
        a0, a1 = (
            np.concatenate([a0[bad], am[bad]]),
            np.concatenate([am[bad], a1[bad]]),
        )
        mref = np.concatenate([mref[bad], mref[bad]])
        depth += 1
    return tot


def _cell_windings(evalf, nodes_z, nodes_a, N):
    """Integer windings of all cells of a node grid (counterclockwise)."""
    nx, ny = nodes_z.shape
    h = _trace_phases(
        evalf,
        nodes_z[:-1, :].ravel(), nodes_z[1:, :].ravel(),
        nodes_a[:-1, :].ravel(), nodes_a[1:, :].ravel(),
        N,
    ).reshape(nx - 1, ny)
    v = _trace_phases(
        evalf,
        nodes_z[:, :-1].ravel(), nodes_z[:, 1:].ravel(),
        nodes_a[:, :-1].ravel(), nodes_a[:, 1:].ravel(),
        N,
    ).reshape(nx, ny - 1)
    wind = (h[:, :-1] + v[1:, :] - h[:, 1:] - v[:-1, :]) / (2.0 * math.pi)
    snap = np.rint(wind)
    if np.max(np.abs(wind - snap)) > _SNAP_TOL:
        raise NonIntegerWinding(
            f"cell winding off an integer by {np.max(np.abs(wind - snap)):.3g}"
        )
    return snap.astype(int)


def winding_count(section: Section, rect: Rect, guard: float = 1e-9) -> int:
    """Zeros of the section inside an axis-aligned rectangle, by winding.

    If a zero sits on the boundary (detected by tiny sampled magnitudes or
    uncertifiable phase steps) the rectangle is dilated by 1 + 1e-4 about
    its center and retried, at most 5 times.
    """
    N = section.frame.params.N
    cur = rect
    for _ in range(6):
        corners = cur.corners()
        total = 0.0
        hit_boundary = False
        for a, b in zip(corners, corners[1:] + corners[:1]):
            length = abs(b - a)
            n0 = max(8, int(math.ceil(4.0 * length * math.sqrt(N / math.pi))))
            ts = np.arange(n0 + 1) / n0
            zs = a + (b - a) * ts
            vals = eval_section_weighted(section, zs)
            if np.min(np.abs(vals)) < guard:
                hit_boundary = True
                break
            try:
                total += _trace_phases(
                    lambda z: eval_section_weighted(section, z),
                    zs[:-1], zs[1:], vals[:-1], vals[1:], N,
                ).sum()
            except BoundaryZeroError:
                hit_boundary = True
                break
        if hit_boundary:
            cur = cur.dilated(1.0 + 1e-4)
            continue
        wind = total / (2.0 * math.pi)
        snap = round(wind)
        if abs(wind - snap) > _SNAP_TOL:
            raise NonIntegerWinding(f"contour winding {wind:.6f} not near an integer")
        return int(snap)
    raise BoundaryZeroError("zero on the contour after 5 dilation retries")


_OFFSETS = [(0.241, 0.137), (0.433, 0.271), (0.0617, 0.389)]


def locate_zeros(section: Section, tol: float = 1e-8) -> ZeroSet:
    """All zeros of the section in its level-j cell, multiplicities included.

    Grid windings isolate the zeros; winding-one cells are polished by
    Newton accepted only within the owning cell, and thicker cells are
    subdivided down to 1e-6 * tau_j.  The total must equal the degree
    N*d0*I_j exactly; otherwise the search retries with fresh grid offsets
    and a finer grid before raising ZeroCountMismatch.
    """
    frame = section.frame
    tower, p, j = frame.tower, frame.params, frame.j
    level = tower.level(j)
    lat = level.lattice
    d_expected = p.N * p.d0 * level.index_I
    g1, g2 = lat.g1, lat.g2
    base_grid = max(8, int(math.ceil(4.0 * math.sqrt(d_expected))))
    min_cell = 1e-6 * level.tau

    def evalf(z):
        return eval_section_weighted(section, z)

    def evalf_pair(z):
        return eval_section_deriv_weighted(section, z)

    trials = [(off, base_grid, i) for i, off in enumerate(_OFFSETS)]
    trials.append((_OFFSETS[0], int(math.ceil(base_grid * 1.6)), len(_OFFSETS)))
    last_err = None
    for (ox, oy), G, offset_id in trials:
        off = (ox * g1 + oy * g2) / G
        try:
            return _locate_on_grid(
                section, off, G, offset_id, d_expected, min_cell, tol, evalf,
                evalf_pair,
            )
        except (BoundaryZeroError, NonIntegerWinding, ZeroCountMismatch) as err:
            last_err = err
            continue
    raise ZeroCountMismatch(f"zero search exhausted retries: {last_err}")


def _locate_on_grid(
    section, off, G, offset_id, d_expected, min_cell, tol, evalf, evalf_pair
):
    frame = section.frame
    lat = frame.tower.level(frame.j).lattice
    g1, g2 = lat.g1, lat.g2
    inv = lat.inv_basis

    ss = np.arange(G + 1) / G
    S, T = np.meshgrid(ss, ss, indexing="ij")
    Z = off + S * g1 + T * g2
    key = ("zgrid", frame.j, G, offset_id)
    node_mat = frame.cached_node_matrix(key, Z.ravel())
    A = (node_mat @ (frame.whitener @ section.coef)).reshape(G + 1, G + 1)

    wr = _cell_windings(evalf, Z, A, frame.params.N)
    if np.any(wr < 0):
        raise NonIntegerWinding("negative cell winding: phase tracking failed")
    if int(wr.sum()) != d_expected:
        raise ZeroCountMismatch(
            f"grid windings total {int(wr.sum())}, expected {d_expected}"
        )

    def in_cell(z, s0, t0, hs, ht, pad):
        x = inv[0, 0] * (z.real - off.real) + inv[0, 1] * (z.imag - off.imag)
        y = inv[1, 0] * (z.real - off.real) + inv[1, 1] * (z.imag - off.imag)
        return (s0 - pad <= x <= s0 + hs + pad) and (t0 - pad <= y <= t0 + ht + pad)

    def newton_batch(z0s):
        """Newton on a batch of starting points; returns (z, |s|, |s/s'|)."""
        zc = np.asarray(z0s, dtype=complex).copy()
        active = np.ones(zc.size, dtype=bool)
        for _ in range(60):
            a, b = evalf_pair(zc[active])
            step = np.where(b != 0, a / np.where(b != 0, b, 1.0), 0.0)
            zc[active] -= step
            done = (np.abs(a) < tol) & (
                np.abs(step) < 1e-13 * (np.abs(zc[active]) + 1.0)
            )
            idx = np.flatnonzero(active)
            active[idx[done]] = False
            if not np.any(active):
                break
        a, b = evalf_pair(zc)
        with np.errstate(divide="ignore", invalid="ignore"):
            ratio = np.where(np.abs(b) > 0, np.abs(a) / np.abs(b), math.inf)
        return zc, np.abs(a), ratio

    found = []
    flags = []

    def refine(s0, t0, hs, ht, w, depth):
        if w == 0:
            return
        size = max(hs * abs(g1), ht * abs(g2))
        if depth > 44 or size < min_cell:
            center = off + (s0 + hs / 2.0) * g1 + (t0 + ht / 2.0) * g2
            found.append((center, w, math.nan, math.nan))
            flags.append(f"cluster:{center:.6g}:mult={w}")
            return
        if w == 1:
            center = off + (s0 + hs / 2.0) * g1 + (t0 + ht / 2.0) * g2
            z, resid, step_len = newton_batch([center])
            pad = 1e-7 * max(hs, ht)
            if resid[0] < tol and in_cell(z[0], s0, t0, hs, ht, pad):
                found.append((complex(z[0]), 1, float(resid[0]),
                              float(step_len[0]) / size))
                return
        # split into 2x2 subcells and recount
        xs = np.array([s0, s0 + hs / 2.0, s0 + hs])
        ys = np.array([t0, t0 + ht / 2.0, t0 + ht])
        Zs = off + xs[:, None] * g1 + ys[None, :] * g2
        As = evalf(Zs.ravel()).reshape(3, 3)
        sub = _cell_windings(evalf, Zs, As, frame.params.N)
        if int(sub.sum()) != w or np.any(sub < 0):
            raise NonIntegerWinding("subcell windings disagree with the parent")
        for i in range(2):
            for k in range(2):
                refine(xs[i], ys[k], hs / 2.0, ht / 2.0, int(sub[i, k]), depth + 1)

    h = 1.0 / G
    # Estimate each simple zero inside its cell by the boundary first
    # moment (1/2 pi i) closed-integral of z s'/s, which equals the zero
    # location exactly; then polish with Newton.  Starting on top of the
    # zero sidesteps the fractal basin boundaries that make Newton from
    # cell centers wander.  Escapes still fall back to subdivision.
    simple = np.argwhere(wr == 1)
    if simple.size:
        # seed Newton from the smallest sampled magnitude on a 3x3 interior
        # stencil: landing close to the zero sidesteps the fractal basin
        # boundaries that make Newton from cell centers wander
        q = np.array([0.2, 0.5, 0.8])
        QX, QY = np.meshgrid(q, q, indexing="ij")
        stencil = (QX.ravel() * h) * g1 + (QY.ravel() * h) * g2
        corners = off + simple[:, 0] * h * g1 + simple[:, 1] * h * g2
        probes = corners[:, None] + stencil[None, :]
        mags = np.abs(evalf(probes.ravel())).reshape(probes.shape)
        starts = probes[np.arange(probes.shape[0]), np.argmin(mags, axis=1)]
        zs, resids, steps = newton_batch(starts)
        cell_size = max(h * abs(g1), h * abs(g2))
        pad = 1e-7 * h
        for (i, k), z, resid, step_len in zip(simple, zs, resids, steps):
            if resid < tol and in_cell(z, i * h, k * h, h, h, pad):
                found.append((complex(z), 1, float(resid), float(step_len) / cell_size))
            else:
                refine(i * h, k * h, h, h, 1, 0)
    for i, k in np.argwhere(wr >= 2):
        refine(i * h, k * h, h, h, int(wr[i, k]), 0)

    total = sum(m for _, m, _, _ in found)
    if total != d_expected:
        raise ZeroCountMismatch(f"refined total {total}, expected {d_expected}")
    zeros = [(z, m) for z, m, _, _ in found]
    return ZeroSet(
        j=frame.j,
        zeros=zeros,
        total=total,
        flags=flags,
        residuals=np.array([r for _, _, r, _ in found]),
        newton_ratios=np.array([q for _, _, _, q in found]),
    )


def pushforward_zeros(zeroset: ZeroSet, tower: Tower) -> np.ndarray:
    """Zeros reduced into the base cell, multiplicity-expanded."""
    pts = zeroset.points()
    if pts.size == 0:
        return pts
    return reduce_cell(tower.base, pts)
