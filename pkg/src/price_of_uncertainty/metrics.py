"""Total variational distance and limit-violation mass of mixed densities."""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass

import numpy as np

from . import stochastics as st
from .quadrature import adaptive_simpson

ATOM_MATCH_TOL = 1e-12


@dataclass(frozen=True)
class TvdReport:
    value: float
    continuous_part: float
    atom_part: float
    grid_points: int
    est_error: float

    def to_json(self) -> str:
        return json.dumps(asdict(self))


def _sum_active(pieces, x):
    return sum(float(p.fn(x)) for p in pieces)


def _merge_atoms(a, b):
    merged = []
    for loc, m in a:
        merged.append([loc, m, 0.0])
    for loc, m in b:
        for row in merged:
            if abs(row[0] - loc) <= ATOM_MATCH_TOL * max(1.0, abs(loc)):
                row[2] += m
                break
        else:
            merged.append([loc, 0.0, m])
    return merged


def tvd(a: st.MixedDensity1D, b: st.MixedDensity1D, tol: float = 1e-7) -> TvdReport:
    """Half the L1 distance between two mixed laws, atoms included.

    The continuous parts are integrated segment by segment between all piece
    boundaries of both densities; an atom facing only continuous mass
    contributes half its weight.
    """
    pts = sorted(set(a.breakpoints) | set(b.breakpoints))
    total, err, evals = 0.0, 0.0, 0
    span = (pts[-1] - pts[0]) if len(pts) > 1 else 1.0
    for lo, hi in zip(pts, pts[1:]):
        if hi <= lo:
            continue
        pa, pb = a.active_pieces(lo, hi), b.active_pieces(lo, hi)
        if not pa and not pb:
            continue
        counter = [0]

        def integrand(x, pa=pa, pb=pb, counter=counter):
            counter[0] += 1
            return abs(_sum_active(pa, x) - _sum_active(pb, x))

        val, e = adaptive_simpson(integrand, lo, hi, tol * (hi - lo) / span)
        total += val
        err += e
        evals += counter[0]
    atom_part = 0.5 * sum(abs(ma - mb) for _, ma, mb in _merge_atoms(a.atoms, b.atoms))
    cont = min(0.5 * total, max(0.0, 1.0 - atom_part))
    return TvdReport(cont + atom_part, cont, atom_part, evals, 0.5 * err)


def violation_mass(m: st.MixedDensity1D, bound: float, side: str = "upper", tol: float = 1e-10) -> float:
    """Probability beyond ``bound``; an atom sitting on the bound is satisfied."""
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if math.isinf(bound):
        if (bound > 0) == (side == "upper"):
            return 0.0
        return 1.0
    mass = 0.0
    for p in m.pieces:
        lo, hi = (max(p.lo, bound), p.hi) if side == "upper" else (p.lo, min(p.hi, bound))
        if hi > lo:
            mass += adaptive_simpson(lambda t, p=p: float(p.fn(t)), lo, hi, tol)[0]
    for loc, w in m.atoms:
        if (loc > bound) if side == "upper" else (loc < bound):
            mass += w
    return mass


def satisfaction_mass(m: st.MixedDensity1D, bound: float, side: str = "upper", tol: float = 1e-10) -> float:
    inside = 0.0
    for p in m.pieces:
        lo, hi = (p.lo, min(p.hi, bound)) if side == "upper" else (max(p.lo, bound), p.hi)
        if hi > lo:
            inside += adaptive_simpson(lambda t, p=p: float(p.fn(t)), lo, hi, tol)[0]
    for loc, w in m.atoms:
        if (loc <= bound) if side == "upper" else (loc >= bound):
            inside += w
    return inside


def histogram_density(samples, atom_candidates=(), atom_tol: float = 1e-9,
                      min_samples: int = 100) -> st.MixedDensity1D:
    """Mixed density from Monte-Carlo output.

    Samples within ``atom_tol`` of a candidate are pooled into an atom; the
    rest is binned with the Freedman-Diaconis width.  Masses are relative to
    the full sample, so the result integrates to one.
    """
    x = np.asarray(samples, dtype=float)
    n = x.size
    if n < min_samples:
        raise ValueError(f"histogram needs at least {min_samples} samples, got {n}")
    rest = np.ones(n, dtype=bool)
    atoms = []
    for c in atom_candidates:
        hit = rest & (np.abs(x - c) <= atom_tol)
        if hit.any():
            atoms.append((float(c), hit.sum() / n))
            rest &= ~hit
    r = x[rest]
    pieces = []
    if r.size:
        q75, q25 = np.percentile(r, [75, 25])
        width = 2.0 * (q75 - q25) * r.size ** (-1.0 / 3.0)
        lo, hi = float(r.min()), float(r.max())
        if width <= 0.0 or hi <= lo:
            atoms.append((float(np.median(r)), r.size / n))
        else:
            nbins = max(1, int(math.ceil((hi - lo) / width)))
            edges = np.linspace(lo, hi, nbins + 1)
            counts, _ = np.histogram(r, bins=edges)
            h = edges[1] - edges[0]
            for k, cnt in enumerate(counts):
                if cnt:
                    pieces.append(st.constant_piece(edges[k], edges[k + 1], cnt / (n * h)))
    return st.MixedDensity1D(tuple(pieces), tuple(atoms))
