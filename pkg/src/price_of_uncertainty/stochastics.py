"""Univariate distributions and mixed (continuous + atomic) densities.

Power values follow the load convention used throughout the package: demand
is negative, generation positive.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable

import numpy as np
from scipy import special

from .errors import DomainError
from .quadrature import adaptive_simpson
from .rng import SplitMix64, uniform_open

BETA, UNIFORM, GAUSSIAN, DIRAC = "beta", "uniform", "gaussian", "dirac"
GRID_POINTS = 2048


# --------------------------------------------------------------------------
# regularized incomplete beta

def _betacf(a, b, x, max_iter=500, eps=1e-16):
    """Continued fraction for I_x(a, b), modified Lentz, vectorized."""
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = np.ones_like(x)
    d = 1.0 - qab * x / qap
    d = np.where(np.abs(d) < tiny, tiny, d)
    d = 1.0 / d
    h = d.copy()
    done = np.zeros(x.shape, dtype=bool)
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        h = np.where(done, h, h * d * c)
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = np.where(np.abs(d) < tiny, tiny, d)
        c = 1.0 + aa / c
        c = np.where(np.abs(c) < tiny, tiny, c)
        d = 1.0 / d
        step = d * c
        h = np.where(done, h, h * step)
        done |= np.abs(step - 1.0) < eps
        if done.all():
            break
    return h


def betainc(a: float, b: float, x):
    """Regularized incomplete beta function I_x(a, b)."""
    x = np.asarray(x, dtype=float)
    out = np.where(x <= 0.0, 0.0, 1.0)
    inside = (x > 0.0) & (x < 1.0)
    if np.any(inside):
        xi = x[inside]
        swap = xi > (a + 1.0) / (a + b + 2.0)
        aa = np.where(swap, b, a)
        bb = np.where(swap, a, b)
        xx = np.where(swap, 1.0 - xi, xi)
        log_front = (math.lgamma(a + b) - special.gammaln(aa) - special.gammaln(bb)
                     + aa * np.log(xx) + bb * np.log1p(-xx))
        val = np.exp(log_front) * _betacf(aa, bb, xx) / aa
        out[inside] = np.where(swap, 1.0 - val, val)
    return out if out.ndim else float(out)


# --------------------------------------------------------------------------
# distributions

@dataclass(frozen=True)
class Distribution1D:
    kind: str
    support_lo: float = -math.inf
    support_hi: float = math.inf
    shape_a: float = 1.0
    shape_b: float = 1.0
    mean_param: float = 0.0
    std_param: float = 1.0

    def __post_init__(self):
        if self.kind not in (BETA, UNIFORM, GAUSSIAN, DIRAC):
            raise ValueError(f"unknown distribution kind {self.kind!r}")
        if self.kind in (BETA, UNIFORM) and not self.support_lo < self.support_hi:
            raise ValueError("bounded distributions need support_lo < support_hi")
        if self.kind == BETA and not (self.shape_a > 0 and self.shape_b > 0):
            raise ValueError("Beta shape parameters must be positive")
        if self.kind == GAUSSIAN and not self.std_param > 0:
            raise ValueError("Gaussian std must be positive")

    @property
    def bounded(self) -> bool:
        return self.kind != GAUSSIAN

    @property
    def width(self) -> float:
        return self.support_hi - self.support_lo

    def mean(self) -> float:
        if self.kind == BETA:
            return self.support_lo + self.width * self.shape_a / (self.shape_a + self.shape_b)
        if self.kind == UNIFORM:
            return 0.5 * (self.support_lo + self.support_hi)
        return self.mean_param

    def std(self) -> float:
        if self.kind == BETA:
            a, b = self.shape_a, self.shape_b
            return self.width * math.sqrt(a * b / ((a + b) ** 2 * (a + b + 1)))
        if self.kind == UNIFORM:
            return self.width / math.sqrt(12.0)
        if self.kind == GAUSSIAN:
            return self.std_param
        return 0.0

    def affine(self, scale: float, shift: float) -> "Distribution1D":
        """Law of ``shift + scale * X``."""
        if scale == 0:
            return dirac(shift)
        lo, hi = sorted((shift + scale * self.support_lo, shift + scale * self.support_hi))
        if self.kind == BETA:
            a, b = (self.shape_a, self.shape_b) if scale > 0 else (self.shape_b, self.shape_a)
            return beta(a, b, lo, hi)
        if self.kind == UNIFORM:
            return uniform(lo, hi)
        if self.kind == GAUSSIAN:
            return gaussian(shift + scale * self.mean_param, abs(scale) * self.std_param)
        return dirac(shift + scale * self.mean_param)

    def to_dict(self) -> dict:
        if self.kind == BETA:
            return {"kind": BETA, "a": self.shape_a, "b": self.shape_b,
                    "lo": self.support_lo, "hi": self.support_hi}
        if self.kind == UNIFORM:
            return {"kind": UNIFORM, "lo": self.support_lo, "hi": self.support_hi}
        if self.kind == GAUSSIAN:
            return {"kind": GAUSSIAN, "mean": self.mean_param, "std": self.std_param}
        return {"kind": DIRAC, "loc": self.mean_param}

    @classmethod
    def from_dict(cls, d: dict) -> "Distribution1D":
        kind = d["kind"]
        if kind == BETA:
            return beta(d["a"], d["b"], d["lo"], d["hi"])
        if kind == UNIFORM:
            return uniform(d["lo"], d["hi"])
        if kind == GAUSSIAN:
            return gaussian(d["mean"], d["std"])
        if kind == DIRAC:
            return dirac(d["loc"])
        raise ValueError(f"unknown distribution kind {kind!r}")


def beta(a: float, b: float, lo: float = 0.0, hi: float = 1.0) -> Distribution1D:
    return Distribution1D(BETA, float(lo), float(hi), shape_a=float(a), shape_b=float(b))


def uniform(lo: float = 0.0, hi: float = 1.0) -> Distribution1D:
    return Distribution1D(UNIFORM, float(lo), float(hi))


def gaussian(mean: float = 0.0, std: float = 1.0) -> Distribution1D:
    return Distribution1D(GAUSSIAN, mean_param=float(mean), std_param=float(std))


def dirac(loc: float) -> Distribution1D:
    return Distribution1D(DIRAC, float(loc), float(loc), mean_param=float(loc), std_param=0.0)


def _scalar_out(x, out):
    return float(out) if np.ndim(x) == 0 else out


def pdf(d: Distribution1D, x):
    """Density of the continuous part (zero everywhere for a Dirac law)."""
    xa = np.asarray(x, dtype=float)
    if d.kind == GAUSSIAN:
        z = (xa - d.mean_param) / d.std_param
        out = np.exp(-0.5 * z * z) / (d.std_param * math.sqrt(2.0 * math.pi))
    elif d.kind == UNIFORM:
        out = np.where((xa >= d.support_lo) & (xa <= d.support_hi), 1.0 / d.width, 0.0)
    elif d.kind == BETA:
        t = (xa - d.support_lo) / d.width
        inside = (t >= 0.0) & (t <= 1.0)
        tc = np.clip(t, 0.0, 1.0)
        log_b = math.lgamma(d.shape_a) + math.lgamma(d.shape_b) - math.lgamma(d.shape_a + d.shape_b)
        with np.errstate(divide="ignore", invalid="ignore"):
            val = tc ** (d.shape_a - 1.0) * (1.0 - tc) ** (d.shape_b - 1.0) / (math.exp(log_b) * d.width)
        out = np.where(inside, val, 0.0)
    else:
        out = np.zeros_like(xa)
    return _scalar_out(x, out)


def cdf(d: Distribution1D, x):
    xa = np.asarray(x, dtype=float)
    if d.kind == GAUSSIAN:
        out = special.ndtr((xa - d.mean_param) / d.std_param)
    elif d.kind == UNIFORM:
        out = np.clip((xa - d.support_lo) / d.width, 0.0, 1.0)
    elif d.kind == BETA:
        out = np.asarray(betainc(d.shape_a, d.shape_b, np.clip((xa - d.support_lo) / d.width, 0.0, 1.0)))
    else:
        out = np.where(xa >= d.mean_param, 1.0, 0.0)
    return _scalar_out(x, out)


def quantile(d: Distribution1D, u, tol: float = 1e-14, max_iter: int = 200):
    """Inverse CDF by bracketed Newton iteration (bisection fallback)."""
    ua = np.asarray(u, dtype=float)
    if np.any((ua <= 0.0) | (ua >= 1.0)) or not np.all(np.isfinite(ua)):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    if d.kind == DIRAC:
        return _scalar_out(u, np.full(ua.shape, d.mean_param))
    if d.kind == UNIFORM:
        return _scalar_out(u, d.support_lo + d.width * ua)
    if d.kind == GAUSSIAN:
        lo = np.full(ua.shape, d.mean_param - 40.0 * d.std_param)
        hi = np.full(ua.shape, d.mean_param + 40.0 * d.std_param)
        x = np.full(ua.shape, d.mean_param)
    else:
        lo = np.full(ua.shape, d.support_lo)
        hi = np.full(ua.shape, d.support_hi)
        x = np.full(ua.shape, d.mean())
    for _ in range(max_iter):
        r = np.asarray(cdf(d, x)) - ua
        lo = np.where(r < 0.0, x, lo)
        hi = np.where(r > 0.0, x, hi)
        f = np.asarray(pdf(d, x))
        with np.errstate(divide="ignore", invalid="ignore"):
            newton = x - r / f
        ok = np.isfinite(newton) & (newton > lo) & (newton < hi)
        x_new = np.where(ok, newton, 0.5 * (lo + hi))
        x_new = np.where(r == 0.0, x, x_new)
        converged = (np.abs(r) <= tol) | (hi - lo <= 4e-16 * np.abs(x)) | (hi - lo <= 1e-300)
        x = np.where(converged, x, x_new)
        if converged.all():
            break
    return _scalar_out(u, x)


def sample(d: Distribution1D, n: int, seed) -> np.ndarray:
    """``n`` inverse-CDF draws; ``seed`` is an int or a SplitMix64 stream."""
    if n < 1:
        raise ValueError("n must be at least 1")
    u = seed.uniform(n) if isinstance(seed, SplitMix64) else uniform_open(int(seed), n)
    return np.asarray(quantile(d, u), dtype=float)


def ks_statistic(samples, cdf_fn) -> float:
    """Kolmogorov-Smirnov distance between the sample and a vectorized CDF."""
    s = np.sort(np.asarray(samples, dtype=float))
    n = s.size
    f = np.asarray(cdf_fn(s), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - f), np.max(f - (i - 1) / n)))


def ks_critical(n: int, alpha: float = 0.01) -> float:
    """Asymptotic one-sample KS critical value."""
    return math.sqrt(-0.5 * math.log(alpha / 2.0)) / math.sqrt(n)


# --------------------------------------------------------------------------
# mixed densities

@dataclass(frozen=True)
class Piece:
    """Continuous density on ``[lo, hi]``.

    ``fn`` is a vectorized evaluator that is only trusted inside the interval;
    ``kind`` records whether it is a closed form, grid interpolant or constant.
    """
    lo: float
    hi: float
    fn: Callable
    kind: str = "closed"

    def __call__(self, x):
        xa = np.asarray(x, dtype=float)
        inside = (xa >= self.lo) & (xa <= self.hi)
        out = np.where(inside, self.fn(np.clip(xa, self.lo, self.hi)), 0.0)
        return _scalar_out(x, out)

    def interior(self, x):
        return self.fn(x)


def grid_piece(x, f) -> Piece:
    x = np.asarray(x, dtype=float)
    f = np.asarray(f, dtype=float)
    return Piece(float(x[0]), float(x[-1]), lambda t: np.interp(t, x, f), kind="grid")


def constant_piece(lo: float, hi: float, value: float) -> Piece:
    return Piece(float(lo), float(hi), lambda t: np.full(np.shape(t), value) if np.ndim(t) else value,
                 kind="constant")


@dataclass(frozen=True)
class MixedDensity1D:
    pieces: tuple = ()
    atoms: tuple = ()  # (location, mass) pairs
    _table: dict = field(default_factory=dict, compare=False, repr=False)

    def __post_init__(self):
        pieces = tuple(sorted(self.pieces, key=lambda p: p.lo))
        for p, q in zip(pieces, pieces[1:]):
            if q.lo < p.hi - 1e-12 * max(1.0, abs(p.hi)):
                raise ValueError(f"overlapping pieces [{p.lo}, {p.hi}] and [{q.lo}, {q.hi}]")
        atoms = tuple(sorted((float(x), float(m)) for x, m in self.atoms if m != 0.0))
        if any(m < 0 for _, m in atoms):
            raise ValueError("atom masses must be nonnegative")
        object.__setattr__(self, "pieces", pieces)
        object.__setattr__(self, "atoms", atoms)

    @property
    def atom_mass(self) -> float:
        return sum(m for _, m in self.atoms)

    @property
    def breakpoints(self) -> list:
        pts = {p.lo for p in self.pieces} | {p.hi for p in self.pieces}
        return sorted(pts)

    def support(self) -> tuple[float, float]:
        xs = self.breakpoints + [x for x, _ in self.atoms]
        return min(xs), max(xs)

    def density(self, x):
        """Continuous part evaluated at ``x`` (atoms excluded)."""
        xa = np.asarray(x, dtype=float)
        out = np.zeros_like(xa)
        for p in self.pieces:
            # half-open so a shared endpoint is not counted twice
            inside = (xa >= p.lo) & (xa < p.hi)
            out = np.where(inside, p.fn(np.clip(xa, p.lo, p.hi)), out)
        return _scalar_out(x, out)

    def active_pieces(self, a: float, b: float) -> list:
        m = 0.5 * (a + b)
        return [p for p in self.pieces if p.lo <= m <= p.hi]

    def continuous_mass(self, tol: float = 1e-8) -> float:
        total = 0.0
        for p in self.pieces:
            f = lambda t, p=p: float(p.fn(t))
            total += adaptive_simpson(f, p.lo, p.hi, tol)[0]
        return total

    # tabulated CDF, used for KS tests and sampling
    def _cdf_table(self):
        if "x" not in self._table:
            xs, cs = [], []
            acc = 0.0
            for p in self.pieces:
                g = np.linspace(p.lo, p.hi, 8 * GRID_POINTS + 1)
                f = np.asarray(p.fn(g), dtype=float)
                inc = np.concatenate([[0.0], np.cumsum(0.5 * (f[1:] + f[:-1]) * np.diff(g))])
                xs.append(g)
                cs.append(acc + inc)
                acc += inc[-1]
            self._table["x"] = np.concatenate(xs) if xs else np.zeros(0)
            self._table["c"] = np.concatenate(cs) if cs else np.zeros(0)
        return self._table["x"], self._table["c"]

    def continuous_cdf(self, x):
        """Unnormalized cumulative mass of the continuous part."""
        gx, gc = self._cdf_table()
        if gx.size == 0:
            return _scalar_out(x, np.zeros(np.shape(x)))
        return _scalar_out(x, np.interp(x, gx, gc, left=0.0, right=gc[-1]))

    def cdf(self, x):
        xa = np.asarray(x, dtype=float)
        out = np.asarray(self.continuous_cdf(xa), dtype=float)
        for loc, m in self.atoms:
            out = out + np.where(xa >= loc, m, 0.0)
        return _scalar_out(x, out)

    def sample(self, n: int, seed) -> np.ndarray:
        """Inverse-CDF draws through the tabulated CDF."""
        u = seed.uniform(n) if isinstance(seed, SplitMix64) else uniform_open(int(seed), n)
        gx, gc = self._cdf_table()
        out = np.empty(n)
        # walk the law left to right: continuous mass and atoms interleaved
        events = [(p.lo, "piece", p) for p in self.pieces] + [(x, "atom", m) for x, m in self.atoms]
        events.sort(key=lambda e: (e[0], e[1] == "piece"))
        base = 0.0
        assigned = np.zeros(n, dtype=bool)
        for loc, kind, obj in events:
            if kind == "atom":
                hit = ~assigned & (u < base + obj)
                out[hit] = loc
                assigned |= hit
                base += obj
            else:
                lo_c = float(self.continuous_cdf(obj.lo))
                hi_c = float(self.continuous_cdf(obj.hi))
                mass = hi_c - lo_c
                hit = ~assigned & (u < base + mass)
                target = lo_c + (u[hit] - base)
                mask = (gx >= obj.lo) & (gx <= obj.hi)
                out[hit] = np.interp(target, gc[mask], gx[mask])
                assigned |= hit
                base += mass
        if not assigned.all():
            last = events[-1]
            out[~assigned] = last[0] if last[1] == "atom" else last[2].hi
        return out


def total_mass(m: MixedDensity1D, tol: float = 1e-8) -> float:
    return m.continuous_mass(tol) + m.atom_mass


def to_mixed(d: Distribution1D) -> MixedDensity1D:
    """Represent a distribution as a mixed density (Dirac laws become one atom)."""
    if d.kind == DIRAC:
        return MixedDensity1D(atoms=((d.mean_param, 1.0),))
    if d.kind == GAUSSIAN:
        lo, hi = d.mean_param - 12.0 * d.std_param, d.mean_param + 12.0 * d.std_param
    else:
        lo, hi = d.support_lo, d.support_hi
    return MixedDensity1D(pieces=(Piece(lo, hi, lambda t: pdf(d, t)),))


def pushforward_affine(d: Distribution1D, slope: float, intercept: float) -> MixedDensity1D:
    """Law of ``intercept + slope * X`` as a mixed density."""
    if slope == 0.0 or d.kind == DIRAC:
        return MixedDensity1D(atoms=((intercept + slope * d.mean_param if d.kind == DIRAC else intercept, 1.0),))
    return to_mixed(d.affine(slope, intercept))


# --------------------------------------------------------------------------
# CSV export

def _fmt(v: float) -> str:
    return format(float(v), ".6g")


def density_grid(m: MixedDensity1D, points: int = GRID_POINTS) -> tuple[np.ndarray, np.ndarray]:
    xs, fs = [], []
    for p in m.pieces:
        g = np.linspace(p.lo, p.hi, points)
        xs.append(g)
        fs.append(np.asarray(p.fn(g), dtype=float))
    if not xs:
        return np.zeros(0), np.zeros(0)
    return np.concatenate(xs), np.concatenate(fs)


def write_density_csv(m: MixedDensity1D, path, points: int = GRID_POINTS) -> Path:
    path = Path(path)
    x, f = density_grid(m, points)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["x", "f"])
        for a, b in zip(x, f):
            w.writerow([_fmt(a), _fmt(b)])
    return path


def write_atoms_csv(m: MixedDensity1D, path) -> Path:
    path = Path(path)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["location", "mass"])
        for loc, mass in m.atoms:
            w.writerow([_fmt(loc), _fmt(mass)])
    return path
