"""In-hindsight OPF: one optimal dispatch per demand realization.

``run_hopf`` is the Monte-Carlo route (sample, solve, collect);
``analytic_hopf_density`` pushes the demand density through the closed-form
two-generator argmin, which yields a mixed law with an atom at the limit.
"""
from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import stochastics as st
from .dcopf import ArgminCaseSplit, Network, argmin, build_qp, two_generators
from .errors import InfeasibleProblem, UnsupportedDistribution
from .linalg_qp import KKT_TOL, UPPER, QpProblem, solve_box_qp, solve_with_active_set
from .rng import uniform_open

FEAS_TOL = 1e-9


@dataclass(frozen=True)
class HopfEmpirical:
    samples: np.ndarray      # (N, n_gen) optimal generation
    costs: np.ndarray        # (N,) optimal objective
    demands: np.ndarray      # (N, n_bus) sampled demand
    seed: int
    n: int
    generator_ids: tuple
    lower: np.ndarray
    upper: np.ndarray

    def column(self, gen_id: int) -> np.ndarray:
        return self.samples[:, self.generator_ids.index(gen_id)]

    def max_violation(self) -> dict:
        bal = np.abs(self.samples.sum(axis=1) + self.demands.sum(axis=1))
        over = np.maximum(self.samples - self.upper, 0.0)
        under = np.maximum(self.lower - self.samples, 0.0)
        return {"balance": float(bal.max()), "bounds": float(max(over.max(), under.max()))}

    def to_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["sample", "demand_total"] + [f"p_bus{i}" for i in self.generator_ids] + ["cost"])
            dtot = self.demands.sum(axis=1)
            for k in range(self.n):
                w.writerow([k, st._fmt(dtot[k])] + [st._fmt(v) for v in self.samples[k]] + [st._fmt(self.costs[k])])
        return path


def sample_demands(net: Network, n: int, seed: int, offset: int = 0) -> np.ndarray:
    """Demand realizations (N, n_bus); all uncertain loads share one uniform draw."""
    u = uniform_open(seed, n, offset)
    cols = []
    for b in net.buses:
        if isinstance(b.demand, st.Distribution1D):
            cols.append(np.asarray(st.quantile(b.demand, u), dtype=float))
        else:
            cols.append(np.full(n, float(b.demand)))
    return np.column_stack(cols)


class _ActiveSetReplay:
    """Affine replay of known active sets over many balance values."""

    def __init__(self, q: QpProblem):
        self.q = q
        self.entries = {}

    def add(self, active: frozenset):
        if active in self.entries:
            return
        act = dict(active)
        s0 = solve_with_active_set(self.q.with_rhs(0.0), act)
        s1 = solve_with_active_set(self.q.with_rhs(1.0), act)
        self.entries[active] = (s0.primal, s1.primal - s0.primal,
                                s0.multipliers_bounds, s1.multipliers_bounds - s0.multipliers_bounds,
                                s0.multiplier_balance, s1.multiplier_balance - s0.multiplier_balance)

    def ordered(self):
        return sorted(self.entries.items(), key=lambda kv: sorted(kv[0]))

    def evaluate(self, active, rhs):
        p0, dp, m0, dm, l0, dl = self.entries[active]
        p = p0 + rhs[:, None] * dp
        for i, side in active:
            p[:, i] = self.q.upper[i] if side == UPPER else self.q.lower[i]
        mu = m0 + rhs[:, None] * dm
        return p, mu, l0 + rhs * dl

    def valid(self, active, rhs) -> np.ndarray:
        p, mu, lam = self.evaluate(active, rhs)
        tol = KKT_TOL * np.maximum(1.0, np.abs(p))
        ok = np.all((p <= self.q.upper + tol) & (p >= self.q.lower - tol), axis=1)
        for i, _ in active:
            ok &= mu[:, i] >= -KKT_TOL * np.maximum(1.0, np.abs(lam))
        return ok

    def discover(self, rhs: np.ndarray, index_offset: int = 0):
        """Grow the cache until every balance value has a valid active set."""
        pending = np.ones(rhs.size, dtype=bool)
        for active, _ in self.ordered():
            pending &= ~self.valid(active, rhs)
        while pending.any():
            k = int(np.flatnonzero(pending)[0])
            try:
                sol = solve_box_qp(self.q.with_rhs(rhs[k]))
            except InfeasibleProblem as exc:
                raise InfeasibleProblem(f"sample {k + index_offset}: {exc}", k + index_offset) from exc
            self.add(sol.active_set)
            pending[k] = False
            idx = np.flatnonzero(pending)
            pending[idx] = ~self.valid(sol.active_set, rhs[idx])

    def solve(self, rhs: np.ndarray) -> np.ndarray:
        """Primal rows; the first valid set in canonical order wins."""
        out = np.full((rhs.size, self.q.n), np.nan)
        todo = np.ones(rhs.size, dtype=bool)
        for active, _ in self.ordered():
            idx = np.flatnonzero(todo)
            if idx.size == 0:
                break
            ok = self.valid(active, rhs[idx])
            hit = idx[ok]
            out[hit] = self.evaluate(active, rhs[hit])[0]
            todo[hit] = False
        if todo.any():
            raise RuntimeError("active-set replay left rows unresolved")
        return out


def run_hopf(net: Network, n: int, seed: int, chunk_size: int | None = None,
             workers: int = 1) -> HopfEmpirical:
    """Sample ``n`` demands and solve the OPF for each one.

    Rows are split into chunks that draw from their own offset of the
    counter-based stream, so the merged result is independent of
    ``chunk_size`` and ``workers``.
    """
    if n < 1:
        raise ValueError("n must be at least 1")
    chunk_size = chunk_size or n
    starts = list(range(0, n, chunk_size))

    def draw(start):
        return sample_demands(net, min(chunk_size, n - start), seed, start)

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            demand_chunks = list(pool.map(draw, starts))
    else:
        demand_chunks = [draw(s) for s in starts]
    demands = np.vstack(demand_chunks)
    rhs = demands.sum(axis=1)

    q = build_qp(net, demands[0])
    replay = _ActiveSetReplay(q)
    replay.discover(rhs)

    def solve(start):
        return replay.solve(rhs[start:start + chunk_size])

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            parts = list(pool.map(solve, starts))
    else:
        parts = [solve(s) for s in starts]
    p = np.vstack(parts)
    costs = 0.5 * (p * p) @ q.h_diag + p @ q.h_lin
    return HopfEmpirical(p, costs, demands, int(seed), int(n), tuple(net.generator_ids), q.lower, q.upper)


def analytic_hopf_density(net: Network) -> dict:
    """Per-generator law of the hindsight dispatch, keyed by generator bus id."""
    d = net.total_demand_distribution()
    g1, g2 = two_generators(net)
    if d.kind == st.DIRAC:
        p = argmin(net, [b.demand_mean() for b in net.buses])
        return {gid: st.MixedDensity1D(atoms=((float(v), 1.0),)) for gid, v in zip(net.generator_ids, p)}
    if not d.bounded:
        raise UnsupportedDistribution("analytic hindsight density needs a bounded demand law")
    cs = ArgminCaseSplit.from_network(net)
    beta, gamma, p1_max = cs.beta, cs.gamma, g1.p_max
    d_lo, d_hi = d.support_lo, d.support_hi
    # demand values at or below the threshold saturate generator 1
    threshold = -cs.switch_point if math.isfinite(cs.switch_point) else -math.inf
    mass_c = 0.0 if threshold < d_lo else (1.0 if threshold >= d_hi else float(st.cdf(d, threshold)))

    pieces1, pieces2, atoms1 = [], [], []
    cut = max(d_lo, threshold)
    x2_switch = None
    if cut < d_hi:
        f = lambda x: st.pdf(d, (x + beta) / -gamma) / gamma
        saturates = cut == threshold
        # at the switch both branches meet the limit; use it exactly
        top1 = p1_max if saturates else -beta - gamma * cut
        pieces1.append(st.Piece(-beta - gamma * d_hi, top1, f))
        g = lambda x: st.pdf(d, (x - beta) / (gamma - 1.0)) / (1.0 - gamma)
        x2_switch = -threshold - p1_max if saturates else beta - (1.0 - gamma) * cut
        pieces2.append(st.Piece(beta - (1.0 - gamma) * d_hi, x2_switch, g))
    if mass_c > 0.0:
        atoms1.append((p1_max, mass_c))
        top = min(threshold, d_hi)
        lo2 = x2_switch if x2_switch is not None else -top - p1_max
        h = lambda x: st.pdf(d, -x - p1_max)
        pieces2.append(st.Piece(lo2, -d_lo - p1_max, h))
    out = {g1.id: st.MixedDensity1D(tuple(pieces1), tuple(atoms1)),
           g2.id: st.MixedDensity1D(tuple(pieces2))}
    return {gid: out[gid] for gid in net.generator_ids}


def empirical_vs_analytic_report(e: HopfEmpirical, a: st.MixedDensity1D, gen_id: int) -> dict:
    """Atom frequency z-score and KS statistic of the continuous remainder."""
    x = e.column(gen_id)
    j = e.generator_ids.index(gen_id)
    candidates = {loc for loc, _ in a.atoms}
    candidates |= {v for v in (e.lower[j], e.upper[j]) if math.isfinite(v)}
    expected = dict(a.atoms)
    on_atom = np.zeros(x.size, dtype=bool)
    atoms = []
    for loc in sorted(candidates):
        hit = np.abs(x - loc) <= FEAS_TOL
        on_atom |= hit
        freq = float(hit.mean())
        p = expected.get(loc, 0.0)
        if 0.0 < p < 1.0:
            z = (freq - p) / math.sqrt(p * (1.0 - p) / x.size)
        else:
            z = 0.0 if freq == p else math.inf
        atoms.append({"location": loc, "frequency": freq, "expected": p, "z_score": z})
    rest = x[~on_atom]
    cont_total = float(a.continuous_cdf(np.inf)) if a.pieces else 0.0
    if rest.size and cont_total > 0.0:
        ks = st.ks_statistic(rest, lambda t: np.asarray(a.continuous_cdf(t)) / cont_total)
        crit = st.ks_critical(rest.size)
    else:
        ks, crit = 0.0, math.inf
    return {"n": int(x.size), "atoms": atoms, "ks_statistic": ks, "ks_critical_1pct": crit,
            "continuous_samples": int(rest.size)}
