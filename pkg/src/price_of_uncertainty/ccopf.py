"""Chance-constrained DC-OPF with affine (PCE) generation policies.

The policy for generator i is ``sum_l alpha[l, i] psi_l``.  Its expected cost
is ``0.5 sum_l gram_l alpha_l' H alpha_l + h' alpha_0`` and each chance
constraint is replaced by the moment margin

    mean_i + delta * std_i <= p_max_i,     mean_i - delta * std_i >= p_min_i.

For a single germ with L = 1 the standard deviation is ``sqrt(gram_1) |alpha[1, i]|``,
so each margin is the pair of linear inequalities obtained by fixing the sign
of ``alpha[1, i]``.  The solver enumerates sign-resolved active sets, solves
the equality-constrained KKT system for each and returns the first point that
satisfies all KKT conditions, which is the global optimum of this convex QP.
"""
from __future__ import annotations

import itertools
import json
import math
from dataclasses import dataclass

import numpy as np

from . import stochastics as st
from .dcopf import Network
from .errors import DomainError, InfeasibleTightening, SingularMatrix
from .linalg_qp import solve_linear
from .pce import Basis, PceVector, basis_from_id, pce_of_demand

KKT_TOL = 1e-10


@dataclass(frozen=True)
class ChanceSpec:
    delta: float
    bounds: tuple  # (p_min, p_max) per generator

    def __post_init__(self):
        if not self.delta >= 0:
            raise ValueError("delta must be nonnegative")

    @classmethod
    def from_network(cls, net: Network, delta: float) -> "ChanceSpec":
        return cls(float(delta), tuple((g.p_min, g.p_max) for g in net.generators))


@dataclass(frozen=True)
class Policy:
    basis: Basis
    alpha: np.ndarray               # (L + 1, n_gen)
    delta: float = 0.0
    generator_ids: tuple = ()
    demand: PceVector | None = None  # the expansion the policy was solved against
    kkt: dict | None = None          # residuals recorded by the solver

    @property
    def n_gen(self) -> int:
        return self.alpha.shape[1]

    def index(self, gen_id: int) -> int:
        return self.generator_ids.index(gen_id) if self.generator_ids else gen_id

    def mean(self, gen_id: int) -> float:
        return float(self.alpha[0, self.index(gen_id)])

    def std(self, gen_id: int) -> float:
        c = self.alpha[1:, self.index(gen_id)]
        return math.sqrt(float(np.sum(c * c * np.asarray(self.basis.gram[1:]))))

    def balance_residual(self) -> float:
        if self.demand is None:
            raise ValueError("policy carries no demand expansion")
        return float(np.max(np.abs(self.alpha.sum(axis=1) + self.demand.total())))

    def to_json(self) -> str:
        return json.dumps({"basis_id": self.basis.basis_id, "alpha": self.alpha.tolist(),
                           "delta": self.delta})

    @classmethod
    def from_json(cls, text: str) -> "Policy":
        d = json.loads(text)
        return cls(basis_from_id(d["basis_id"]), np.array(d["alpha"], dtype=float), float(d["delta"]))


def _margin_rows(n, size, bounds, delta, sqrt_g):
    """Linear forms a' alpha <= b for every sign branch of every finite limit."""
    rows = []
    for i, (lo, hi) in enumerate(bounds):
        for side, bound in (("upper", hi), ("lower", lo)):
            if not math.isfinite(bound):
                continue
            sgn = 1.0 if side == "upper" else -1.0
            for s in ((1.0, -1.0) if size > 1 else (1.0,)):
                a = np.zeros(size * n)
                a[i] = sgn
                if size > 1:
                    a[n + i] = delta * sqrt_g * s
                rows.append({"gen": i, "side": side, "sign": s, "a": a, "b": sgn * bound})
    return rows


def _kkt_point(q_diag, c, eq_a, eq_b, act_rows):
    """Solve the equality-constrained KKT system with ``act_rows`` held tight."""
    a_all = np.vstack([eq_a] + [r["a"][None, :] for r in act_rows])
    b_all = np.concatenate([eq_b, [r["b"] for r in act_rows]])
    nv, m = q_diag.size, a_all.shape[0]
    kkt = np.zeros((nv + m, nv + m))
    kkt[:nv, :nv] = np.diag(q_diag)
    kkt[:nv, nv:] = a_all.T
    kkt[nv:, :nv] = a_all
    z = solve_linear(kkt, np.concatenate([-c, b_all]))
    x, y = z[:nv], z[nv:]
    residuals = {
        "stationarity": float(np.max(np.abs(q_diag * x + c + a_all.T @ y))),
        "balance": float(np.max(np.abs(eq_a @ x - eq_b))),
    }
    return x, y[eq_a.shape[0]:], residuals


def solve_ccopf(net: Network, demand_pce: PceVector, spec: ChanceSpec) -> Policy:
    """Optimal affine policy under moment-tightened generation limits."""
    gens = net.generators
    n = len(gens)
    if len(spec.bounds) != n:
        raise ValueError("ChanceSpec needs one bound pair per generator")
    hd = np.array([g.cost_quadratic for g in gens])
    hl = np.array([g.cost_linear for g in gens])
    basis = demand_pce.basis
    size = basis.size
    gram = np.asarray(basis.gram)
    ids = tuple(net.generator_ids)

    # variables: alpha_0, ..., alpha_L stacked
    q_diag = np.concatenate([g * hd for g in gram])
    c = np.concatenate([hl] + [np.zeros(n)] * (size - 1))
    eq_a = np.kron(np.eye(size), np.ones((1, n)))
    eq_b = -demand_pce.total()
    bounded = any(math.isfinite(lo) or math.isfinite(hi) for lo, hi in spec.bounds)
    if bounded and size > 2 and spec.delta > 0:
        raise ValueError("moment-tightened limits are implemented for order-1 expansions")
    rows = _margin_rows(n, min(size, 2), spec.bounds, spec.delta, math.sqrt(gram[1]) if size > 1 else 0.0)
    if size > 2:
        for r in rows:
            r["a"] = np.concatenate([r["a"], np.zeros((size - 2) * n)])

    def feasible(x):
        return all(r["a"] @ x <= r["b"] + KKT_TOL * max(1.0, abs(r["b"])) for r in rows)

    def policy(x, kkt):
        return Policy(basis, x.reshape(size, n), spec.delta, ids, demand_pce, kkt)

    x, _, res = _kkt_point(q_diag, c, eq_a, eq_b, [])
    if feasible(x):
        return policy(x, res)

    # per generator: no tight margin, one sign branch, or both branches of
    # the same limit (which forces alpha_1 = 0)
    free_slope = x[n:2 * n] if size > 1 else np.zeros(n)
    per_gen = []
    for i in range(n):
        mine = [k for k, r in enumerate(rows) if r["gen"] == i]
        opts = [()] + [(k,) for k in mine]
        opts += [pair for pair in itertools.combinations(mine, 2)
                 if rows[pair[0]]["side"] == rows[pair[1]]["side"]]
        # the sign seen in the unconstrained solution is tried first
        pref = np.sign(free_slope[i]) or 1.0
        opts.sort(key=lambda o: (len(o), sum(rows[k]["sign"] != pref for k in o)))
        per_gen.append(opts)
    combos = sorted(itertools.product(*per_gen), key=lambda cmb: sum(len(o) for o in cmb))

    for combo in combos:
        act = [rows[k] for o in combo for k in o]
        if not act:
            continue
        try:
            x, mu, res = _kkt_point(q_diag, c, eq_a, eq_b, act)
        except SingularMatrix:
            continue
        if np.all(mu >= -KKT_TOL) and feasible(x):
            res["dual_sign"] = float(max(0.0, -mu.min()))
            return policy(x, res)
    raise InfeasibleTightening(
        f"no policy satisfies the limits with delta={spec.delta:g}; the margin exceeds the available slack")


def _psi1_affine(basis: Basis) -> tuple[float, float]:
    p = basis.functions[1]
    return float(p.coef[0]), float(p.coef[1])


def evaluate_policy(policy: Policy, value, physical: bool = False):
    """Generation at a germ value, or at a total demand when ``physical``."""
    v = np.atleast_1d(np.asarray(value, dtype=float))
    germ = policy.basis.germ
    if physical:
        if policy.demand is None or policy.basis.order != 1:
            raise ValueError("physical evaluation needs an order-1 policy with its demand expansion")
        d0, d1 = policy.demand.total()[:2]
        if d1 == 0:
            raise DomainError("demand expansion is deterministic; evaluate on the germ instead")
        c0, c1 = _psi1_affine(policy.basis)
        xi = ((v - d0) / d1 - c0) / c1
    else:
        xi = v
    if germ.bounded:
        span = germ.width
        if np.any(xi < germ.support_lo - 1e-12 * span) or np.any(xi > germ.support_hi + 1e-12 * span):
            raise DomainError("realization outside the support of the uncertainty")
        xi = np.clip(xi, germ.support_lo, germ.support_hi)
    out = policy.basis.evaluate(xi).T @ policy.alpha
    return out[0] if np.ndim(value) == 0 else out


def policy_affine_map(policy: Policy, gen_id: int, demand: st.Distribution1D | None = None):
    """(intercept, slope) with generation = intercept + slope * total_demand."""
    i = policy.index(gen_id)
    dem = policy.demand
    if dem is None:
        dem = pce_of_demand(demand, policy.basis)
    d0, d1 = dem.total()[:2]
    a0, a1 = policy.alpha[0, i], policy.alpha[1, i]
    if d1 == 0:
        return a0, 0.0
    return a0 - a1 * d0 / d1, a1 / d1


def policy_density(policy: Policy, demand: st.Distribution1D, gen_id: int) -> st.MixedDensity1D:
    """Law of one generator's policy output; an atom when it does not respond."""
    i = policy.index(gen_id)
    a0, a1 = policy.alpha[0, i], policy.alpha[1, i]
    if demand.kind == st.DIRAC:
        intercept, slope = policy_affine_map(policy, gen_id, demand)
        return st.MixedDensity1D(atoms=((intercept + slope * demand.mean_param, 1.0),))
    if a1 == 0.0:
        return st.MixedDensity1D(atoms=((a0, 1.0),))
    d0, d1 = (policy.demand or pce_of_demand(demand, policy.basis)).total()[:2]
    ratio = d1 / a1
    shift = (a1 * d0 - a0 * d1) / a1

    def f(x):
        return abs(ratio) * st.pdf(demand, shift + ratio * np.asarray(x))

    if demand.bounded:
        ends = sorted(((demand.support_lo - shift) / ratio, (demand.support_hi - shift) / ratio))
    else:
        c = a0 + (a1 / d1) * (demand.mean() - d0)
        w = 12.0 * abs(a1 / d1) * demand.std()
        ends = [c - w, c + w]
    return st.MixedDensity1D((st.Piece(ends[0], ends[1], f),))


def satisfaction_probability(policy: Policy, demand: st.Distribution1D, gen_id: int,
                             bound: float, side: str = "upper") -> float:
    """P(p <= bound) for ``side="upper"``, P(p >= bound) for ``"lower"``."""
    if not math.isfinite(bound):
        return 1.0
    intercept, slope = policy_affine_map(policy, gen_id, demand)
    if side not in ("upper", "lower"):
        raise ValueError("side must be 'upper' or 'lower'")
    if slope == 0.0 or demand.kind == st.DIRAC:
        p = intercept + slope * demand.mean()
        return float(p <= bound if side == "upper" else p >= bound)
    cut = (bound - intercept) / slope
    below = float(st.cdf(demand, cut))
    # generation <= bound is {demand <= cut} for a positive slope
    upper_ok = below if slope > 0 else 1.0 - below
    return upper_ok if side == "upper" else 1.0 - upper_ok


def violation_probability(policy: Policy, demand: st.Distribution1D, gen_id: int,
                          bound: float, side: str = "upper") -> float:
    return 1.0 - satisfaction_probability(policy, demand, gen_id, bound, side)
