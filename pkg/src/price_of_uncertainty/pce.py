"""Polynomial chaos bases, coefficient vectors and the Galerkin KKT system.

Bases are the classical (non-normalized) orthogonal families of each germ:

* Beta(a, b) germ on [0, 1]: Jacobi P_l^(b-1, a-1)(2 xi - 1)
* Uniform germ on [-1, 1]:   Legendre P_l(xi)
* Gaussian germ N(0, 1):     probabilists' Hermite He_l(xi)

With these, psi_1 is an affine map of the germ whose Gram value is generally
not one (for Beta(4, 2): psi_1 = 6 xi - 4, Gram 72/63), so every second-moment
formula carries the Gram values explicitly.  ``orthonormal=True`` rescales the
basis to unit Gram values instead.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial import Polynomial
from numpy.polynomial.hermite_e import HermiteE
from scipy import special

from . import stochastics as st
from .errors import UnsupportedDistribution
from .linalg_qp import LOWER, UPPER, QpProblem, solve_linear

QUAD_POINTS = 64


@dataclass(frozen=True)
class Basis:
    germ: st.Distribution1D
    functions: tuple
    gram: tuple
    family: str
    orthonormal: bool = False

    @property
    def order(self) -> int:
        return len(self.functions) - 1

    @property
    def size(self) -> int:
        return len(self.functions)

    @property
    def basis_id(self) -> str:
        if self.family == "jacobi":
            head = f"beta:{self.germ.shape_a!r}:{self.germ.shape_b!r}"
        else:
            head = {"legendre": "uniform", "hermite": "gaussian"}[self.family]
        tail = ":orthonormal" if self.orthonormal else ""
        return f"{head}:L{self.order}{tail}"

    def evaluate(self, xi) -> np.ndarray:
        """Matrix of shape (L + 1, len(xi)) with psi_l(xi_k)."""
        xi = np.atleast_1d(np.asarray(xi, dtype=float))
        return np.vstack([f(xi) for f in self.functions])

    def quadrature(self, n: int = QUAD_POINTS) -> tuple[np.ndarray, np.ndarray]:
        return gauss_rule(self.germ, n)


def gauss_rule(germ: st.Distribution1D, n: int = QUAD_POINTS) -> tuple[np.ndarray, np.ndarray]:
    """Gauss nodes and probability weights for the germ measure."""
    if germ.kind == st.BETA:
        t, w = special.roots_jacobi(n, germ.shape_b - 1.0, germ.shape_a - 1.0)
        x = 0.5 * (t + 1.0)
    elif germ.kind == st.UNIFORM:
        x, w = special.roots_legendre(n)
    elif germ.kind == st.GAUSSIAN:
        x, w = special.roots_hermitenorm(n)
    else:
        raise UnsupportedDistribution(f"no quadrature rule for germ kind {germ.kind!r}")
    return x, w / w.sum()


def _family_polys(germ: st.Distribution1D, order: int) -> tuple[str, list]:
    if germ.kind == st.BETA:
        alpha, beta_ = germ.shape_b - 1.0, germ.shape_a - 1.0
        to_sym = Polynomial([-1.0, 2.0])
        polys = [Polynomial(special.jacobi(l, alpha, beta_).coeffs[::-1])(to_sym) for l in range(order + 1)]
        return "jacobi", polys
    if germ.kind == st.UNIFORM:
        return "legendre", [Polynomial(special.legendre(l).coeffs[::-1]) for l in range(order + 1)]
    if germ.kind == st.GAUSSIAN:
        return "hermite", [HermiteE.basis(l).convert(kind=Polynomial) for l in range(order + 1)]
    raise UnsupportedDistribution(f"no registered basis for {germ.kind!r} distributions")


def germ_of(d: st.Distribution1D) -> st.Distribution1D:
    """Standard germ whose affine image is ``d``."""
    if d.kind == st.BETA:
        return st.beta(d.shape_a, d.shape_b, 0.0, 1.0)
    if d.kind == st.UNIFORM:
        return st.uniform(-1.0, 1.0)
    if d.kind == st.GAUSSIAN:
        return st.gaussian(0.0, 1.0)
    raise UnsupportedDistribution(f"no registered basis for {d.kind!r} distributions")


def basis_for(d: st.Distribution1D, order: int = 1, orthonormal: bool = False) -> Basis:
    if order < 0:
        raise ValueError("basis order must be nonnegative")
    germ = germ_of(d)
    family, polys = _family_polys(germ, order)
    x, w = gauss_rule(germ)
    gram = [float(w @ p(x) ** 2) for p in polys]
    if orthonormal:
        polys = [p / math.sqrt(g) for p, g in zip(polys, gram)]
        gram = [1.0] * len(polys)
    # psi_0 is exactly one; keep its Gram value exact as well
    gram[0] = 1.0
    return Basis(germ, tuple(polys), tuple(gram), family, orthonormal)


def basis_from_id(basis_id: str) -> Basis:
    parts = basis_id.split(":")
    orthonormal = parts[-1] == "orthonormal"
    if orthonormal:
        parts = parts[:-1]
    order = int(parts[-1].lstrip("L"))
    kind = parts[0]
    if kind == "beta":
        d = st.beta(float(parts[1]), float(parts[2]))
    elif kind == "uniform":
        d = st.uniform(-1.0, 1.0)
    elif kind == "gaussian":
        d = st.gaussian()
    else:
        raise UnsupportedDistribution(f"unknown basis id {basis_id!r}")
    return basis_for(d, order, orthonormal)


@dataclass(frozen=True)
class PceVector:
    """Coefficients ``coeffs[l, i]`` of component ``i`` on basis function ``l``."""
    basis: Basis
    coeffs: np.ndarray

    def __post_init__(self):
        c = np.asarray(self.coeffs, dtype=float)
        if c.ndim == 1:
            c = c[:, None]
        if c.shape[0] != self.basis.size:
            raise ValueError(f"expected {self.basis.size} coefficient rows, got {c.shape[0]}")
        if not np.all(np.isfinite(c)):
            raise ValueError("PCE coefficients must be finite")
        object.__setattr__(self, "coeffs", c)

    @property
    def n(self) -> int:
        return self.coeffs.shape[1]

    def total(self) -> np.ndarray:
        """Coefficients of the sum over components."""
        return self.coeffs.sum(axis=1)

    def evaluate(self, xi) -> np.ndarray:
        """Realizations, shape (len(xi), n)."""
        return (self.basis.evaluate(xi).T @ self.coeffs)

    def to_json(self) -> str:
        return json.dumps({"basis_id": self.basis.basis_id, "coeffs": self.coeffs.tolist()})

    @classmethod
    def from_json(cls, text: str) -> "PceVector":
        d = json.loads(text)
        return cls(basis_from_id(d["basis_id"]), np.array(d["coeffs"], dtype=float))


def germ_map(d: st.Distribution1D) -> tuple[float, float]:
    """(shift, scale) with d = shift + scale * germ."""
    if d.kind == st.BETA:
        return d.support_lo, d.width
    if d.kind == st.UNIFORM:
        return 0.5 * (d.support_lo + d.support_hi), 0.5 * d.width
    if d.kind == st.GAUSSIAN:
        return d.mean_param, d.std_param
    raise UnsupportedDistribution(f"{d.kind!r} has no germ map")


def pce_of_demand(d: st.Distribution1D, basis: Basis | None = None) -> PceVector:
    """Exact expansion ``coeff_0 + coeff_1 psi_1`` of a single demand."""
    if d.kind == st.DIRAC:
        basis = basis or basis_for(st.uniform(-1.0, 1.0), 1)
        c = np.zeros(basis.size)
        c[0] = d.mean_param
        return PceVector(basis, c)
    basis = basis or basis_for(d, 1)
    if germ_of(d) != basis.germ:
        raise UnsupportedDistribution(f"{d.kind} demand is not an affine image of the basis germ")
    shift, scale = germ_map(d)
    psi1 = basis.functions[1]
    slope, intercept = psi1.coef[1], psi1.coef[0]
    if psi1.degree() != 1:
        raise UnsupportedDistribution("basis psi_1 is not affine in the germ")
    c = np.zeros(basis.size)
    # d = shift + scale * xi and psi_1 = intercept + slope * xi
    c[1] = scale / slope
    c[0] = shift - c[1] * intercept
    return PceVector(basis, c)


def pce_of_demands(demands, basis: Basis | None = None) -> PceVector:
    """Joint expansion of several loads driven by one shared germ.

    ``demands`` holds a Distribution1D or a fixed float per bus.  All
    uncertain entries must be affine images of the same germ.
    """
    uncertain = [d for d in demands if isinstance(d, st.Distribution1D) and d.kind != st.DIRAC]
    if basis is None:
        basis = basis_for(uncertain[0], 1) if uncertain else basis_for(st.uniform(-1.0, 1.0), 1)
    cols = []
    for d in demands:
        if not isinstance(d, st.Distribution1D):
            d = st.dirac(float(d))
        cols.append(pce_of_demand(d, basis).coeffs[:, 0])
    return PceVector(basis, np.column_stack(cols))


def moments(v: PceVector, component: int = 0) -> tuple[float, float]:
    c = v.coeffs[:, component]
    g = np.asarray(v.basis.gram)
    var = float(np.sum(c[1:] ** 2 * g[1:]))
    return float(c[0]), math.sqrt(var)


# --------------------------------------------------------------------------
# Galerkin-projected KKT system

def _kkt_block(q: QpProblem, active) -> np.ndarray:
    n = q.n
    k = len(active)
    blk = np.zeros((n + 1 + k, n + 1 + k))
    blk[:n, :n] = np.diag(q.h_diag)
    blk[:n, n] = blk[n, :n] = 1.0
    for j, (i, _) in enumerate(active):
        blk[i, n + 1 + j] = blk[n + 1 + j, i] = 1.0
    return blk


def _active_list(q: QpProblem, active):
    active = sorted(active or ())
    for i, side in active:
        b = q.upper[i] if side == UPPER else q.lower[i]
        if not np.isfinite(b):
            raise ValueError(f"variable {i} has no finite {side} bound")
    return active


def _bound_value(q, i, side):
    return q.upper[i] if side == UPPER else q.lower[i]


def galerkin_kkt(q: QpProblem, demand: PceVector, active=None) -> tuple[np.ndarray, np.ndarray]:
    """Block-diagonal system ``(I_{L+1} kron K) z = b`` in hindsight ordering.

    ``z`` stacks ``(alpha_0, lam_0, mu_0, alpha_1, lam_1, mu_1, ...)``.  Bounds
    listed in ``active`` (pairs of index and side) are enforced as equalities:
    the mean coefficient sits on the bound and higher coefficients vanish.
    The linear cost enters the l = 0 block only.
    """
    active = _active_list(q, active)
    blk = _kkt_block(q, active)
    size = demand.basis.size
    a = np.kron(np.eye(size), blk)
    dsum = demand.total()
    parts = []
    for l in range(size):
        h = q.h_lin if l == 0 else np.zeros(q.n)
        pinned = [(_bound_value(q, i, s) if l == 0 else 0.0) for i, s in active]
        parts.append(np.concatenate([-h, [-dsum[l]], pinned]))
    return a, np.concatenate(parts)


def chance_ordering_kkt(q: QpProblem, demand: PceVector, active=None) -> tuple[np.ndarray, np.ndarray]:
    """The same KKT system assembled in policy ordering.

    ``z`` stacks all primal coefficients first, then all balance multipliers,
    then all bound multipliers, built directly from the Kronecker form of
    the policy QP rather than by permuting the hindsight system.
    """
    active = _active_list(q, active)
    n, k, size = q.n, len(active), demand.basis.size
    eye = np.eye(size)
    ones = np.ones((1, n))
    sel = np.zeros((k, n))
    for j, (i, _) in enumerate(active):
        sel[j, i] = 1.0
    cons = np.vstack([np.kron(eye, ones), np.kron(eye, sel)]) if k else np.kron(eye, ones)
    m = cons.shape[0]
    a = np.block([[np.kron(eye, np.diag(q.h_diag)), cons.T],
                  [cons, np.zeros((m, m))]])
    e = np.zeros(size)
    e[0] = 1.0
    dsum = demand.total()
    pinned = np.kron(e, [_bound_value(q, i, s) for i, s in active]) if k else np.zeros(0)
    b = np.concatenate([-np.kron(e, q.h_lin), -dsum, pinned])
    return a, b


def permutation_matrix(n: int, size: int, n_dual: int = 1) -> np.ndarray:
    """Map hindsight ordering (per-coefficient blocks) to policy ordering."""
    eye = np.eye(size)
    width = n + n_dual
    primal = np.hstack([np.eye(n), np.zeros((n, n_dual))])
    balance = np.zeros((1, width))
    balance[0, n] = 1.0
    bounds = np.hstack([np.zeros((n_dual - 1, n + 1)), np.eye(n_dual - 1)])
    return np.vstack([np.kron(eye, primal), np.kron(eye, balance), np.kron(eye, bounds)])


@dataclass(frozen=True)
class EquivalenceReport:
    solution_residual: float
    rhs_residual: float
    matrix_residual: float
    transposed_form_residual: float
    permutation: np.ndarray
    z_policy: np.ndarray
    z_hindsight: np.ndarray

    @property
    def max_residual(self) -> float:
        return max(self.solution_residual, self.rhs_residual, self.matrix_residual)

    def as_dict(self) -> dict:
        return {"solution_residual": self.solution_residual,
                "rhs_residual": self.rhs_residual,
                "matrix_residual": self.matrix_residual,
                "transposed_form_residual": self.transposed_form_residual}


def permutation_equivalence_check(q: QpProblem, demand: PceVector, active=None) -> EquivalenceReport:
    """Solve both orderings independently and compare them through ``M``.

    With ``z_s = M z_h`` and ``b_s = M b_h`` the coefficient matrices satisfy
    ``A_s = M A_h M'``; ``transposed_form_residual`` records ``|M' A_h M - A_s|``
    for comparison, which only vanishes when ``M`` is an involution.
    """
    a_h, b_h = galerkin_kkt(q, demand, active)
    a_s, b_s = chance_ordering_kkt(q, demand, active)
    n_dual = 1 + len(active or ())
    m = permutation_matrix(q.n, demand.basis.size, n_dual)
    z_h = solve_linear(a_h, b_h)
    z_s = solve_linear(a_s, b_s)
    return EquivalenceReport(
        solution_residual=float(np.max(np.abs(m @ z_h - z_s))),
        rhs_residual=float(np.max(np.abs(m @ b_h - b_s))),
        matrix_residual=float(np.max(np.abs(m @ a_h @ m.T - a_s))),
        transposed_form_residual=float(np.max(np.abs(m.T @ a_h @ m - a_s))),
        permutation=m, z_policy=z_s, z_hindsight=z_h,
    )


def split_galerkin_solution(z_h: np.ndarray, n: int, size: int, n_dual: int = 1):
    """(alpha of shape (L+1, n), lam of shape (L+1,)) from a hindsight-ordered solution."""
    blocks = z_h.reshape(size, n + n_dual)
    return blocks[:, :n], blocks[:, n]


def random_equivalence_case(seed: int, n_max: int = 5, order_max: int = 2):
    """Random diagonal-H QP, demand expansion and pinned-bound set.

    Used by the equivalence suite; ``seed`` fixes the instance.
    """
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, n_max + 1))
    order = int(rng.integers(1, order_max + 1))
    germ = [st.beta(float(rng.uniform(1.5, 5.0)), float(rng.uniform(1.5, 5.0))),
            st.uniform(-1.0, 1.0), st.gaussian()][int(rng.integers(0, 3))]
    basis = basis_for(germ, order)
    n_bus = int(rng.integers(1, 4))
    coeffs = rng.normal(0.0, 0.3, size=(basis.size, n_bus))
    coeffs[0] -= 1.0
    lower = np.full(n, -np.inf)
    upper = np.full(n, np.inf)
    active = set()
    for i in rng.choice(n, size=int(rng.integers(0, n)), replace=False):
        if rng.random() < 0.5:
            upper[i] = float(rng.uniform(0.0, 1.0))
            active.add((int(i), UPPER))
        else:
            lower[i] = float(rng.uniform(-0.5, 0.0))
            active.add((int(i), LOWER))
    q = QpProblem(rng.uniform(0.1, 2.0, n), rng.uniform(-1.0, 1.0, n), 0.0, lower, upper)
    return q, PceVector(basis, coeffs), frozenset(active)
