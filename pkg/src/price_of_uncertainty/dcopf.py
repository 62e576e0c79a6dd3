"""DC-OPF network model, QP assembly and the argmin operator.

Demand is counted negative: a load of 1.1 p.u. is the value -1.1, and the
balance reads ``sum(p_gen) + sum(demand) = 0``.  Reactive power and voltages
do not appear; under DC assumptions they are not degrees of freedom.
"""
from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import stochastics as st
from .errors import UnsupportedTopology
from .linalg_qp import QpProblem, solve_box_qp
from .pce import germ_map, germ_of


@dataclass(frozen=True)
class Bus:
    id: int
    cost_quadratic: float = 0.0
    cost_linear: float = 0.0
    p_min: float = -math.inf
    p_max: float = math.inf
    has_generator: bool = False
    demand: object = 0.0  # float or Distribution1D

    @property
    def uncertain(self) -> bool:
        return isinstance(self.demand, st.Distribution1D) and self.demand.kind != st.DIRAC

    def demand_mean(self) -> float:
        return self.demand.mean() if isinstance(self.demand, st.Distribution1D) else float(self.demand)


@dataclass(frozen=True)
class Network:
    buses: tuple
    # accepted but unused: no flow limits are modelled
    lines: tuple = field(default=())

    def __post_init__(self):
        buses = tuple(self.buses)
        ids = [b.id for b in buses]
        if len(set(ids)) != len(ids):
            raise ValueError("bus ids must be unique")
        gens = [b for b in buses if b.has_generator]
        if not gens:
            raise ValueError("network needs at least one generator")
        for b in gens:
            if not b.cost_quadratic > 0:
                raise ValueError(f"generator at bus {b.id} needs a positive quadratic cost")
            if b.p_min > b.p_max:
                raise ValueError(f"generator at bus {b.id} has p_min > p_max")
        object.__setattr__(self, "buses", buses)

    @property
    def generators(self) -> list:
        return [b for b in self.buses if b.has_generator]

    @property
    def generator_ids(self) -> list:
        return [b.id for b in self.generators]

    @property
    def n_gen(self) -> int:
        return len(self.generators)

    @property
    def demands(self) -> list:
        return [b.demand for b in self.buses]

    def uncertain_buses(self) -> list:
        return [b for b in self.buses if b.uncertain]

    def total_demand_distribution(self) -> st.Distribution1D:
        """Law of the summed demand (one shared germ for all uncertain loads)."""
        fixed = sum(b.demand_mean() for b in self.buses if not b.uncertain)
        unc = self.uncertain_buses()
        if not unc:
            return st.dirac(fixed)
        germ = germ_of(unc[0].demand)
        shift, scale = fixed, 0.0
        for b in unc:
            if germ_of(b.demand) != germ:
                raise UnsupportedTopology("uncertain loads must share one germ distribution")
            s0, s1 = germ_map(b.demand)
            shift += s0
            scale += s1
        return germ.affine(scale, shift)

    def with_generator(self, bus_id: int, **changes) -> "Network":
        buses = tuple(replace(b, **changes) if b.id == bus_id else b for b in self.buses)
        return replace(self, buses=buses)

    def to_dict(self) -> dict:
        def num(x):
            return x if math.isfinite(x) else (None if x != x else ("inf" if x > 0 else "-inf"))
        out = []
        for b in self.buses:
            d = {"id": b.id}
            if b.has_generator:
                d.update(generator={"cost_quadratic": b.cost_quadratic, "cost_linear": b.cost_linear,
                                    "p_min": num(b.p_min), "p_max": num(b.p_max)})
            d["demand"] = b.demand.to_dict() if isinstance(b.demand, st.Distribution1D) else float(b.demand)
            out.append(d)
        return {"buses": out}

    @classmethod
    def from_dict(cls, data: dict) -> "Network":
        def num(x, default):
            if x is None:
                return default
            return float(x)
        buses = []
        for d in data["buses"]:
            gen = d.get("generator")
            dem = d.get("demand", 0.0)
            dem = st.Distribution1D.from_dict(dem) if isinstance(dem, dict) else float(dem)
            if gen:
                buses.append(Bus(int(d["id"]), float(gen["cost_quadratic"]), float(gen.get("cost_linear", 0.0)),
                                 num(gen.get("p_min"), -math.inf), num(gen.get("p_max"), math.inf),
                                 True, dem))
            else:
                buses.append(Bus(int(d["id"]), demand=dem))
        return cls(tuple(buses))


def three_bus(h11: float = 0.2, h22: float = 0.2, h1: float = 0.5, h2: float = 0.6,
              p1_max: float = 1.5, demand=None) -> Network:
    """Two generators (buses 1, 2) and one load (bus 3)."""
    if demand is None:
        demand = st.beta(4, 2, -1.5, -0.9)
    return Network((
        Bus(1, h11, h1, p_max=p1_max, has_generator=True),
        Bus(2, h22, h2, has_generator=True),
        Bus(3, demand=demand),
    ))


def case_c1(h11: float = 0.2, demand=None) -> Network:
    return three_bus(h11=h11, p1_max=1.5, demand=demand)


def case_c2(demand=None) -> Network:
    return three_bus(h11=0.2, p1_max=0.85, demand=demand)


def build_qp(net: Network, demand_realization) -> QpProblem:
    """Deterministic QP for one demand realization (one value per bus)."""
    d = np.asarray(demand_realization, dtype=float)
    if d.shape != (len(net.buses),):
        raise ValueError(f"expected {len(net.buses)} demand values, got shape {d.shape}")
    if not np.all(np.isfinite(d)):
        raise ValueError("demand realization must be finite")
    gens = net.generators
    return QpProblem(
        h_diag=[g.cost_quadratic for g in gens],
        h_lin=[g.cost_linear for g in gens],
        balance_rhs=float(d.sum()),
        lower=[g.p_min for g in gens],
        upper=[g.p_max for g in gens],
    )


def nominal_qp(net: Network) -> QpProblem:
    return build_qp(net, [b.demand_mean() for b in net.buses])


def argmin(net: Network, demand_realization) -> np.ndarray:
    return solve_box_qp(build_qp(net, demand_realization)).primal


@dataclass(frozen=True)
class ArgminCaseSplit:
    beta: float
    gamma: float
    switch_point: float

    @classmethod
    def from_costs(cls, h11, h22, h1, h2, p1_max) -> "ArgminCaseSplit":
        beta = (h1 - h2) / (h11 + h22)
        gamma = h22 / (h11 + h22)
        return cls(beta, gamma, (p1_max + beta) / gamma)

    @classmethod
    def from_network(cls, net: Network) -> "ArgminCaseSplit":
        g1, g2 = two_generators(net)
        return cls.from_costs(g1.cost_quadratic, g2.cost_quadratic, g1.cost_linear, g2.cost_linear, g1.p_max)


def two_generators(net: Network):
    """The two generators, the (only) upper-bounded one first."""
    gens = net.generators
    if len(gens) != 2:
        raise UnsupportedTopology(f"closed-form argmin needs exactly 2 generators, got {len(gens)}")
    if any(math.isfinite(g.p_min) for g in gens):
        raise UnsupportedTopology("closed-form argmin supports upper generation limits only")
    bounded = [g for g in gens if math.isfinite(g.p_max)]
    if len(bounded) > 1:
        raise UnsupportedTopology("closed-form argmin supports a limit on one generator only")
    if bounded and bounded[0] is gens[1]:
        return gens[1], gens[0]
    return gens[0], gens[1]


def closed_form_argmin(cs: ArgminCaseSplit, p1_max: float, demand: float) -> np.ndarray:
    """Two-branch argmin; generator 1 saturates once -demand reaches the switch point."""
    if -demand >= cs.switch_point:
        return np.array([p1_max, -(demand + p1_max)])
    return np.array([-cs.beta - cs.gamma * demand, cs.beta - (1.0 - cs.gamma) * demand])
