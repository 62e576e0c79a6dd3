"""Scenario runner and command-line front end.

A scenario fixes one or more networks (cases), the demand law placed on the
load buses, the list of tightening factors and the Monte-Carlo settings.
``run_scenario`` executes every stage and ``emit_figure_data`` writes the
CSV/JSON artefacts.  CSV values carry 6 significant digits, JSON values full
double precision.
"""
from __future__ import annotations

import argparse
import json
import math
import sys
import time
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from . import ccopf, dcopf, hopf, metrics, pce
from . import stochastics as st
from .errors import PriceOfUncertaintyError, StageError

DEFAULT_SAMPLES = 100_000
DEFAULT_SEED = 42
EQUIVALENCE_TOL = 1e-10


@dataclass(frozen=True)
class Scenario:
    name: str
    cases: dict                      # label -> Network
    demand: st.Distribution1D
    deltas: tuple = (2.0, 3.0)
    n_samples: int = DEFAULT_SAMPLES
    seed: int = DEFAULT_SEED
    outputs: str = "out"
    demand_buses: tuple | None = None  # default: every bus without a generator

    def __post_init__(self):
        if not self.cases:
            raise ValueError("scenario needs at least one case")
        if not self.deltas:
            raise ValueError("deltas must be nonempty")
        if any(not d >= 0 for d in self.deltas):
            raise ValueError("deltas must be nonnegative")
        if self.n_samples < 1:
            raise ValueError("n_samples must be at least 1")
        object.__setattr__(self, "deltas", tuple(float(d) for d in self.deltas))

    def network(self, label: str) -> dcopf.Network:
        """The case network with the scenario demand placed on its load buses."""
        net = self.cases[label]
        targets = self.demand_buses
        if targets is None:
            targets = tuple(b.id for b in net.buses if not b.has_generator)
        buses = tuple(replace(b, demand=self.demand) if b.id in targets else b for b in net.buses)
        return replace(net, buses=buses)

    def to_dict(self) -> dict:
        d = {"name": self.name,
             "cases": {k: v.to_dict() for k, v in self.cases.items()},
             "demand": self.demand.to_dict(),
             "deltas": list(self.deltas),
             "n_samples": self.n_samples,
             "seed": self.seed,
             "outputs": self.outputs}
        if self.demand_buses is not None:
            d["demand_buses"] = list(self.demand_buses)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "Scenario":
        if "cases" in d:
            cases = {str(k): dcopf.Network.from_dict(v) for k, v in d["cases"].items()}
        elif "network" in d:
            cases = {"base": dcopf.Network.from_dict(d["network"])}
        else:
            raise ValueError("scenario needs 'cases' or 'network'")
        buses = d.get("demand_buses")
        return cls(
            name=str(d.get("name", "scenario")),
            cases=cases,
            demand=st.Distribution1D.from_dict(d["demand"]),
            deltas=tuple(d.get("deltas", (2.0, 3.0))),
            n_samples=int(d.get("n_samples", DEFAULT_SAMPLES)),
            seed=int(d.get("seed", DEFAULT_SEED)),
            outputs=str(d.get("outputs", "out")),
            demand_buses=None if buses is None else tuple(int(b) for b in buses),
        )

    @classmethod
    def load(cls, path) -> "Scenario":
        try:
            return cls.from_dict(json.loads(Path(path).read_text()))
        except KeyError as exc:
            raise ValueError(f"{path}: missing field {exc}") from exc


def builtin_scenarios() -> dict:
    demand = st.beta(4, 2, -1.5, -0.9)
    return {
        "c1": Scenario("c1", {"h11_0.2": dcopf.case_c1(0.2), "h11_0.3": dcopf.case_c1(0.3)},
                       demand, outputs="out/c1"),
        "c2": Scenario("c2", {"c2": dcopf.case_c2()}, demand, outputs="out/c2"),
    }


def resolve_scenario(ref: str) -> Scenario:
    builtin = builtin_scenarios()
    if ref in builtin:
        return builtin[ref]
    path = Path(ref)
    if not path.exists():
        raise FileNotFoundError(f"no builtin scenario or file named {ref!r}; builtins: {sorted(builtin)}")
    return Scenario.load(path)


@dataclass
class CaseResult:
    label: str
    network: dcopf.Network
    demand_pce: pce.PceVector
    policies: dict = field(default_factory=dict)        # delta -> Policy
    hopf_density: dict = field(default_factory=dict)    # gen id -> MixedDensity1D
    ccopf_density: dict = field(default_factory=dict)   # delta -> {gen id -> MixedDensity1D}
    p_sat: dict = field(default_factory=dict)           # (gen id, delta) -> probability
    violation: dict = field(default_factory=dict)       # (gen id, delta) -> probability
    tvd: dict = field(default_factory=dict)             # (gen id, delta) -> TvdReport
    equivalence_residuals: dict = field(default_factory=dict)
    hopf_empirical: hopf.HopfEmpirical | None = None
    hopf_validation: dict = field(default_factory=dict)  # gen id -> report
    switch_point: float | None = None


@dataclass
class ScenarioResult:
    scenario: Scenario
    cases: dict  # label -> CaseResult
    timings: dict = field(default_factory=dict)


class _Stage:
    def __init__(self, name: str, timings: dict | None = None):
        self.name = name
        self.timings = timings

    def __enter__(self):
        self.t0 = time.perf_counter()
        return self

    def __exit__(self, exc_type, exc, tb):
        if self.timings is not None:
            self.timings[self.name] = self.timings.get(self.name, 0.0) + time.perf_counter() - self.t0
        if exc is not None and not isinstance(exc, StageError):
            raise StageError(self.name, exc) from exc
        return False


def _bounds(net: dcopf.Network) -> dict:
    return {g.id: (g.p_min, g.p_max) for g in net.generators}


def run_case(label: str, net: dcopf.Network, s: Scenario, sample: bool = True,
             timings: dict | None = None) -> CaseResult:
    with _Stage("pce", timings):
        d_total = net.total_demand_distribution()
        demand_pce = pce.pce_of_demand(d_total)
    res = CaseResult(label, net, demand_pce)
    with _Stage("ccopf", timings):
        for delta in s.deltas:
            pol = ccopf.solve_ccopf(net, demand_pce, ccopf.ChanceSpec.from_network(net, delta))
            res.policies[delta] = pol
            res.ccopf_density[delta] = {g: ccopf.policy_density(pol, d_total, g) for g in net.generator_ids}
    with _Stage("hopf_analytic", timings):
        res.hopf_density = hopf.analytic_hopf_density(net)
        try:
            res.switch_point = dcopf.ArgminCaseSplit.from_network(net).switch_point
        except PriceOfUncertaintyError:
            res.switch_point = None
    if sample:
        with _Stage("hopf_sampling", timings):
            emp = hopf.run_hopf(net, s.n_samples, s.seed)
            res.hopf_empirical = emp
            res.hopf_validation = {g: hopf.empirical_vs_analytic_report(emp, res.hopf_density[g], g)
                                   for g in net.generator_ids}
    with _Stage("metrics", timings):
        bounds = _bounds(net)
        for delta, pol in res.policies.items():
            for g in net.generator_ids:
                lo, hi = bounds[g]
                # a single-sided limit is reported; the upper one when both exist
                side, bound = ("upper", hi) if math.isfinite(hi) or not math.isfinite(lo) else ("lower", lo)
                p = ccopf.satisfaction_probability(pol, d_total, g, bound, side)
                res.p_sat[(g, delta)] = p
                res.violation[(g, delta)] = 1.0 - p
                res.tvd[(g, delta)] = metrics.tvd(res.hopf_density[g], res.ccopf_density[delta][g])
    with _Stage("equivalence", timings):
        q = dcopf.nominal_qp(net).without_bounds()
        rep = pce.permutation_equivalence_check(q, pce.pce_of_demands(net.demands, demand_pce.basis))
        res.equivalence_residuals = rep.as_dict()
    return res


def run_scenario(s: Scenario, sample: bool = True) -> ScenarioResult:
    """Every stage for every case; failures surface as StageError."""
    timings = {}
    cases = {}
    for label in s.cases:
        with _Stage("setup", timings):
            net = s.network(label)
        cases[label] = run_case(label, net, s, sample, timings)
    return ScenarioResult(s, cases, timings)


def _json_num(v):
    if v is None:
        return None
    v = float(v)
    if math.isnan(v):
        return None
    if math.isinf(v):
        return "inf" if v > 0 else "-inf"
    return v


def _clean(obj):
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _json_num(obj)
    return obj


def _delta_tag(delta: float) -> str:
    return format(delta, "g").replace(".", "p")


def table_rows(r: ScenarioResult) -> list:
    """One row per (case, delta) in the layout of the constraint-satisfaction table."""
    rows = []
    for label, c in r.cases.items():
        gens = c.network.generator_ids
        bounded = [g for g in gens if any(math.isfinite(b) for b in _bounds(c.network)[g])]
        ref = bounded[0] if bounded else gens[0]
        for delta in r.scenario.deltas:
            row = {"case": label, "delta": delta,
                   "p_sat": c.p_sat[(ref, delta)], "p_violation": c.violation[(ref, delta)]}
            for g in gens:
                row[f"tvd_bus{g}"] = c.tvd[(g, delta)].value
            rows.append(row)
    return rows


def summary(r: ScenarioResult) -> dict:
    s = r.scenario
    cases = {}
    for label, c in r.cases.items():
        gens = c.network.generator_ids
        entry = {
            "network": c.network.to_dict(),
            "switch_point": c.switch_point,
            "demand_pce": c.demand_pce.coeffs.tolist(),
            "basis_id": c.demand_pce.basis.basis_id,
            "policies": {format(d, "g"): {"alpha": p.alpha.tolist(), "kkt": p.kkt}
                         for d, p in c.policies.items()},
            "violation": {f"bus{g}_d{format(d, 'g')}": c.violation[(g, d)] for g in gens for d in s.deltas},
            "tvd": {f"bus{g}_d{format(d, 'g')}": json.loads(c.tvd[(g, d)].to_json())
                    for g in gens for d in s.deltas},
            "equivalence_residuals": c.equivalence_residuals,
            "masses": {"hopf": {f"bus{g}": st.total_mass(c.hopf_density[g]) for g in gens},
                       "ccopf": {f"bus{g}_d{format(d, 'g')}": st.total_mass(c.ccopf_density[d][g])
                                 for g in gens for d in s.deltas}},
        }
        if c.hopf_empirical is not None:
            entry["hopf_validation"] = {f"bus{g}": c.hopf_validation[g] for g in gens}
            entry["hopf_max_violation"] = c.hopf_empirical.max_violation()
        cases[label] = entry
    return _clean({"scenario": s.name, "seed": s.seed, "n_samples": s.n_samples,
                   "deltas": list(s.deltas), "rows": table_rows(r), "cases": cases})


def emit_figure_data(r: ScenarioResult, out=None) -> list:
    """Density CSVs, atom CSVs, hindsight samples and ``summary.json``."""
    out = Path(out if out is not None else r.scenario.outputs)
    files = []
    try:
        out.mkdir(parents=True, exist_ok=True)
        multi = len(r.cases) > 1
        for label, c in r.cases.items():
            d = out / label if multi else out
            d.mkdir(parents=True, exist_ok=True)
            files.append(st.write_density_csv(st.to_mixed(c.network.total_demand_distribution()),
                                              d / "pdf_demand.csv"))
            for g in c.network.generator_ids:
                files.append(st.write_density_csv(c.hopf_density[g], d / f"pdf_hopf_bus{g}.csv"))
                files.append(st.write_atoms_csv(c.hopf_density[g], d / f"atoms_hopf_bus{g}.csv"))
                for delta in r.scenario.deltas:
                    m = c.ccopf_density[delta][g]
                    tag = _delta_tag(delta)
                    files.append(st.write_density_csv(m, d / f"pdf_ccopf_bus{g}_d{tag}.csv"))
                    if m.atoms:
                        files.append(st.write_atoms_csv(m, d / f"atoms_ccopf_bus{g}_d{tag}.csv"))
            if c.hopf_empirical is not None:
                files.append(c.hopf_empirical.to_csv(d / "hopf_samples.csv"))
        path = out / "summary.json"
        path.write_text(json.dumps(summary(r), indent=2, sort_keys=True) + "\n")
        files.append(path)
    except OSError as exc:
        raise StageError("output", OSError(f"{exc.filename or out}: {exc.strerror or exc}")) from exc
    return files


def format_tables(r: ScenarioResult) -> str:
    lines = []
    for label, c in r.cases.items():
        gens = c.network.generator_ids
        lines.append(f"case {label}: policy coefficients (alpha_l,bus)")
        head = "  delta " + " ".join(f"a0,{g:<9d} a1,{g:<9d}" for g in gens)
        lines.append(head)
        for delta, p in c.policies.items():
            vals = " ".join(f"{p.alpha[0, i]:<12.6f} {p.alpha[1, i]:<12.6f}" for i in range(len(gens)))
            lines.append(f"  {delta:<5g} {vals}")
        lines.append("")
    lines.append("constraint satisfaction and total variational distance")
    rows = table_rows(r)
    keys = [k for k in rows[0] if k.startswith("tvd_")]
    lines.append("  case        delta  p_sat     " + " ".join(f"{k:<10s}" for k in keys))
    for row in rows:
        lines.append(f"  {row['case']:<11s} {row['delta']:<6g} {row['p_sat']:<9.4%} "
                     + " ".join(f"{row[k]:<10.4f}" for k in keys))
    return "\n".join(lines)


def equivalence_suite(n_random: int = 20, seed: int = 0) -> dict:
    """Permutation-identity residuals on the builtin cases and random instances."""
    out = {}
    for name, s in builtin_scenarios().items():
        for label in s.cases:
            net = s.network(label)
            basis = pce.basis_for(s.demand)
            q = dcopf.nominal_qp(net).without_bounds()
            out[f"{name}/{label}"] = pce.permutation_equivalence_check(
                q, pce.pce_of_demands(net.demands, basis)).as_dict()
    for k in range(n_random):
        q, d, active = pce.random_equivalence_case(seed + k)
        out[f"random/{seed + k}"] = pce.permutation_equivalence_check(q, d, active).as_dict()
    return out


def _gated(rep: dict) -> float:
    return max(rep["solution_residual"], rep["rhs_residual"], rep["matrix_residual"])


def _apply_overrides(s: Scenario, args) -> Scenario:
    changes = {}
    if args.samples is not None:
        changes["n_samples"] = args.samples
    if args.seed is not None:
        changes["seed"] = args.seed
    if args.out is not None:
        changes["outputs"] = args.out
    if args.delta:
        changes["deltas"] = tuple(args.delta)
    return replace(s, **changes) if changes else s


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="price-of-uncertainty",
                                 description="Chance-constrained versus in-hindsight DC-OPF.")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--samples", type=int, default=None, help="Monte-Carlo sample count")
        p.add_argument("--seed", type=int, default=None, help="sampling seed")
        p.add_argument("--out", default=None, help="output directory")
        p.add_argument("--delta", type=float, action="append", help="tightening factor (repeatable)")

    run = sub.add_parser("run", help="run a scenario and write CSV/JSON outputs")
    run.add_argument("scenario", help="builtin name (c1, c2) or scenario JSON file")
    common(run)
    tab = sub.add_parser("tables", help="print the coefficient and TVD tables")
    tab.add_argument("scenario", nargs="?", default="c2")
    common(tab)
    chk = sub.add_parser("check", help="run the KKT permutation residual suite")
    chk.add_argument("--random", type=int, default=20, help="number of random instances")
    chk.add_argument("--seed", type=int, default=0)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "check":
            res = equivalence_suite(args.random, args.seed)
            worst = max(_gated(r) for r in res.values())
            for name, r in res.items():
                print(f"{name:<16s} solution {r['solution_residual']:.2e}  rhs {r['rhs_residual']:.2e}  "
                      f"matrix {r['matrix_residual']:.2e}  (transposed form {r['transposed_form_residual']:.2e})")
            ok = worst <= EQUIVALENCE_TOL
            print(f"max gated residual {worst:.3e}: {'PASS' if ok else 'FAIL'}")
            return 0 if ok else 1
        try:
            s = _apply_overrides(resolve_scenario(args.scenario), args)
        except (OSError, ValueError, KeyError, TypeError) as exc:
            raise StageError("load", exc) from exc
        if args.command == "tables":
            print(format_tables(run_scenario(s, sample=False)))
            return 0
        r = run_scenario(s)
        files = emit_figure_data(r)
        print(format_tables(r))
        print(f"wrote {len(files)} files to {s.outputs}")
        return 0
    except PriceOfUncertaintyError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
