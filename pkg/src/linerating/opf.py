"""Hourly DC optimal power flow with value-of-lost-load shedding.

Per hour the LP is, in per unit on the case base:

    min  sum_g [C_g(Pmin_g) + sum_k slope_gk s_gk] + VOLL * sum_i shed_i
    s.t. f_l - b_l (theta_from - theta_to) = 0                  (flow definition)
         sum_{g@i} (Pmin_g + sum_k s_gk) + shed_i
             - sum_{l from i} f_l + sum_{l to i} f_l = d_i     (nodal balance)
         0 <= s_gk <= width_k,  0 <= shed_i <= d_i,
         -pi <= theta_i <= pi,  theta_ref = 0,  |f_l| <= limit_l

``b_l = 1/x_l`` is the line susceptance; the bus susceptance matrix entry is
``B_ij = -b_l``, so the flow convention is ``f = -B_ij (theta_i - theta_j)``,
positive from the line's from bus to its to bus. Quadratic costs enter as
convex piecewise-linear secants, which an LP fills cheapest-first.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .lp import ITERATION_LIMIT, OPTIMAL, UNBOUNDED, StandardLP, solve_standard
from .network import CostCurve, NetworkCase

__all__ = [
    "DEFAULT_SEGMENTS",
    "DEFAULT_VOLL",
    "DayProblem",
    "DayResult",
    "DispatchError",
    "DispatchModel",
    "HourlyDispatch",
    "PiecewiseCost",
    "linearize_cost",
    "solve_day",
    "solve_hour",
]

DEFAULT_VOLL = 9000.0  # $/MWh
DEFAULT_SEGMENTS = 10


class DispatchError(RuntimeError):
    pass


@dataclass(frozen=True)
class PiecewiseCost:
    breakpoints: np.ndarray  # MW, K + 1 values
    slopes: np.ndarray  # $/MWh, K values
    base_cost: float  # $/h at the first breakpoint

    @property
    def widths(self) -> np.ndarray:
        return np.diff(self.breakpoints)

    def __call__(self, p) -> np.ndarray:
        p = np.asarray(p, dtype=float)
        filled = np.clip(p[..., None] - self.breakpoints[:-1], 0.0, self.widths)
        return self.base_cost + filled @ self.slopes


def linearize_cost(curve: CostCurve, p_min: float, p_max: float, segments: int = DEFAULT_SEGMENTS) -> PiecewiseCost:
    """Secant approximation on ``segments`` equal pieces of ``[p_min, p_max]``.

    Exact at every breakpoint; above the curve in between by at most
    ``a * width**2 / 4``.
    """
    if segments < 1:
        raise ValueError("need at least one segment")
    if curve.a < 0:
        raise ValueError(f"cost curve is not convex (a={curve.a})")
    if p_min > p_max:
        raise ValueError("p_min exceeds p_max")
    points = np.linspace(p_min, p_max, segments + 1)
    values = curve(points)
    widths = np.diff(points)
    with np.errstate(invalid="ignore", divide="ignore"):
        slopes = np.where(widths > 0, np.diff(values) / np.where(widths > 0, widths, 1.0), curve.b + 2 * curve.a * p_min)
    if np.any(np.diff(slopes) < -1e-9 * (1 + np.abs(slopes[:-1]))):
        raise ValueError("linearized slopes are not nondecreasing")
    return PiecewiseCost(points, slopes, float(values[0]))


@dataclass(frozen=True)
class HourlyDispatch:
    generation: np.ndarray  # MW per generator
    angles: np.ndarray  # rad per bus
    flows: np.ndarray  # MW per line
    shed: np.ndarray  # MW per bus
    cost: float  # $
    demand: np.ndarray  # MW per bus
    limits: np.ndarray  # MW per line
    iterations: int = 0

    @property
    def shed_total(self) -> float:
        return float(self.shed.sum())


class DispatchModel:
    """LP structure of one case; each hour only swaps the right-hand side and bounds."""

    def __init__(self, case: NetworkCase, voll: float = DEFAULT_VOLL, segments: int = DEFAULT_SEGMENTS):
        if voll <= 0 or not math.isfinite(voll):
            raise ValueError("VOLL must be positive and finite")
        self.case = case
        self.voll = voll
        self.segments = segments
        base = case.base_mva
        self.base = base
        M, L, G = case.n_bus, case.n_line, len(case.generators)
        self.M, self.L, self.G = M, L, G
        idx = case.bus_index

        self.pwl = [linearize_cost(g.cost, g.p_min, g.p_max, segments) for g in case.generators]
        self.p_min = np.array([g.p_min for g in case.generators])
        self.fixed_cost = float(sum(p.base_cost for p in self.pwl))
        K = segments
        n_seg = G * K
        self.sl_seg = slice(0, n_seg)
        self.sl_shed = slice(n_seg, n_seg + M)
        self.sl_theta = slice(n_seg + M, n_seg + 2 * M)
        self.sl_flow = slice(n_seg + 2 * M, n_seg + 2 * M + L)
        n = n_seg + 2 * M + L
        self.n = n

        A = np.zeros((L + M, n))
        incidence = case.incidence()
        susceptance = np.array([l.susceptance for l in case.lines])
        self.susceptance = susceptance
        self.incidence = incidence
        # flow definition rows
        A[:L, self.sl_flow] = np.eye(L)
        A[:L, self.sl_theta] = -susceptance[:, None] * incidence
        # nodal balance rows
        self.gen_bus = np.array([idx[g.bus] for g in case.generators], dtype=int)
        for g in range(G):
            A[L + self.gen_bus[g], g * K : (g + 1) * K] = 1.0
        A[L:, self.sl_shed] = np.eye(M)
        A[L:, self.sl_flow] = -incidence.T
        self.A = A

        c = np.zeros(n)
        c[self.sl_seg] = np.concatenate([p.slopes for p in self.pwl]) * base if G else []
        c[self.sl_shed] = voll * base
        self.c = c

        lo = np.zeros(n)
        hi = np.zeros(n)
        lo[self.sl_seg] = 0.0
        hi[self.sl_seg] = np.concatenate([p.widths for p in self.pwl]) / base if G else []
        lo[self.sl_theta] = -math.pi
        hi[self.sl_theta] = math.pi
        ref = idx[case.reference_bus]
        lo[self.sl_theta.start + ref] = 0.0
        hi[self.sl_theta.start + ref] = 0.0
        self.lo_template, self.hi_template = lo, hi

        self.pmin_injection = np.bincount(self.gen_bus, weights=self.p_min, minlength=M) if G else np.zeros(M)
        # crash basis: flows for flow rows, shed for balance rows
        self.crash_basis = np.concatenate(
            [np.arange(self.sl_flow.start, self.sl_flow.stop), np.arange(self.sl_shed.start, self.sl_shed.stop)]
        )

    def _lp(self, demand: np.ndarray, limits: np.ndarray) -> StandardLP:
        lo, hi = self.lo_template.copy(), self.hi_template.copy()
        hi[self.sl_shed] = demand / self.base
        lo[self.sl_flow] = -limits / self.base
        hi[self.sl_flow] = limits / self.base
        b = np.concatenate([np.zeros(self.L), (demand - self.pmin_injection) / self.base])
        return StandardLP(self.c, self.A, b, lo, hi)

    def solve(self, demand, limits, basis=None) -> tuple[HourlyDispatch, np.ndarray]:
        demand = np.asarray(demand, dtype=float)
        limits = np.asarray(limits, dtype=float)
        if demand.shape != (self.M,) or limits.shape != (self.L,):
            raise DispatchError(f"expected {self.M} demands and {self.L} limits")
        if np.any(demand < 0):
            raise DispatchError("demand must be nonnegative")
        if np.any(limits < 0):
            raise DispatchError("line limits must be nonnegative")
        lp = self._lp(demand, limits)
        x0 = np.clip(np.zeros(self.n), lp.lo, lp.hi)
        result = solve_standard(lp, basis=self.crash_basis if basis is None else basis, x0=x0, method="dual")
        if result.status != OPTIMAL and basis is not None:
            result = solve_standard(lp, basis=self.crash_basis, x0=x0, method="dual")
        if result.status == UNBOUNDED:
            raise DispatchError("dispatch LP is unbounded; the case data is corrupt")
        if result.status == ITERATION_LIMIT:
            raise DispatchError(f"dispatch LP hit the iteration limit: {result.message}")
        if result.status != OPTIMAL:
            # shed variables make every hour feasible
            raise DispatchError(f"dispatch LP reported {result.status}; shedding should prevent this")
        return self._unpack(result.x, result.objective, demand, limits, result.iterations), result.basis

    def _unpack(self, x, objective, demand, limits, iterations) -> HourlyDispatch:
        base = self.base
        seg = x[self.sl_seg].reshape(self.G, self.segments) if self.G else np.zeros((0, self.segments))
        generation = self.p_min + seg.sum(axis=1) * base
        shed = x[self.sl_shed] * base
        angles = x[self.sl_theta].copy()
        flows = x[self.sl_flow] * base
        cost = self.fixed_cost + objective
        return HourlyDispatch(generation, angles, flows, shed, cost, demand, limits, iterations)

    # checks -------------------------------------------------------------

    def balance_residual(self, dispatch: HourlyDispatch) -> float:
        """Largest nodal mismatch, in per unit, using flows recomputed from angles."""
        flows = self.susceptance * (self.incidence @ dispatch.angles)
        injection = np.bincount(self.gen_bus, weights=dispatch.generation, minlength=self.M) if self.G else np.zeros(self.M)
        net = injection / self.base + dispatch.shed / self.base - dispatch.demand / self.base
        return float(np.max(np.abs(net - self.incidence.T @ flows), initial=0.0))

    def flow_residual(self, dispatch: HourlyDispatch) -> float:
        """Largest gap between reported flows and b_ij (theta_i - theta_j), in MW."""
        recomputed = self.susceptance * (self.incidence @ dispatch.angles) * self.base
        return float(np.max(np.abs(dispatch.flows - recomputed), initial=0.0))


def solve_hour(
    case: NetworkCase,
    demand: Sequence[float],
    limits: Sequence[float],
    voll: float = DEFAULT_VOLL,
    segments: int = DEFAULT_SEGMENTS,
) -> HourlyDispatch:
    dispatch, _ = DispatchModel(case, voll, segments).solve(demand, limits)
    return dispatch


@dataclass(frozen=True)
class DayProblem:
    demand: np.ndarray  # (24, buses) MW
    limits: np.ndarray  # (24, lines) MW

    def __post_init__(self):
        object.__setattr__(self, "demand", np.asarray(self.demand, dtype=float))
        object.__setattr__(self, "limits", np.asarray(self.limits, dtype=float))
        if self.demand.shape[0] != 24 or self.limits.shape[0] != 24:
            raise ValueError("a day problem has 24 hours of demand and limits")


@dataclass(frozen=True)
class DayResult:
    """Stacked hourly dispatch for one day; row t is hour t."""

    generation: np.ndarray
    angles: np.ndarray
    flows: np.ndarray
    shed: np.ndarray
    costs: np.ndarray
    demand: np.ndarray
    limits: np.ndarray

    @property
    def cost(self) -> float:
        return float(self.costs.sum())

    def hour(self, t: int) -> HourlyDispatch:
        return HourlyDispatch(
            self.generation[t], self.angles[t], self.flows[t], self.shed[t],
            float(self.costs[t]), self.demand[t], self.limits[t],
        )

    @property
    def hours(self) -> list[HourlyDispatch]:
        return [self.hour(t) for t in range(len(self.costs))]


def solve_day(model: DispatchModel, problem: DayProblem) -> DayResult:
    """Solve the 24 uncoupled hours in order, warm-starting each from the last."""
    basis = None
    hours = []
    for t in range(problem.demand.shape[0]):
        try:
            dispatch, basis = model.solve(problem.demand[t], problem.limits[t], basis)
        except DispatchError as exc:
            raise DispatchError(f"hour {t}: {exc}") from exc
        hours.append(dispatch)
    return DayResult(
        np.array([h.generation for h in hours]),
        np.array([h.angles for h in hours]),
        np.array([h.flows for h in hours]),
        np.array([h.shed for h in hours]),
        np.array([h.cost for h in hours]),
        problem.demand.copy(),
        problem.limits.copy(),
    )
