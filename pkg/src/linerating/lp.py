"""Dense bounded-variable revised simplex.

Problems are brought to ``min c.x  s.t.  A x = b,  lo <= x <= hi`` (inequality
rows get a nonnegative slack). One artificial column per row is appended so
that a starting basis always exists:

* ``primal``: two-phase primal simplex; any bounds, including infinite ones.
* ``dual``: dual simplex for problems whose variables are all boxed. Every
  basis is dual feasible after placing nonbasics at the bound that matches
  their reduced cost, so the method can restart from any nonsingular basis.
  This is what makes warm starts cheap when only ``b`` and the bounds change.

Both paths switch to Bland's smallest-index rule after a run of degenerate
pivots and fall back to Dantzig pricing once progress resumes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = ["LPError", "LPResult", "StandardLP", "lp_solve", "solve_standard"]

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"
ITERATION_LIMIT = "iteration_limit"

FEAS_TOL = 1e-9
OPT_TOL = 1e-9
PIVOT_TOL = 1e-9
REFACTOR_EVERY = 40
DEGENERATE_RUN = 30


class LPError(RuntimeError):
    """Solver failure carrying the partial result for diagnostics."""

    def __init__(self, message: str, result: "LPResult | None" = None):
        super().__init__(message)
        self.result = result


class _DualInfeasible(Exception):
    pass


@dataclass
class LPResult:
    status: str
    x: np.ndarray | None
    objective: float
    iterations: int
    basis: np.ndarray | None = None
    message: str = ""

    @property
    def success(self) -> bool:
        return self.status == OPTIMAL


@dataclass
class StandardLP:
    """``min c.x, A x = b, lo <= x <= hi`` with dense ``A``."""

    c: np.ndarray
    A: np.ndarray
    b: np.ndarray
    lo: np.ndarray
    hi: np.ndarray

    def __post_init__(self):
        self.c = np.asarray(self.c, dtype=float)
        self.A = np.atleast_2d(np.asarray(self.A, dtype=float))
        self.b = np.asarray(self.b, dtype=float)
        self.lo = np.asarray(self.lo, dtype=float)
        self.hi = np.asarray(self.hi, dtype=float)
        m, n = self.A.shape
        if self.c.shape != (n,) or self.lo.shape != (n,) or self.hi.shape != (n,) or self.b.shape != (m,):
            raise ValueError("inconsistent LP dimensions")
        if np.any(self.lo > self.hi):
            bad = int(np.flatnonzero(self.lo > self.hi)[0])
            raise ValueError(f"variable {bad} has lower bound above upper bound")

    @property
    def boxed(self) -> bool:
        return bool(np.all(np.isfinite(self.lo)) and np.all(np.isfinite(self.hi)))


class _Simplex:
    def __init__(self, lp: StandardLP, max_iter: int | None):
        m, n = lp.A.shape
        self.m, self.n = m, n
        self.lp = lp
        self.A = np.hstack([lp.A, np.eye(m)])
        self.lo = np.concatenate([lp.lo, np.zeros(m)])
        self.hi = np.concatenate([lp.hi, np.zeros(m)])
        self.c = np.concatenate([lp.c, np.zeros(m)])
        self.b = lp.b
        self.x = np.zeros(n + m)
        self.basic = np.zeros(n + m, dtype=bool)
        self.head = np.arange(n, n + m)
        self.iterations = 0
        self.max_iter = max_iter if max_iter is not None else 50 * (m + n) + 1000
        self.Binv = np.eye(m)
        self._since_refactor = 0

    # basis bookkeeping -------------------------------------------------

    def set_basis(self, head) -> bool:
        head = np.asarray(head, dtype=int)
        if head.shape != (self.m,) or len(set(head.tolist())) != self.m:
            return False
        if head.min(initial=0) < 0 or head.max(initial=0) >= self.n + self.m:
            return False
        B = self.A[:, head]
        try:
            Binv = np.linalg.inv(B)
        except np.linalg.LinAlgError:
            return False
        if not np.all(np.isfinite(Binv)) or np.linalg.cond(B) > 1e12:
            return False
        self.head = head.copy()
        self.basic[:] = False
        self.basic[self.head] = True
        self.Binv = Binv
        self._since_refactor = 0
        return True

    def refactor(self):
        self.Binv = np.linalg.inv(self.A[:, self.head])
        self._since_refactor = 0

    def pivot(self, r: int, q: int, u: np.ndarray):
        p = self.head[r]
        self.basic[p] = False
        self.basic[q] = True
        self.head[r] = q
        self._since_refactor += 1
        if self._since_refactor >= REFACTOR_EVERY:
            self.refactor()
            return
        row = self.Binv[r] / u[r]
        self.Binv -= np.outer(u, row)
        self.Binv[r] = row

    def basic_values(self) -> np.ndarray:
        nb = ~self.basic
        rhs = self.b - self.A[:, nb] @ self.x[nb]
        return self.Binv @ rhs

    def reduced_costs(self, c: np.ndarray) -> np.ndarray:
        y = c[self.head] @ self.Binv
        d = c - y @ self.A
        d[self.head] = 0.0
        return d

    def _feas_scale(self, values: np.ndarray) -> np.ndarray:
        return FEAS_TOL * (1.0 + np.abs(values))

    # dual simplex ------------------------------------------------------

    def place_nonbasics(self, d: np.ndarray):
        nb = ~self.basic
        fixed = self.lo == self.hi
        self.x[nb & fixed] = self.lo[nb & fixed]
        to_lo = nb & ~fixed & (d > OPT_TOL)
        to_hi = nb & ~fixed & (d < -OPT_TOL)
        if np.any(~np.isfinite(self.lo[to_lo])) or np.any(~np.isfinite(self.hi[to_hi])):
            raise _DualInfeasible
        self.x[to_lo] = self.lo[to_lo]
        self.x[to_hi] = self.hi[to_hi]
        rest = nb & ~fixed & ~to_lo & ~to_hi
        self.x[rest] = np.clip(self.x[rest], self.lo[rest], self.hi[rest])

    def dual(self) -> str:
        degenerate = 0
        bland = False
        while True:
            d = self.reduced_costs(self.c)
            self.place_nonbasics(d)
            xb = self.basic_values()
            lo_b, hi_b = self.lo[self.head], self.hi[self.head]
            below = lo_b - xb
            above = xb - hi_b
            viol = np.maximum(below, above)
            infeasible = viol > self._feas_scale(np.where(below > above, lo_b, hi_b))
            if not infeasible.any():
                self.x[self.head] = xb
                return OPTIMAL
            if self.iterations >= self.max_iter:
                self.x[self.head] = xb
                return ITERATION_LIMIT
            self.iterations += 1

            if bland:
                cand = np.flatnonzero(infeasible)
                r = int(cand[np.argmin(self.head[cand])])
            else:
                r = int(np.argmax(np.where(infeasible, viol, -np.inf)))
            to_lower = below[r] > above[r]
            s = 1.0 if to_lower else -1.0
            target = lo_b[r] if to_lower else hi_b[r]

            alpha = self.Binv[r] @ self.A
            nb = ~self.basic & (self.lo < self.hi)
            at_lo = self.x <= self.lo
            at_hi = self.x >= self.hi
            sa = s * alpha
            eligible = nb & (
                (at_lo & ~at_hi & (sa < -PIVOT_TOL))
                | (at_hi & ~at_lo & (sa > PIVOT_TOL))
                | (~at_lo & ~at_hi & (np.abs(alpha) > PIVOT_TOL))
            )
            if not eligible.any():
                self.x[self.head] = xb
                return INFEASIBLE
            idx = np.flatnonzero(eligible)
            ratios = np.abs(d[idx]) / np.abs(alpha[idx])
            best = ratios.min()
            ties = idx[ratios <= best + OPT_TOL]
            if bland:
                q = int(ties.min())
            else:
                q = int(ties[np.argmax(np.abs(alpha[ties]))])

            degenerate = degenerate + 1 if best <= OPT_TOL else 0
            if degenerate > DEGENERATE_RUN:
                bland = True
            elif degenerate == 0:
                bland = False

            p = self.head[r]
            u = self.Binv @ self.A[:, q]
            step = (xb[r] - target) / alpha[q]
            self.x[q] += step
            self.x[p] = target
            self.pivot(r, q, u)

    # primal simplex ----------------------------------------------------

    def primal(self, c: np.ndarray) -> str:
        degenerate = 0
        bland = False
        while True:
            xb = self.basic_values()
            self.x[self.head] = xb
            d = self.reduced_costs(c)
            nb = ~self.basic & (self.lo < self.hi)
            room_up = self.hi - self.x
            room_dn = self.x - self.lo
            inc = nb & (d < -OPT_TOL) & (room_up > FEAS_TOL)
            dec = nb & (d > OPT_TOL) & (room_dn > FEAS_TOL)
            cand = inc | dec
            if not cand.any():
                return OPTIMAL
            if self.iterations >= self.max_iter:
                return ITERATION_LIMIT
            self.iterations += 1

            if bland:
                q = int(np.flatnonzero(cand)[0])
            else:
                q = int(np.argmax(np.where(cand, np.abs(d), -np.inf)))
            direction = 1.0 if inc[q] else -1.0

            u = self.Binv @ self.A[:, q]
            rate = -direction * u  # d(x_B)/dt
            lo_b, hi_b = self.lo[self.head], self.hi[self.head]
            with np.errstate(divide="ignore", invalid="ignore"):
                t_dn = np.where(rate < -PIVOT_TOL, (xb - lo_b) / -rate, np.inf)
                t_up = np.where(rate > PIVOT_TOL, (hi_b - xb) / rate, np.inf)
            t_rows = np.maximum(np.minimum(t_dn, t_up), 0.0)
            t_flip = self.hi[q] - self.lo[q]
            t_best = min(t_rows.min(initial=np.inf), t_flip)
            if not np.isfinite(t_best):
                return UNBOUNDED

            degenerate = degenerate + 1 if t_best <= FEAS_TOL else 0
            if degenerate > DEGENERATE_RUN:
                bland = True
            elif degenerate == 0:
                bland = False

            if t_flip <= t_rows.min(initial=np.inf):
                self.x[q] = self.hi[q] if direction > 0 else self.lo[q]
                continue
            ties = np.flatnonzero(t_rows <= t_best + FEAS_TOL)
            if bland:
                r = int(ties[np.argmin(self.head[ties])])
            else:
                r = int(ties[np.argmax(np.abs(u[ties]))])
            p = self.head[r]
            leaving_to = lo_b[r] if rate[r] < 0 else hi_b[r]
            self.x[q] += direction * t_rows[r]
            self.x[p] = leaving_to
            self.pivot(r, q, u)

    def start_from_artificials(self, signed: bool):
        n, m = self.n, self.m
        orig = slice(0, n)
        lo, hi = self.lo[orig], self.hi[orig]
        self.x[orig] = np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))
        residual = self.b - self.lp.A @ self.x[orig]
        signs = np.where(residual < 0, -1.0, 1.0) if signed else np.ones(m)
        self.A[:, n:] = np.diag(signs)
        self.x[n:] = np.abs(residual) if signed else residual
        self.head = np.arange(n, n + m)
        self.basic[:] = False
        self.basic[self.head] = True
        self.Binv = np.diag(signs)
        self._since_refactor = 0


def solve_standard(
    lp: StandardLP,
    basis=None,
    x0=None,
    method: str = "auto",
    max_iter: int | None = None,
) -> LPResult:
    """Solve a standard-form LP.

    ``basis`` (m column indices into ``[A | I]``, artificials last) and ``x0``
    (starting values for nonbasic columns) allow warm starts; they are used
    by the dual method only. The returned basis can be fed back in.
    """
    if method == "auto":
        method = "dual" if lp.boxed else "primal"
    if method not in ("dual", "primal"):
        raise ValueError(f"unknown method {method!r}")
    if method == "dual" and not lp.boxed:
        raise ValueError("the dual method needs finite bounds on every variable")

    s = _Simplex(lp, max_iter)
    n = s.n
    if method == "dual":
        if x0 is not None:
            s.x[:n] = np.clip(np.asarray(x0, dtype=float), lp.lo, lp.hi)
        else:
            s.x[:n] = lp.lo
        if basis is None or not s.set_basis(basis):
            s.head = np.arange(n, n + s.m)
            s.basic[:] = False
            s.basic[s.head] = True
            s.Binv = np.eye(s.m)
        status = s.dual()
    else:
        s.start_from_artificials(signed=True)
        phase1_c = np.concatenate([np.zeros(n), np.ones(s.m)])
        s.hi[n:] = np.inf
        status = s.primal(phase1_c)
        if status == OPTIMAL:
            if phase1_c @ s.x > FEAS_TOL * (1.0 + np.abs(lp.b).sum()):
                status = INFEASIBLE
            else:
                s.hi[n:] = 0.0
                s.x[n:] = np.clip(s.x[n:], 0.0, 0.0)
                status = s.primal(s.c)

    x = s.x[:n].copy()
    objective = float(lp.c @ x)
    messages = {
        OPTIMAL: "optimal",
        INFEASIBLE: "no feasible point",
        UNBOUNDED: "objective unbounded below",
        ITERATION_LIMIT: f"stopped after {s.iterations} iterations (m={s.m}, n={n})",
    }
    return LPResult(
        status=status,
        x=x if status != INFEASIBLE else None,
        objective=objective if status == OPTIMAL else float("nan"),
        iterations=s.iterations,
        basis=s.head.copy(),
        message=messages[status],
    )


def lp_solve(
    c,
    A_ub=None,
    b_ub=None,
    A_eq=None,
    b_eq=None,
    bounds=None,
    method: str = "auto",
    max_iter: int | None = None,
) -> LPResult:
    """``min c.x`` subject to ``A_ub x <= b_ub``, ``A_eq x = b_eq`` and bounds.

    ``bounds`` is a ``(lo, hi)`` pair applied to every variable or a list of
    pairs; None means unbounded on that side. The default is ``x >= 0``.
    """
    c = np.asarray(c, dtype=float)
    n = c.size
    if bounds is None:
        bounds = (0.0, None)
    if len(bounds) == 2 and not isinstance(bounds[0], (tuple, list)):
        bounds = [bounds] * n
    if len(bounds) != n:
        raise ValueError("one bound pair per variable is required")
    lo = np.array([-np.inf if b[0] is None else b[0] for b in bounds], dtype=float)
    hi = np.array([np.inf if b[1] is None else b[1] for b in bounds], dtype=float)

    A_ub = np.zeros((0, n)) if A_ub is None else np.atleast_2d(np.asarray(A_ub, dtype=float))
    b_ub = np.zeros(0) if b_ub is None else np.asarray(b_ub, dtype=float)
    A_eq = np.zeros((0, n)) if A_eq is None else np.atleast_2d(np.asarray(A_eq, dtype=float))
    b_eq = np.zeros(0) if b_eq is None else np.asarray(b_eq, dtype=float)
    k = A_ub.shape[0]

    A = np.block([[A_ub, np.eye(k)], [A_eq, np.zeros((A_eq.shape[0], k))]])
    if A.shape[0] == 0:
        # no rows: each variable sits at its cheaper bound
        x = np.where(c > 0, lo, np.where(c < 0, hi, np.where(np.isfinite(lo), lo, np.where(np.isfinite(hi), hi, 0.0))))
        if not np.all(np.isfinite(x)):
            return LPResult(UNBOUNDED, x, float("nan"), 0, None, "objective unbounded below")
        return LPResult(OPTIMAL, x, float(c @ x), 0, None, "optimal")
    # slack upper bound: a finite box keeps boxed problems boxed
    slack_hi = np.full(k, np.inf)
    if np.all(np.isfinite(lo)) and np.all(np.isfinite(hi)) and k:
        reach = np.where(A_ub > 0, A_ub * lo, A_ub * hi).sum(axis=1)
        slack_hi = np.maximum(b_ub - reach, 0.0)
    lp = StandardLP(
        np.concatenate([c, np.zeros(k)]),
        A,
        np.concatenate([b_ub, b_eq]),
        np.concatenate([lo, np.zeros(k)]),
        np.concatenate([hi, slack_hi]),
    )
    result = solve_standard(lp, method=method, max_iter=max_iter)
    if result.x is not None:
        result.x = result.x[:n]
    return result
