"""Network case model and MATPOWER-style case ingestion.

Field mapping from a MATPOWER case file:

* ``mpc.baseMVA``: base power (MVA).
* ``mpc.bus``: column 1 bus id, 2 type (3 = reference), 3 Pd (MW).
* ``mpc.branch``: 1 from bus, 2 to bus, 4 reactance x (p.u.), 6 rateA (MW),
  11 status. Susceptance is 1/x; out-of-service branches are dropped.
* ``mpc.gen``: 1 bus, 8 status, 9 Pmax (MW), 10 Pmin (MW).
* ``mpc.gencost``: model 2 (polynomial) with up to three coefficients,
  highest order first; the cost is ``a P^2 + b P + c`` in $/h with P in MW.

An optional JSON sidecar next to the case (``<case>.json``) may carry
``name``, ``bus_labels`` (id -> label) and ``line_ids`` (one per in-service
branch, in file order).
"""

from __future__ import annotations

import json
import re
from collections import deque
from dataclasses import dataclass, field
from pathlib import Path
from typing import Sequence

import numpy as np

__all__ = [
    "CaseError",
    "CostCurve",
    "Generator",
    "Line",
    "NetworkCase",
    "bundled_case",
    "load_matpower",
    "parse_matpower",
]

DATA_DIR = Path(__file__).with_name("data")


class CaseError(ValueError):
    pass


@dataclass(frozen=True)
class CostCurve:
    """``a P^2 + b P + c`` in $/h, P in MW."""

    a: float = 0.0
    b: float = 0.0
    c: float = 0.0

    def __post_init__(self):
        if self.a < 0:
            raise CaseError(f"cost curve is not convex (a={self.a})")

    def __call__(self, p):
        return self.a * np.square(p) + self.b * p + self.c


@dataclass(frozen=True)
class Line:
    from_bus: int
    to_bus: int
    susceptance: float  # p.u., 1/x; the bus-matrix entry B_ij is -susceptance
    limit: float  # MW at the reference rating
    line_id: str = ""


@dataclass(frozen=True)
class Generator:
    bus: int
    cost: CostCurve
    p_min: float
    p_max: float


@dataclass
class NetworkCase:
    buses: list[int]
    lines: list[Line]
    generators: list[Generator]
    loads: dict[int, float]  # bus id -> MW
    base_mva: float = 100.0
    reference_bus: int | None = None
    name: str = ""
    bus_labels: dict[int, str] = field(default_factory=dict)

    def __post_init__(self):
        if self.reference_bus is None:
            self.reference_bus = self.buses[0]
        self.validate()

    def validate(self):
        ids = set(self.buses)
        if len(ids) != len(self.buses):
            raise CaseError("duplicate bus ids")
        if self.reference_bus not in ids:
            raise CaseError(f"reference bus {self.reference_bus} not in case")
        if self.base_mva <= 0:
            raise CaseError("base MVA must be > 0")
        for k, line in enumerate(self.lines):
            if line.from_bus not in ids or line.to_bus not in ids:
                raise CaseError(f"line {k} references an unknown bus")
            if line.from_bus == line.to_bus:
                raise CaseError(f"line {k} is a self-loop")
            if not line.limit > 0:
                raise CaseError(f"line {k} has nonpositive limit {line.limit}")
            if not line.susceptance > 0:
                raise CaseError(f"line {k} has nonpositive susceptance {line.susceptance}")
        for k, gen in enumerate(self.generators):
            if gen.bus not in ids:
                raise CaseError(f"generator {k} at unknown bus {gen.bus}")
            if gen.p_min > gen.p_max:
                raise CaseError(f"generator {k} has P_min > P_max")
        for bus, mw in self.loads.items():
            if bus not in ids:
                raise CaseError(f"load at unknown bus {bus}")
            if mw < 0:
                raise CaseError(f"negative load at bus {bus}")
        self._check_connected()

    def _check_connected(self):
        adj = {b: [] for b in self.buses}
        for line in self.lines:
            adj[line.from_bus].append(line.to_bus)
            adj[line.to_bus].append(line.from_bus)
        seen = {self.reference_bus}
        queue = deque(seen)
        while queue:
            for nxt in adj[queue.popleft()]:
                if nxt not in seen:
                    seen.add(nxt)
                    queue.append(nxt)
        if len(seen) != len(self.buses):
            missing = sorted(set(self.buses) - seen)
            raise CaseError(f"network is not connected; unreachable buses {missing[:5]}")

    @property
    def n_bus(self) -> int:
        return len(self.buses)

    @property
    def n_line(self) -> int:
        return len(self.lines)

    @property
    def bus_index(self) -> dict[int, int]:
        return {b: i for i, b in enumerate(self.buses)}

    @property
    def base_limits(self) -> np.ndarray:
        return np.array([line.limit for line in self.lines])

    @property
    def line_ids(self) -> list[str]:
        return [line.line_id or str(k + 1) for k, line in enumerate(self.lines)]

    def load_vector(self) -> np.ndarray:
        idx = self.bus_index
        out = np.zeros(self.n_bus)
        for bus, mw in self.loads.items():
            out[idx[bus]] += mw
        return out

    def incidence(self) -> np.ndarray:
        """(lines, buses) with +1 at the from bus and -1 at the to bus."""
        idx = self.bus_index
        C = np.zeros((self.n_line, self.n_bus))
        for k, line in enumerate(self.lines):
            C[k, idx[line.from_bus]] = 1.0
            C[k, idx[line.to_bus]] = -1.0
        return C

    def fingerprint(self) -> dict:
        return {
            "name": self.name,
            "buses": self.buses,
            "lines": [[l.from_bus, l.to_bus, l.susceptance, l.limit] for l in self.lines],
            "generators": [[g.bus, g.cost.a, g.cost.b, g.cost.c, g.p_min, g.p_max] for g in self.generators],
            "loads": sorted(self.loads.items()),
            "base_mva": self.base_mva,
            "reference_bus": self.reference_bus,
        }


_MATRIX_RE = re.compile(r"mpc\.(\w+)\s*=\s*\[(.*?)\]\s*;", re.S)
_SCALAR_RE = re.compile(r"mpc\.(\w+)\s*=\s*([-+0-9.eE]+)\s*;")


def _parse_rows(body: str, name: str) -> np.ndarray:
    rows = []
    for raw in body.split("\n"):
        line = raw.split("%", 1)[0].strip()
        for chunk in line.split(";"):
            chunk = chunk.strip()
            if not chunk:
                continue
            try:
                rows.append([float(tok) for tok in chunk.replace(",", " ").split()])
            except ValueError:
                raise CaseError(f"mpc.{name}: cannot parse row {chunk!r}") from None
    if not rows:
        return np.zeros((0, 0))
    width = max(len(r) for r in rows)
    if any(len(r) != width for r in rows):
        raise CaseError(f"mpc.{name}: ragged rows")
    return np.array(rows)


def parse_matpower(text: str, name: str = "", sidecar: dict | None = None) -> NetworkCase:
    """Build a case from MATPOWER ``.m`` text."""
    stripped = "\n".join(line.split("%", 1)[0] for line in text.splitlines())
    scalars = {k: float(v) for k, v in _SCALAR_RE.findall(stripped)}
    tables = {k: _parse_rows(v, k) for k, v in _MATRIX_RE.findall(stripped)}
    for required in ("bus", "branch", "gen", "gencost"):
        if required not in tables:
            raise CaseError(f"case file lacks mpc.{required}")
    base_mva = scalars.get("baseMVA", 100.0)

    bus = tables["bus"]
    buses = [int(b) for b in bus[:, 0]]
    ref = [int(b) for b, t in zip(bus[:, 0], bus[:, 1]) if int(t) == 3]
    loads = {int(b): float(pd) for b, pd in zip(bus[:, 0], bus[:, 2]) if pd != 0}

    sidecar = sidecar or {}
    branch = tables["branch"]
    in_service = [row for row in branch if branch.shape[1] < 11 or row[10] != 0]
    line_ids = sidecar.get("line_ids") or [str(k + 1) for k in range(len(in_service))]
    if len(line_ids) != len(in_service):
        raise CaseError("sidecar line_ids length does not match in-service branches")
    lines = []
    for k, row in enumerate(in_service):
        x = row[3]
        if x == 0:
            raise CaseError(f"branch {k + 1} has zero reactance")
        if row[5] <= 0:
            raise CaseError(f"branch {k + 1} has no rateA; a DC-OPF needs finite line limits")
        lines.append(Line(int(row[0]), int(row[1]), 1.0 / x, float(row[5]), str(line_ids[k])))

    gen, gencost = tables["gen"], tables["gencost"]
    if len(gencost) < len(gen):
        raise CaseError("mpc.gencost has fewer rows than mpc.gen")
    generators = []
    for k, row in enumerate(gen):
        if gen.shape[1] > 7 and row[7] == 0:
            continue
        cost = gencost[k]
        if int(cost[0]) != 2:
            raise CaseError(f"generator {k + 1}: only polynomial (model 2) costs are supported")
        ncoef = int(cost[3])
        coefs = list(cost[4 : 4 + ncoef])
        if ncoef > 3:
            if any(coefs[: ncoef - 3]):
                raise CaseError(f"generator {k + 1}: cost above second order")
            coefs = coefs[ncoef - 3 :]
        coefs = [0.0] * (3 - len(coefs)) + coefs
        generators.append(Generator(int(row[0]), CostCurve(*coefs), float(row[9]), float(row[8])))

    labels = {int(k): v for k, v in (sidecar.get("bus_labels") or {}).items()}
    return NetworkCase(
        buses=buses,
        lines=lines,
        generators=generators,
        loads=loads,
        base_mva=base_mva,
        reference_bus=ref[0] if ref else buses[0],
        name=sidecar.get("name", name),
        bus_labels=labels,
    )


def load_matpower(path) -> NetworkCase:
    path = Path(path)
    sidecar_path = path.with_suffix(".json")
    sidecar = json.loads(sidecar_path.read_text(encoding="utf-8")) if sidecar_path.exists() else None
    return parse_matpower(path.read_text(encoding="utf-8"), path.stem, sidecar)


def bundled_case(name: str = "case30") -> NetworkCase:
    return load_matpower(DATA_DIR / f"{name}.m")


def two_bus_case(
    slope: float = 10.0, p_max: float = 100.0, load: float = 50.0, limit: float = 100.0, x: float = 0.1
) -> NetworkCase:
    """One linear-cost generator at bus 1 feeding a load at bus 2."""
    return NetworkCase(
        buses=[1, 2],
        lines=[Line(1, 2, 1.0 / x, limit, "1")],
        generators=[Generator(1, CostCurve(0.0, slope, 0.0), 0.0, p_max)],
        loads={2: load},
        base_mva=100.0,
        reference_bus=1,
        name="two-bus",
    )


def scale_limits(case: NetworkCase, factors: Sequence[float] | float) -> NetworkCase:
    factors = np.broadcast_to(np.asarray(factors, dtype=float), (case.n_line,))
    lines = [
        Line(l.from_bus, l.to_bus, l.susceptance, l.limit * f, l.line_id) for l, f in zip(case.lines, factors)
    ]
    return NetworkCase(
        case.buses, lines, case.generators, dict(case.loads), case.base_mva, case.reference_bus, case.name, case.bus_labels
    )
