"""Linear-program model shared by every LP in the toolkit."""
import math
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Tuple

import numpy as np
from scipy.sparse import csr_matrix

from src.core.errors import InstanceError, ShapeMismatch

LE, EQ, GE = "<=", "=", ">="
RELATIONS = (LE, EQ, GE)
MIN, MAX = "min", "max"


@dataclass
class LpModel:
    """An LP built row by row: variables with bounds, constraints with a relation."""
    sense: str = MIN
    name: str = "lp"
    var_names: List[str] = field(default_factory=list)
    costs: List[float] = field(default_factory=list)
    lower: List[float] = field(default_factory=list)
    upper: List[float] = field(default_factory=list)
    rows: List[Dict[int, float]] = field(default_factory=list)
    relations: List[str] = field(default_factory=list)
    rhs: List[float] = field(default_factory=list)
    row_names: List[str] = field(default_factory=list)

    def __post_init__(self):
        if self.sense not in (MIN, MAX):
            raise InstanceError(f"objective sense {self.sense!r} must be 'min' or 'max'")
        self._var_index = {n: j for j, n in enumerate(self.var_names)}
        self._row_index = {n: i for i, n in enumerate(self.row_names)}

    @property
    def n_variables(self):
        return len(self.var_names)

    @property
    def n_constraints(self):
        return len(self.rows)

    def add_variable(self, name, lower=0.0, upper=math.inf, cost=0.0):
        if name in self._var_index:
            raise InstanceError(f"duplicate variable name {name!r}")
        if not math.isfinite(cost) or lower > upper or math.isnan(lower) or math.isnan(upper):
            raise InstanceError(f"variable {name!r}: invalid cost {cost} or bounds [{lower}, {upper}]")
        self._var_index[name] = len(self.var_names)
        self.var_names.append(name)
        self.costs.append(float(cost))
        self.lower.append(float(lower))
        self.upper.append(float(upper))
        return self._var_index[name]

    def add_free_variable(self, name, cost=0.0):
        return self.add_variable(name, lower=-math.inf, upper=math.inf, cost=cost)

    def add_constraint(self, coefficients, relation, rhs, name=None):
        """Adds a row. ``coefficients`` maps variable index or name to coefficient."""
        if relation not in RELATIONS:
            raise InstanceError(f"relation {relation!r} must be one of {RELATIONS}")
        if not math.isfinite(rhs):
            raise InstanceError(f"right-hand side {rhs} must be finite")
        row = {}
        for key, coef in coefficients.items():
            j = self._var_index[key] if isinstance(key, str) else int(key)
            if not 0 <= j < self.n_variables:
                raise ShapeMismatch(f"column {j} outside 0..{self.n_variables - 1}")
            if not math.isfinite(coef):
                raise InstanceError(f"coefficient {coef} for column {j} must be finite")
            if coef != 0.0:
                row[j] = row.get(j, 0.0) + float(coef)
        name = name or f"c{len(self.rows)}"
        if name in self._row_index:
            raise InstanceError(f"duplicate constraint name {name!r}")
        self._row_index[name] = len(self.rows)
        self.rows.append(row)
        self.relations.append(relation)
        self.rhs.append(float(rhs))
        self.row_names.append(name)
        return self._row_index[name]

    def var(self, name):
        return self._var_index[name]

    def row(self, name):
        return self._row_index[name]

    def matrix(self):
        """Constraint matrix as a scipy CSR matrix."""
        data, indices, indptr = [], [], [0]
        for row in self.rows:
            for j in sorted(row):
                indices.append(j)
                data.append(row[j])
            indptr.append(len(indices))
        return csr_matrix((data, indices, indptr), shape=(self.n_constraints, self.n_variables))

    def dense(self):
        return self.matrix().toarray()

    def to_lp_format(self):
        """Renders the model in CPLEX-LP text format."""
        names = [_lp_name(n, f"x{j}") for j, n in enumerate(self.var_names)]
        lines = ["Minimize" if self.sense == MIN else "Maximize"]
        lines.append(" obj: " + (_lp_expr({j: c for j, c in enumerate(self.costs) if c != 0.0}, names) or "0 " + names[0]))
        lines.append("Subject To")
        for i, row in enumerate(self.rows):
            rel = {LE: "<=", EQ: "=", GE: ">="}[self.relations[i]]
            expr = _lp_expr(row, names) or "0 " + names[0]
            lines.append(f" {_lp_name(self.row_names[i], f'c{i}')}: {expr} {rel} {self.rhs[i]!r}")
        lines.append("Bounds")
        for j, name in enumerate(names):
            lo, hi = self.lower[j], self.upper[j]
            if lo == -math.inf and hi == math.inf:
                lines.append(f" {name} free")
            elif lo == hi:
                lines.append(f" {name} = {lo!r}")
            else:
                lo_txt = "-inf" if lo == -math.inf else repr(lo)
                hi_txt = "+inf" if hi == math.inf else repr(hi)
                lines.append(f" {lo_txt} <= {name} <= {hi_txt}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def write_lp(self, path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text(self.to_lp_format())
        return path


def _lp_name(name, fallback):
    cleaned = re.sub(r"[^A-Za-z0-9_]", "_", name)
    return cleaned if cleaned and not cleaned[0].isdigit() else fallback


def _lp_expr(coefficients, names):
    parts = []
    for j in sorted(coefficients):
        c = coefficients[j]
        sign = "-" if c < 0 else "+"
        parts.append(f"{sign} {abs(c)!r} {names[j]}")
    text = " ".join(parts)
    return text[2:] if text.startswith("+ ") else text


@dataclass
class LpSolution:
    status: str
    objective: float
    x: np.ndarray
    duals: np.ndarray
    reduced_costs: np.ndarray
    primal_residual: float
    dual_residual: float
    cs_residual: float
    iterations: int = 0
    var_names: Tuple[str, ...] = ()
    row_names: Tuple[str, ...] = ()
    dual_objective: Optional[float] = None

    def __post_init__(self):
        self._var_index = {n: j for j, n in enumerate(self.var_names)}
        self._row_index = {n: i for i, n in enumerate(self.row_names)}

    @property
    def is_optimal(self):
        return self.status == "optimal"

    def value(self, name):
        return float(self.x[self._var_index[name]])

    def dual(self, name):
        return float(self.duals[self._row_index[name]])

    def values(self, names):
        return np.array([self.value(n) for n in names])
