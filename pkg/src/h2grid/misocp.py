"""Solver-agnostic problem representation and a branch-and-bound MISOCP solver.

A model is assembled from :class:`Block` objects (named variables, linear rows,
second-order cones and objective terms) into an immutable :class:`ProblemIR`.
Continuous relaxations are solved with Clarabel, an interior-point conic solver;
:func:`solve` wraps them in a deterministic best-bound branch-and-bound.

Cone conventions
----------------
``soc``  : args = (r, v1, ..., vk)    meaning ||v|| <= r
``rsoc`` : args = (s, t, v1, ..., vk) meaning ||v||^2 <= s*t, s >= 0, t >= 0

Row duals are reported as sensitivities d(objective)/d(rhs).
"""
from __future__ import annotations

import heapq
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

import clarabel
import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)

INF = math.inf
INT_TOL = 1e-6
FREE_TOL = 1e-4  # normalised row violation still treated as satisfied when judging binaries

Terms = dict  # variable name -> coefficient


class ModelError(ValueError):
    """Raised for malformed models (namespace collisions, undeclared variables)."""


@dataclass(frozen=True)
class Var:
    name: str
    kind: str = "C"  # "C" continuous, "B" binary
    lb: float = -INF
    ub: float = INF


@dataclass(frozen=True)
class Row:
    name: str
    terms: tuple[tuple[str, float], ...]
    sense: str  # "<=", "==", ">="
    rhs: float
    tag: str = ""


@dataclass(frozen=True)
class Affine:
    terms: tuple[tuple[str, float], ...] = ()
    const: float = 0.0

    def value(self, x: Mapping[str, float]) -> float:
        return self.const + sum(c * x[v] for v, c in self.terms)


@dataclass(frozen=True)
class Cone:
    name: str
    kind: str  # "soc" | "rsoc"
    args: tuple[Affine, ...]
    tag: str = ""

    def residual(self, x: Mapping[str, float]) -> float:
        """Positive when the point lies inside the cone; negative is a violation."""
        vals = [a.value(x) for a in self.args]
        if self.kind == "soc":
            return vals[0] - math.sqrt(sum(v * v for v in vals[1:]))
        s, t = vals[0], vals[1]
        return min(s * t - sum(v * v for v in vals[2:]), s, t)


def aff(terms: Mapping[str, float] | Iterable[tuple[str, float]] = (), const: float = 0.0) -> Affine:
    items = terms.items() if isinstance(terms, Mapping) else terms
    return Affine(tuple((v, float(c)) for v, c in items if c != 0.0), float(const))


class Block:
    """Mutable builder for one namespace of variables and constraints.

    ``external`` lists variables the block references but another block declares.
    """

    def __init__(self, name: str):
        self.name = name
        self.variables: dict[str, Var] = {}
        self.rows: list[Row] = []
        self.cones: list[Cone] = []
        self.objective: dict[str, float] = {}
        self.objective_const = 0.0

    def var(self, name: str, lb: float = -INF, ub: float = INF, kind: str = "C") -> str:
        if name in self.variables:
            raise ModelError(f"variable {name!r} declared twice in block {self.name!r}")
        if kind == "B":
            lb, ub = max(0.0, lb), min(1.0, ub)
        self.variables[name] = Var(name, kind, float(lb), float(ub))
        return name

    def fix(self, name: str, value: float) -> None:
        v = self.variables[name]
        self.variables[name] = Var(name, v.kind, float(value), float(value))

    def row(self, name: str, terms: Mapping[str, float], sense: str, rhs: float, tag: str = "") -> None:
        if sense not in ("<=", "==", ">="):
            raise ModelError(f"bad sense {sense!r}")
        t = tuple((v, float(c)) for v, c in terms.items() if c != 0.0)
        self.rows.append(Row(name, t, sense, float(rhs), tag))

    def soc(self, name: str, r: Affine, vec: Sequence[Affine], tag: str = "") -> None:
        self.cones.append(Cone(name, "soc", (r, *vec), tag))

    def rsoc(self, name: str, s: Affine, t: Affine, vec: Sequence[Affine], tag: str = "") -> None:
        self.cones.append(Cone(name, "rsoc", (s, t, *vec), tag))

    def cost(self, name: str, coef: float) -> None:
        if coef:
            self.objective[name] = self.objective.get(name, 0.0) + float(coef)

    def referenced(self) -> set[str]:
        refs = {v for r in self.rows for v, _ in r.terms}
        refs |= {v for c in self.cones for a in c.args for v, _ in a.terms}
        refs |= set(self.objective)
        return refs

    def undeclared(self) -> set[str]:
        return self.referenced() - set(self.variables)


@dataclass(frozen=True)
class ProblemIR:
    """Immutable MISOCP: min c'x + c0 over rows, cones, bounds and binaries."""

    variables: tuple[Var, ...]
    rows: tuple[Row, ...]
    cones: tuple[Cone, ...]
    objective: tuple[tuple[str, float], ...]
    objective_const: float = 0.0
    index: Mapping[str, int] = field(default_factory=dict, compare=False, repr=False)

    @classmethod
    def from_blocks(cls, blocks: Sequence[Block]) -> "ProblemIR":
        variables: dict[str, Var] = {}
        owner: dict[str, str] = {}
        for b in blocks:
            for name, v in b.variables.items():
                if name in variables:
                    raise ModelError(f"namespace collision: {name!r} in blocks {owner[name]!r} and {b.name!r}")
                variables[name] = v
                owner[name] = b.name
        rows = [r for b in blocks for r in b.rows]
        cones = [c for b in blocks for c in b.cones]
        seen: set[str] = set()
        for r in rows:
            if r.name in seen:
                raise ModelError(f"duplicate row name {r.name!r}")
            seen.add(r.name)
        obj: dict[str, float] = {}
        const = 0.0
        for b in blocks:
            for v, c in b.objective.items():
                obj[v] = obj.get(v, 0.0) + c
            const += b.objective_const
        missing = set().union(*(b.referenced() for b in blocks)) - set(variables) if blocks else set()
        if missing:
            raise ModelError(f"undeclared variables referenced: {sorted(missing)[:5]}")
        return cls.build(list(variables.values()), rows, cones, obj, const)

    @classmethod
    def build(cls, variables, rows, cones, objective: Mapping[str, float], const: float = 0.0) -> "ProblemIR":
        index = {v.name: i for i, v in enumerate(variables)}
        ir = cls(tuple(variables), tuple(rows), tuple(cones),
                 tuple((v, float(c)) for v, c in objective.items() if c != 0.0), float(const), index)
        ir.check()
        return ir

    def check(self) -> None:
        for v in self.variables:
            if v.kind == "B" and not (math.isfinite(v.lb) and math.isfinite(v.ub)):
                raise ModelError(f"binary {v.name} without finite bounds")
            if v.lb > v.ub:
                raise ModelError(f"empty bounds on {v.name}: [{v.lb}, {v.ub}]")
        for c in self.cones:
            for a in c.args:
                for v, _ in a.terms:
                    if v not in self.index:
                        raise ModelError(f"cone {c.name} references undeclared {v}")
        for v, _ in self.objective:
            if v not in self.index:
                raise ModelError(f"objective references undeclared {v}")

    @property
    def n(self) -> int:
        return len(self.variables)

    @property
    def binaries(self) -> list[int]:
        return [i for i, v in enumerate(self.variables) if v.kind == "B"]

    def objective_value(self, x: Mapping[str, float]) -> float:
        return self.objective_const + sum(c * x[v] for v, c in self.objective)

    def counts(self) -> dict[str, int]:
        return {
            "variables": self.n,
            "binaries": len(self.binaries),
            "rows": len(self.rows),
            "cones": len(self.cones),
        }

    def dump(self) -> str:
        """Line-oriented text form; stable ordering, floats via repr (bit-exact)."""
        out = ["# h2grid-ir 1"]
        for v in self.variables:
            out.append(f"VAR {v.name} {v.kind} {v.lb!r} {v.ub!r}")
        for r in self.rows:
            body = " ".join(f"{v}:{c!r}" for v, c in r.terms)
            out.append(f"ROW {r.name} {r.tag or '-'} {r.sense} {r.rhs!r} {body}")
        for c in self.cones:
            args = " | ".join(f"{a.const!r} " + " ".join(f"{v}:{k!r}" for v, k in a.terms) for a in c.args)
            out.append(f"CONE {c.name} {c.tag or '-'} {c.kind} | {args}")
        out.append("OBJ " + f"{self.objective_const!r} " + " ".join(f"{v}:{c!r}" for v, c in self.objective))
        return "\n".join(out) + "\n"

    def with_bounds(self, bounds: Mapping[str, tuple[float, float]]) -> "ProblemIR":
        vs = [Var(v.name, v.kind, *bounds[v.name]) if v.name in bounds else v for v in self.variables]
        return ProblemIR(tuple(vs), self.rows, self.cones, self.objective, self.objective_const, self.index)

    def with_rhs(self, rhs: Mapping[str, float]) -> "ProblemIR":
        """Copy with the right-hand sides of the named rows replaced."""
        unknown = set(rhs) - {r.name for r in self.rows}
        if unknown:
            raise ModelError(f"unknown rows: {sorted(unknown)[:5]}")
        rows = tuple(Row(r.name, r.terms, r.sense, float(rhs[r.name]), r.tag) if r.name in rhs else r
                     for r in self.rows)
        return ProblemIR(self.variables, rows, self.cones, self.objective, self.objective_const, self.index)


@dataclass
class SolveResult:
    status: str  # optimal | infeasible | gap_limit | time_limit | unbounded
    x: dict[str, float]
    objective: float
    bound: float
    gap: float
    row_duals: dict[str, float] = field(default_factory=dict)
    cone_duals: dict[str, np.ndarray] = field(default_factory=dict)
    nodes: int = 0
    tree: list[tuple[int, int, float]] = field(default_factory=list)  # (node, parent, relaxation value)
    wall_time: float = 0.0

    @property
    def ok(self) -> bool:
        return self.status in ("optimal", "gap_limit") or (self.status == "time_limit" and bool(self.x))

    def __getitem__(self, name: str) -> float:
        return self.x[name]


def relative_gap(objective: float, bound: float) -> float:
    if not math.isfinite(objective):
        return INF
    if bound == INF:
        return 0.0
    return max(0.0, (objective - bound) / max(1.0, abs(objective)))


# --------------------------------------------------------------------------- relaxation


class _Relaxation:
    """Compiled conic form of a ProblemIR; re-solvable under changed variable bounds."""

    def __init__(self, ir: ProblemIR, tol: float = 1e-8):
        self.ir = ir
        self.tol = tol
        n = ir.n
        idx = ir.index
        self.lb0 = np.array([v.lb for v in ir.variables])
        self.ub0 = np.array([v.ub for v in ir.variables])
        self.c = np.zeros(n)
        for v, c in ir.objective:
            self.c[idx[v]] += c

        # linear rows, normalised to a x (<= | ==) b ; sign=-1 marks negated >= rows
        ri, rj, rv, rb, self.row_sign, self.row_eq = [], [], [], [], [], []
        for k, r in enumerate(ir.rows):
            s = -1.0 if r.sense == ">=" else 1.0
            for v, c in r.terms:
                ri.append(k)
                rj.append(idx[v])
                rv.append(s * c)
            rb.append(s * r.rhs)
            self.row_sign.append(s)
            self.row_eq.append(r.sense == "==")
        m = len(ir.rows)
        self.A = sp.csr_matrix((rv, (ri, rj)), shape=(m, n))
        self.b = np.array(rb)
        self.row_sign = np.array(self.row_sign)
        self.row_eq = np.array(self.row_eq, dtype=bool)
        self.pattern = self.A.copy()
        self.pattern.data[:] = 1.0

        # cones -> rows of s = b - A x in SOC
        ci, cj, cv, cb, self.cone_dims = [], [], [], [], []
        k = 0
        for cone in ir.cones:
            if cone.kind == "soc":
                exprs = [(cone.args[0], 1.0)] + [(a, 1.0) for a in cone.args[1:]]
                comps = [[(a, w)] for a, w in exprs]
            else:
                s_, t_ = cone.args[0], cone.args[1]
                comps = [[(s_, 1.0), (t_, 1.0)], [(s_, 1.0), (t_, -1.0)]] + [[(a, 2.0)] for a in cone.args[2:]]
            for parts in comps:
                const = 0.0
                for a, w in parts:
                    const += w * a.const
                    for v, c in a.terms:
                        ci.append(k)
                        cj.append(idx[v])
                        cv.append(-w * c)
                cb.append(const)
                k += 1
            self.cone_dims.append(len(comps))
        self.C = sp.csr_matrix((cv, (ci, cj)), shape=(k, n))
        self.cb = np.array(cb)

    def _pin(self, lb: np.ndarray, ub: np.ndarray, passes: int = 20):
        """Fixes variables that a row with a single free entry pins to one value
        (equalities, or an inequality meeting the opposite bound). Interior-point
        iterates would otherwise leave such variables a hair off their value."""
        pattern = self.pattern
        for _ in range(passes):
            free = np.abs(ub - lb) > 1e-12
            single = (pattern @ free.astype(float)) == 1
            if not single.any():
                break
            xf = np.where(free, 0.0, lb)
            rhs = self.b - self.A @ xf
            sub = self.A[single].multiply(free[None, :]).tocsr()
            sub.eliminate_zeros()
            rows = np.flatnonzero(single)
            changed = False
            for k, r in enumerate(rows):
                s, e = sub.indptr[k], sub.indptr[k + 1]
                if e - s != 1:
                    continue
                j, a = sub.indices[s], sub.data[s]
                val = rhs[r] / a
                tol = 1e-9 * (1 + abs(val))
                if self.row_eq[r]:
                    if val < lb[j] - tol or val > ub[j] + tol:
                        return None, None
                    lb[j] = ub[j] = min(max(val, lb[j]), ub[j])
                    changed = True
                elif a > 0 and abs(val - lb[j]) <= tol:
                    ub[j] = lb[j]
                    changed = True
                elif a < 0 and abs(val - ub[j]) <= tol:
                    lb[j] = ub[j]
                    changed = True
            if not changed:
                break
        return lb, ub

    def solve(self, lb: np.ndarray, ub: np.ndarray):
        """Returns (status, x, obj, row_duals, cone_duals)."""
        n = self.ir.n
        lb, ub = self._pin(lb.copy(), ub.copy())
        if lb is None:
            return "infeasible", None, INF, None, None
        fixed = np.abs(ub - lb) <= 1e-12
        free = ~fixed
        xf = np.where(fixed, lb, 0.0)
        cols = np.flatnonzero(free)

        A_free = self.A[:, cols]
        b_lin = self.b - self.A @ xf
        C_free = self.C[:, cols]
        b_cone = self.cb - self.C @ xf

        # drop linear rows that no longer touch free variables
        live = np.diff(A_free.indptr) > 0
        dead = ~live
        if dead.any():
            viol = np.where(self.row_eq[dead], np.abs(b_lin[dead]), np.maximum(-b_lin[dead], 0.0))
            if viol.size and viol.max() > 1e-7 * (1 + np.abs(b_lin[dead]).max()):
                return "infeasible", None, INF, None, None
        eq = live & self.row_eq
        ineq = live & ~self.row_eq

        lbf, ubf = lb[cols], ub[cols]
        has_lb = np.isfinite(lbf)
        has_ub = np.isfinite(ubf)
        nf = len(cols)
        I = sp.identity(nf, format="csr")
        blocks_A = [A_free[eq], A_free[ineq], -I[has_lb], I[has_ub], C_free]
        blocks_b = [b_lin[eq], b_lin[ineq], -lbf[has_lb], ubf[has_ub], b_cone]
        A = sp.vstack(blocks_A, format="csc")
        b = np.concatenate(blocks_b)
        cones = []
        n_eq, n_in = int(eq.sum()), int(ineq.sum()) + int(has_lb.sum()) + int(has_ub.sum())
        if n_eq:
            cones.append(clarabel.ZeroConeT(n_eq))
        if n_in:
            cones.append(clarabel.NonnegativeConeT(n_in))
        for d in self.cone_dims:
            cones.append(clarabel.SecondOrderConeT(d))

        q = self.c[cols]
        P = sp.csc_matrix((nf, nf))
        settings = clarabel.DefaultSettings()
        settings.verbose = False
        settings.tol_gap_abs = self.tol
        settings.tol_gap_rel = self.tol
        settings.tol_feas = self.tol
        settings.tol_ktratio = 1e-7
        settings.max_iter = 300
        solver = clarabel.DefaultSolver(P, q, A, b, cones, settings)
        sol = solver.solve()
        st = str(sol.status)
        if st in ("PrimalInfeasible", "AlmostPrimalInfeasible"):
            return "infeasible", None, INF, None, None
        if st in ("DualInfeasible", "AlmostDualInfeasible"):
            return "unbounded", None, -INF, None, None
        if st not in ("Solved", "AlmostSolved"):
            log.warning("relaxation ended with status %s", st)
            if st != "MaxIterations" and st != "InsufficientProgress":
                return "infeasible", None, INF, None, None
        x = xf.copy()
        x[cols] = np.asarray(sol.x)
        z = np.asarray(sol.z)
        ydual = np.zeros(len(self.ir.rows))
        z_eq = z[:n_eq]
        z_in = z[n_eq:n_eq + int(ineq.sum())]
        ydual[np.flatnonzero(eq)] = -z_eq
        ydual[np.flatnonzero(ineq)] = -z_in
        ydual *= self.row_sign  # >= rows were negated
        zc = z[len(b) - len(self.cb):]
        obj = float(self.c @ x) + self.ir.objective_const
        return "ok", x, obj, ydual, zc


def _pack(rel: _Relaxation, x: np.ndarray, ydual, zc) -> tuple[dict, dict, dict]:
    ir = rel.ir
    xs = {v.name: float(x[i]) for i, v in enumerate(ir.variables)}
    rd = {r.name: float(ydual[k]) for k, r in enumerate(ir.rows)} if ydual is not None else {}
    cd = {}
    if zc is not None:
        k = 0
        for cone, d in zip(ir.cones, rel.cone_dims):
            cd[cone.name] = np.asarray(zc[k:k + d])
            k += d
    return xs, rd, cd


class _BinaryRows:
    """Column view of the linear rows, used to judge binaries at a relaxed point.

    Interior-point relaxations leave binaries that no row constrains near 0.5, so
    plain fractionality is misleading. For each binary we measure how much its rows
    would be violated at value 0 and at value 1 with everything else held at the
    relaxed point.
    """

    def __init__(self, rel: _Relaxation, bins: np.ndarray):
        self.rel = rel
        self.bins = bins
        A = rel.A.tocsc()
        self.A = A
        self.norms = np.sqrt(np.asarray(rel.A.multiply(rel.A).sum(axis=1)).ravel()) + 1.0

    def scores(self, x: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        rel, A = self.rel, self.A
        act = rel.A @ x
        s = np.zeros((2, len(self.bins)))
        for i, j in enumerate(self.bins):
            lo, hi = A.indptr[j], A.indptr[j + 1]
            rows, coefs = A.indices[lo:hi], A.data[lo:hi]
            base = act[rows] - coefs * x[j] - rel.b[rows]
            for v in (0, 1):
                r = base + coefs * v
                viol = np.where(rel.row_eq[rows], np.abs(r), np.maximum(r, 0.0))
                s[v, i] = float(np.sum(viol / self.norms[rows]))
        return s[0], s[1]

    def round(self, x: np.ndarray) -> np.ndarray:
        """Value with the smaller violation; nearest integer when both are (near) clean."""
        s0, s1 = self.scores(x)
        out = x.copy()
        v = np.round(x[self.bins])
        tie = (np.abs(s0 - s1) <= 1e-9 * (1 + np.maximum(s0, s1))) | (np.maximum(s0, s1) <= FREE_TOL)
        out[self.bins] = np.where(tie, v, np.where(s0 < s1, 0.0, 1.0))
        return out

    def fractionality(self, x: np.ndarray) -> np.ndarray:
        """``|x - round(x)|``, zeroed for binaries whose rows accept at least one value
        (those are settled by :meth:`round`)."""
        s0, s1 = self.scores(x)
        frac = np.abs(x[self.bins] - np.round(x[self.bins]))
        frac[np.minimum(s0, s1) <= FREE_TOL] = 0.0
        return frac


def _fixed_solve(rel: _Relaxation, xr: np.ndarray, bins: np.ndarray):
    lb = rel.lb0.copy()
    ub = rel.ub0.copy()
    vals = np.clip(np.round(xr[bins]), lb[bins], ub[bins])
    lb[bins] = vals
    ub[bins] = vals
    return rel.solve(lb, ub)


def fix_binaries_and_resolve(ir: ProblemIR, assignment: Mapping[str, float], tol: float = 1e-8) -> SolveResult:
    """Continuous conic solve with every binary fixed; returns exact duals."""
    bins = [ir.variables[i].name for i in ir.binaries]
    missing = [b for b in bins if b not in assignment]
    if missing:
        raise ModelError(f"assignment does not cover binaries: {missing[:5]}")
    t0 = time.perf_counter()
    rel = _Relaxation(ir, tol)
    x0 = np.zeros(ir.n)
    for b in bins:
        x0[ir.index[b]] = assignment[b]
    status, x, obj, y, zc = _fixed_solve(rel, x0, np.array(ir.binaries, dtype=int))
    wall = time.perf_counter() - t0
    if status != "ok":
        return SolveResult(status, {}, INF if status == "infeasible" else -INF, INF, INF, wall_time=wall)
    xs, rd, cd = _pack(rel, x, y, zc)
    return SolveResult("optimal", xs, obj, obj, 0.0, rd, cd, nodes=1, wall_time=wall)


@dataclass(frozen=True)
class SolveOptions:
    gap: float = 1e-3
    time_limit: float | None = None
    threads: int = 1
    node_limit: int | None = None
    heuristic_every: int = 10
    dive_depth: int = 40


def solve(ir: ProblemIR, opts: SolveOptions | None = None, **kw) -> SolveResult:
    """Best-bound branch-and-bound on the binaries of ``ir``.

    Branching picks the most fractional binary (lowest index on ties), where a
    binary that every row accepts at either value counts as integral. The open node
    with the lowest bound is processed next, deeper nodes first and then creation
    order on ties, so results do not depend on timing. Returns duals of the continuous problem at
    the incumbent's binary assignment.
    """
    opts = opts or SolveOptions(**kw)
    t0 = time.perf_counter()
    rel = _Relaxation(ir)
    bins = np.array(ir.binaries, dtype=int)
    tree: list[tuple[int, int, float]] = []
    judge = _BinaryRows(rel, bins)

    inc_obj = INF
    inc = None  # (x, y, zc)
    pruned = [INF]  # lowest bound among nodes closed by the gap test

    def try_incumbent(xr: np.ndarray) -> float:
        nonlocal inc_obj, inc
        status, x, obj, y, zc = _fixed_solve(rel, xr, bins)
        if status != "ok":
            return INF
        if obj < inc_obj - 1e-12 * max(1.0, abs(obj)):
            inc_obj, inc = obj, (x, y, zc)
        return obj

    def rounding(xr: np.ndarray) -> None:
        try_incumbent(judge.round(xr))
        if inc is None:
            try_incumbent(xr)
        if inc is None:
            up = xr.copy()
            up[bins] = np.ceil(xr[bins] - INT_TOL)
            try_incumbent(up)

    status, x, obj, _, _ = rel.solve(rel.lb0, rel.ub0)
    tree.append((0, -1, obj))
    if status == "infeasible":
        return SolveResult("infeasible", {}, INF, INF, INF, nodes=1, tree=tree, wall_time=time.perf_counter() - t0)
    if status == "unbounded":
        return SolveResult("unbounded", {}, -INF, -INF, INF, nodes=1, tree=tree, wall_time=time.perf_counter() - t0)

    seq = 0
    # heap entries: (bound, -depth, seq, parent id, fixings)
    heap: list = []
    nodes = 1

    def process(node_id: int, bound: float, x: np.ndarray, fix: dict[int, float]) -> None:
        nonlocal seq
        if len(bins) == 0:
            try_incumbent(x)
            return
        frac = judge.fractionality(x)
        frac[[i for i, b in enumerate(bins) if int(b) in fix]] = -1.0
        if frac.max() <= INT_TOL:
            try_incumbent(judge.round(x))
            if inc is not None and relative_gap(inc_obj, bound) <= opts.gap:
                pruned[0] = min(pruned[0], bound)
                return
            # the rounded point failed: fall back to raw fractionality
            frac = np.abs(x[bins] - np.round(x[bins]))
            frac[[i for i, b in enumerate(bins) if int(b) in fix]] = -1.0
            if frac.max() <= INT_TOL:
                # the relaxation optimum is integral, so the fixed solve is the subtree's exact value
                exact = try_incumbent(x)
                pruned[0] = min(pruned[0], max(bound, exact) if exact < INF else bound)
                return
        elif node_id == 0 or (inc is not None and nodes % opts.heuristic_every == 0):
            rounding(x)
        if relative_gap(inc_obj, bound) <= opts.gap:
            pruned[0] = min(pruned[0], bound)
            return
        k = int(np.argmax(frac))  # argmax returns the lowest index among ties
        j = int(bins[k])
        log.debug("branch on %s at %.4f (frac %.4f)", ir.variables[j].name, x[j], frac[k])
        depth = len(fix) + 1
        for val in (0.0, 1.0):
            child = dict(fix)
            child[j] = val
            seq += 1
            heapq.heappush(heap, (bound, -depth, seq, node_id, child))

    def dive(x: np.ndarray) -> None:
        """Depth-first rounding from the root until an incumbent is found."""
        fix: dict[int, float] = {}
        for _ in range(opts.dive_depth):
            frac = judge.fractionality(x)
            frac[[i for i, b in enumerate(bins) if int(b) in fix]] = -1.0
            if frac.max() <= INT_TOL:
                try_incumbent(judge.round(x))
                return
            j = int(bins[int(np.argmax(frac))])
            for val in (float(np.round(x[j])), 1.0 - float(np.round(x[j]))):
                lb, ub = rel.lb0.copy(), rel.ub0.copy()
                trial = {**fix, j: val}
                for i, v in trial.items():
                    lb[i] = ub[i] = v
                st, xd, _, _, _ = rel.solve(lb, ub)
                if st == "ok":
                    fix, x = trial, xd
                    break
            else:
                return

    if inc is None and opts.dive_depth > 0 and len(bins):
        dive(x)
    process(0, obj, x, {})
    status_out = "optimal"
    while heap:
        best = heap[0][0]
        if inc is not None and relative_gap(inc_obj, best) <= opts.gap:
            break
        if opts.time_limit is not None and time.perf_counter() - t0 > opts.time_limit:
            status_out = "time_limit"
            break
        if opts.node_limit is not None and nodes >= opts.node_limit:
            status_out = "time_limit"
            break
        bound, _, node_seq, parent, fix = heapq.heappop(heap)
        if inc is not None and relative_gap(inc_obj, bound) <= opts.gap:
            pruned[0] = min(pruned[0], bound)
            continue
        lb = rel.lb0.copy()
        ub = rel.ub0.copy()
        for j, val in fix.items():
            lb[j] = ub[j] = val
        st, x, obj, _, _ = rel.solve(lb, ub)
        nodes += 1
        tree.append((node_seq, parent, obj))
        log.debug("node %d bound %.6g relax %.6g incumbent %.6g open %d", nodes, bound, obj, inc_obj, len(heap))
        if st != "ok":
            continue
        if inc is not None and relative_gap(inc_obj, obj) <= opts.gap:
            pruned[0] = min(pruned[0], max(obj, bound))
            continue
        process(node_seq, max(obj, bound), x, fix)

    open_bound = min([h[0] for h in heap], default=INF)
    wall = time.perf_counter() - t0
    if inc is None:
        st = "infeasible" if status_out == "optimal" else status_out
        return SolveResult(st, {}, INF, open_bound, INF, nodes=nodes, tree=tree, wall_time=wall)
    bound = min(open_bound, pruned[0], inc_obj)
    gap = relative_gap(inc_obj, bound)
    if status_out == "optimal" and gap > 1e-9:
        status_out = "gap_limit"
    xs, rd, cd = _pack(rel, *inc)
    return SolveResult(status_out, xs, inc_obj, bound, gap, rd, cd, nodes=nodes, tree=tree, wall_time=wall)


def elastic_report(ir: ProblemIR, top: int = 20, tol: float = 1e-6) -> list[tuple[str, float]]:
    """Rows (and norm cones) that must be relaxed to make ``ir`` feasible.

    Adds a nonnegative slack to every linear row and to the radius of every
    ``soc`` cone, relaxes integrality, and minimises the total slack. Returns the
    ``top`` largest slacks as ``(name, amount)``; an empty list means the
    continuous relaxation is feasible.
    """
    variables = [Var(v.name, "C", v.lb, v.ub) for v in ir.variables]
    rows, cones, obj = [], [], {}
    for r in ir.rows:
        terms = list(r.terms)
        if r.sense in ("<=", "=="):
            variables.append(Var(f"~lo:{r.name}", "C", 0.0, INF))
            terms.append((f"~lo:{r.name}", -1.0))
            obj[f"~lo:{r.name}"] = 1.0
        if r.sense in (">=", "=="):
            variables.append(Var(f"~hi:{r.name}", "C", 0.0, INF))
            terms.append((f"~hi:{r.name}", 1.0))
            obj[f"~hi:{r.name}"] = 1.0
        rows.append(Row(r.name, tuple(terms), r.sense, r.rhs, r.tag))
    for c in ir.cones:
        if c.kind == "soc":
            variables.append(Var(f"~soc:{c.name}", "C", 0.0, INF))
            r0 = c.args[0]
            c = Cone(c.name, c.kind, (Affine(r0.terms + ((f"~soc:{c.name}", 1.0),), r0.const), *c.args[1:]), c.tag)
            obj[f"~soc:{c.name}"] = 1.0
        cones.append(c)
    el = ProblemIR.build(variables, rows, cones, obj)
    rel = _Relaxation(el, 1e-7)
    status, x, _, _, _ = rel.solve(rel.lb0, rel.ub0)
    if status != "ok":
        return [("<bounds>", INF)]
    out: dict[str, float] = {}
    for name in obj:
        v = float(x[el.index[name]])
        if v > tol:
            key = name.split(":", 1)[1]
            out[key] = out.get(key, 0.0) + v
    return sorted(out.items(), key=lambda kv: -kv[1])[:top]
