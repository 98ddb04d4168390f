"""Exact stochastic calculus over finite filtered spaces.

Conditional expectations, Doob decompositions, compensators, brackets,
integrals, exponentials, jump-support enumeration, orthogonalization, and
martingale representation. All operations are pure functions of immutable
inputs and run identically in exact and float mode.

Discrete conventions used throughout: the jump at t=0 is zero, the left limit
of the filtration at t is the partition at t-1, and a compensator increment
at t is the conditional expectation of the jump given the partition at t-1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _num
from .errors import NoRepresentation, NotMartingale, NotPredictable
from .space import FilteredSpace, Process


@dataclass
class DoobParts:
    """X = x0 + martingale + drift, with the drift predictable."""

    x0: np.ndarray
    martingale: Process
    drift: Process

    def recombine(self) -> Process:
        vals = self.x0[None, ...] + self.martingale.values + self.drift.values
        return Process(self.martingale.space, vals, "adapted", check=False)


@dataclass
class MartingaleReport:
    max_drift: object
    worst_time: int | None
    worst_cell: int | None
    tol: object
    passed: bool

    def as_dict(self) -> dict:
        return {
            "max_drift": float(self.max_drift),
            "worst_time": self.worst_time,
            "worst_cell": self.worst_cell,
            "passed": bool(self.passed),
        }


@dataclass
class StochExponential:
    process: Process
    # first period with a factor <= 0 per atom, -1 where none
    first_nonpositive: np.ndarray

    @property
    def flagged(self) -> bool:
        return bool(np.any(self.first_nonpositive >= 0))


@dataclass
class JumpSupport:
    """Distinct one-step jump values of a process, enumerated predictably.

    alphas[h] holds the h-th smallest jump vector per (period, parent cell),
    padded by repeating the first value where fewer than h+1 jumps exist;
    counts gives the per-cell support size, so the padded tail is maskable.
    """

    n: int
    alphas: list[Process]
    counts: Process


@dataclass
class Representation:
    integrand: Process
    residual: object
    worst_time: int | None
    worst_cell: int | None


def condexp(X: Process, t: int) -> np.ndarray:
    """Conditional expectation of the period-t values, one entry per cell."""
    return X.space.average(X.values[t], t)


def drift_increments(X: Process, under: FilteredSpace | None = None) -> np.ndarray:
    """E[jump at t | partition at t-1] for t=1..T, broadcast to atoms."""
    space = X.space
    cond = under if under is not None else space
    if not cond.same_atoms(space):
        raise ValueError("conditioning filtration must share the atom set")
    dX = X.increments()
    out = _num.zeros(dX.shape, space.exact)
    for t in range(1, space.T + 1):
        out[t - 1] = cond.condexp(dX[t - 1], t - 1)
    return out


def doob_decompose(X: Process) -> DoobParts:
    """Split an adapted process into martingale and predictable drift parts."""
    space = X.space
    inc = drift_increments(X)
    a_vals = _num.zeros(X.values.shape, space.exact)
    a_vals[1:] = np.cumsum(inc, axis=0)
    m_vals = X.values - X.values[0][None, ...] - a_vals
    return DoobParts(
        x0=X.values[0],
        martingale=Process(space, m_vals, "adapted", check=False),
        drift=Process(space, a_vals, "predictable", check=False),
    )


def compensator(X: Process, under: FilteredSpace | None = None) -> Process:
    """Cumulative predictable compensator of X's increments.

    The increment at t is E[jump of X at t | partition at t-1]. With `under`
    given, conditioning (and the resulting predictability) refers to that
    filtration; the carrier atom set must match.
    """
    inc = drift_increments(X, under)
    a_vals = _num.zeros(X.values.shape, X.space.exact)
    a_vals[1:] = np.cumsum(inc, axis=0)
    return Process(X.space, a_vals, "predictable", check=False)


def martingale_check(X: Process, tol=None, under: FilteredSpace | None = None) -> MartingaleReport:
    """Max conditional drift over all (period, cell) nodes.

    With tol=None the report passes only on exactly zero drift, which is the
    meaningful reading in exact mode.
    """
    space = X.space
    cond = under if under is not None else space
    inc = drift_increments(X, cond)
    absinc = abs(inc)
    max_drift = _num.max_abs(absinc)
    if max_drift == 0:
        worst_time = worst_cell = None
    else:
        flat = np.argmax(_num.to_float(absinc))
        t_idx, _, atom = np.unravel_index(flat, absinc.shape)
        worst_time = int(t_idx) + 1
        worst_cell = int(cond.cells[worst_time - 1][atom])
    passed = (max_drift == 0) if tol is None else bool(max_drift <= tol)
    return MartingaleReport(max_drift, worst_time, worst_cell, tol, passed)


def bracket(X: Process, Y: Process) -> Process:
    """Quadratic covariation: cumulative sum of jump products.

    Output has dim X.dim * Y.dim, flattened row-major, so component i*Y.dim+j
    is the bracket of X_i with Y_j.
    """
    if not X.space.same_atoms(Y.space):
        raise ValueError("bracket requires a common atom set")
    dX = X.increments()
    dY = Y.increments()
    prod = dX[:, :, None, :] * dY[:, None, :, :]
    prod = prod.reshape(prod.shape[0], X.dim * Y.dim, -1)
    vals = _num.zeros((X.space.T + 1, X.dim * Y.dim, X.space.n_atoms), X.space.exact)
    vals[1:] = np.cumsum(prod, axis=0)
    return Process(X.space, vals, "adapted", check=False)


def pred_bracket(X: Process, Y: Process, under: FilteredSpace | None = None) -> Process:
    """Predictable bracket: compensator of the jump-product sum."""
    return compensator(bracket(X, Y), under)


def stoch_integral(H: Process, X: Process) -> Process:
    """Discrete stochastic integral, sum of H_t * (jump of X at t).

    Equal dims contract to a scalar; a scalar integrand against a vector
    integrator (or conversely) broadcasts componentwise.
    """
    if H.kind != "predictable":
        raise NotPredictable("integrand must be a predictable process")
    if not H.space.same_atoms(X.space):
        raise ValueError("integrand and integrator live on different atoms")
    dX = X.increments()
    Hv = H.values[1:]
    if H.dim == X.dim:
        inc = (Hv * dX).sum(axis=1, keepdims=True)
    elif H.dim == 1 or X.dim == 1:
        inc = Hv * dX
    else:
        raise ValueError(f"incompatible dims {H.dim} and {X.dim}")
    return Process.from_increments(X.space, inc, "adapted")


def stoch_exponential(X: Process) -> StochExponential:
    """Product of (1 + jump) factors, starting at 1.

    Zero or negative factors are flagged per atom, not fatal; the product
    simply continues through them.
    """
    dX = X.increments()
    if X.dim != 1:
        raise ValueError("stochastic exponential takes a scalar process")
    factors = X.space.one() + dX[:, 0]
    vals = _num.zeros((X.space.T + 1, 1, X.space.n_atoms), X.space.exact)
    vals[0, 0] = X.space.one()
    vals[1:, 0] = np.cumprod(factors, axis=0)
    nonpos = _num.to_float(factors) <= 0.0
    any_hit = nonpos.any(axis=0)
    first = np.where(any_hit, nonpos.argmax(axis=0) + 1, -1).astype(np.int64)
    return StochExponential(
        Process(X.space, vals, "adapted", check=False), first
    )


def jump_constraint(W: Process) -> JumpSupport:
    """Enumerate per-cell jump supports of W predictably.

    n is the largest support size over all (period, parent cell) nodes; on a
    finite space it is bounded by the branching factor.
    """
    space = W.space
    dW = W.increments()
    supports: list[list[list[tuple]]] = []
    n = 1
    for t in range(1, space.T + 1):
        per_cell = []
        idx = space.idx[t]
        for children in space.children(t):
            jumps = sorted({tuple(dW[t - 1][:, idx.firsts[c]]) for c in children})
            per_cell.append(jumps)
            n = max(n, len(jumps))
        supports.append(per_cell)
    alphas = [_num.zeros((space.T + 1, W.dim, space.n_atoms), space.exact) for _ in range(n)]
    counts = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
    for t in range(1, space.T + 1):
        pidx = space.idx[t - 1]
        for cell, jumps in enumerate(supports[t - 1]):
            atoms = pidx.atoms_of(cell)
            counts[t, 0, atoms] = _num.as_scalar(len(jumps), space.exact)
            for h in range(n):
                vec = jumps[h] if h < len(jumps) else jumps[0]
                for i, v in enumerate(vec):
                    alphas[h][t, i, atoms] = v
    return JumpSupport(
        n=n,
        alphas=[Process(space, a, "predictable", check=False) for a in alphas],
        counts=Process(space, counts, "predictable", check=False),
    )


def spanning_driver(space: FilteredSpace) -> Process:
    """Martingale family whose one-step increments span every node.

    Component i jumps like the demeaned indicator of a node's (i+1)-th
    child; nodes with fewer children leave the surplus components flat.
    With d = (max child count - 1) components, any adapted martingale is a
    predictable integral against this family, so checking an identity on
    these components checks it on all martingales. Same span per node as
    indicator_basis, packed into d components instead of one process per
    node, which is what the fitting paths want.
    """
    max_kids = max(
        len(kids) for t in range(1, space.T + 1) for kids in space.children(t)
    )
    dim = max_kids - 1
    dvals = _num.zeros((space.T, dim, space.n_atoms), space.exact)
    for t in range(1, space.T + 1):
        cp = space.cell_prob(t)
        parent_cp = space.cell_prob(t - 1)
        for cell, kids in enumerate(space.children(t)):
            for i, kid in enumerate(kids[1:]):
                cond = cp[kid] / parent_cp[cell]
                for child in kids:
                    atoms = space.idx[t].atoms_of(child)
                    hit = space.one() if child == kid else space.zero()
                    dvals[t - 1, i, atoms] = hit - cond
    return Process.from_increments(space, dvals)


def indicator_basis(space: FilteredSpace) -> list[Process]:
    """Compensated one-step cell indicators; they span every martingale.

    For each period and parent cell, all children but the last contribute the
    martingale whose single jump is 1{child} - P(child | parent) on the
    parent's atoms. Any martingale increment is a linear combination of these
    within each cell, which is what drift fitting and representation need.
    """
    basis: list[Process] = []
    for t in range(1, space.T + 1):
        cp_child = space.cell_prob(t)
        cp_parent = space.cell_prob(t - 1)
        pidx = space.idx[t - 1]
        for parent, children in enumerate(space.children(t)):
            atoms = pidx.atoms_of(parent)
            for child in children[:-1]:
                vals = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
                pcond = cp_child[child] / cp_parent[parent]
                ind = space.cells[t][atoms] == child
                jump = np.where(ind, space.one() - pcond, -pcond)
                for s in range(t, space.T + 1):
                    vals[s, 0, atoms] = jump
                basis.append(Process(space, vals, "adapted", check=False))
    return basis


def orthogonalize(W: Process, tol=1e-10) -> Process:
    """Per-cell Gram-Schmidt on jump components under conditional products.

    Output components have zero conditional cross-moments on every cell and
    span the same jumps; dropped (dependent) components come out as zeros.
    """
    space = W.space
    report = martingale_check(W, tol=None if space.exact else tol)
    if not report.passed:
        raise NotMartingale(
            f"orthogonalize needs a martingale, drift {float(report.max_drift):.3g}",
            report,
        )
    dW = W.increments()
    out = _num.zeros(dW.shape, space.exact)
    for t in range(1, space.T + 1):
        idx = space.idx[t]
        cp_child = space.cell_prob(t)
        cp_parent = space.cell_prob(t - 1)
        for parent, children in enumerate(space.children(t)):
            w = cp_child[children] / cp_parent[parent]
            J = np.stack([dW[t - 1][:, idx.firsts[c]] for c in children], axis=0)
            m, d = J.shape
            scale = max(float(max((w * J[:, i] * J[:, i]).sum() for i in range(d))), 1e-300)
            kept: list[np.ndarray] = []
            kept_norm2: list = []
            U = _num.zeros((m, d), space.exact)
            for i in range(d):
                u = J[:, i].copy()
                for v, n2 in zip(kept, kept_norm2):
                    coef = (w * u * v).sum() / n2
                    u = u - coef * v
                n2 = (w * u * u).sum()
                dead = (n2 == 0) if space.exact else (float(n2) <= scale * 1e-24)
                if dead:
                    continue
                U[:, i] = u
                kept.append(u)
                kept_norm2.append(n2)
            for row, c in enumerate(children):
                catoms = idx.atoms_of(c)
                for i in range(d):
                    out[t - 1][i, catoms] = U[row, i]
    return Process.from_increments(space, out, "adapted")


def represent(X: Process, W: Process, tol=None) -> Representation:
    """Predictable integrand H with X = X_0 + (H . W), solved per cell.

    Minimum-norm least squares per (period, parent cell) makes the output a
    deterministic member of the equivalence class. The residual is the worst
    absolute mismatch across child cells; with tol given, residual > tol
    raises NoRepresentation.
    """
    space = X.space
    if X.dim != 1:
        raise ValueError("represent expects a scalar target")
    if not space.same_atoms(W.space):
        raise ValueError("target and driver live on different atoms")
    dX = X.increments()
    dW = W.increments()
    h_vals = _num.zeros((space.T + 1, W.dim, space.n_atoms), space.exact)
    residual = space.zero()
    worst = (None, None)
    for t in range(1, space.T + 1):
        idx = space.idx[t]
        pidx = space.idx[t - 1]
        for parent, children in enumerate(space.children(t)):
            firsts = idx.firsts[children]
            A = np.stack([dW[t - 1][:, f] for f in firsts], axis=0)
            b = dX[t - 1][0, firsts]
            sol = _num.lstsq_min_norm(A, b)
            sol = _num.as_array(sol, space.exact)
            gap = _num.max_abs(A.dot(sol) - b)
            if gap > residual:
                residual = gap
                worst = (t, parent)
            # scalar t and the atom array are both advanced indices, so the
            # indexing result has shape (n_sel, dim): broadcast a row vector
            h_vals[t, :, pidx.atoms_of(parent)] = sol[None, :]
    if tol is not None and residual > tol:
        raise NoRepresentation(
            f"driver cannot represent target, residual {float(residual):.3g}",
            residual,
        )
    H = Process(space, h_vals, "predictable", check=False)
    return Representation(H, residual, worst[0], worst[1])
