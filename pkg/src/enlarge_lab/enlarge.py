"""Progressive enlargement of a finite filtration by a random time.

A random time is modelled by extending the base space with an auxiliary level
coordinate: each base atom splits into weighted copies carrying a death time
in {0..T} or infinity. Two filtrations live on the extended atoms: the lifted
base filtration and its progressive enlargement, which additionally resolves
the death-time events {tau=0}, ..., {tau=t}, {tau>t} at each period. Both
share the atom set, so every process moves freely between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _num
from .calculus import (
    MartingaleReport,
    compensator,
    drift_increments,
    martingale_check,
    pred_bracket,
)
from .errors import Infeasible, NotMartingale
from .space import FilteredSpace, Process


def _default_tol(exact: bool):
    return None if exact else 1e-12


def _require_martingale(X: Process, what: str) -> MartingaleReport:
    report = martingale_check(X, tol=_default_tol(X.space.exact))
    if not report.passed:
        raise NotMartingale(
            f"{what} must be a martingale, drift {float(report.max_drift):.3g}",
            report,
        )
    return report


class RandomTimeExtension:
    """Base space times a finite level coordinate carrying a random time.

    weights[i, j] is the conditional probability of level j given base atom
    i; rows sum to one. tau_map[i, j] is the time assigned to that pair, an
    integer in 0..T or infinity. Zero-weight pairs are dropped, so every
    surviving extended atom has positive probability.
    """

    def __init__(self, base: FilteredSpace, weights, tau_map):
        self.base = base
        w = _num.as_array(weights, base.exact)
        if w.ndim != 2 or w.shape[0] != base.n_atoms:
            raise ValueError("weights must be (n_base_atoms, n_levels)")
        if np.any(_num.to_float(w) < 0.0):
            raise ValueError("level weights must be nonnegative")
        sums = w.sum(axis=1)
        if base.exact:
            if np.any(sums != 1):
                raise ValueError("level weights must sum to 1 per base atom")
        elif np.any(np.abs(_num.to_float(sums) - 1.0) > 1e-12):
            raise ValueError("level weights must sum to 1 per base atom")
        self.n_levels = w.shape[1]
        self.weights = w
        self.INF = base.T + 1

        taus = np.asarray(tau_map, dtype=object)
        if taus.shape != w.shape:
            raise ValueError("tau_map must match the weights shape")
        tau_int = np.empty(w.shape, dtype=np.int64)
        for i in range(w.shape[0]):
            for j in range(w.shape[1]):
                tau_int[i, j] = self._coerce_tau(taus[i, j])
        self.tau_map = tau_int

        keep_i, keep_j = np.nonzero(_num.to_float(w) > 0.0)
        self.atom_base = keep_i
        self.level = keep_j
        self.tau = tau_int[keep_i, keep_j]
        atoms = [f"{base.atoms[i]}#{j}" for i, j in zip(keep_i, keep_j)]
        prob = base.prob[keep_i] * w[keep_i, keep_j]
        lifted = [c[keep_i] for c in base.cells]
        self.f = FilteredSpace(atoms, prob, lifted, exact=base.exact)
        # first extended atom of each base atom, for projecting back down
        _, self.first_ext = np.unique(keep_i, return_index=True)
        if len(self.first_ext) != base.n_atoms:
            raise ValueError("every base atom needs at least one level")

    def _coerce_tau(self, v) -> int:
        if isinstance(v, str):
            if v != "inf":
                raise ValueError(f"tau entries must be integers or 'inf', got {v!r}")
            return self.INF
        if isinstance(v, float):
            if math.isinf(v):
                return self.INF
            if v != int(v):
                raise ValueError(f"tau entries must be whole, got {v!r}")
            v = int(v)
        v = int(v)
        if not 0 <= v <= self.INF:
            raise ValueError(f"tau={v} outside 0..{self.base.T} or infinity")
        return v

    @property
    def n_atoms(self) -> int:
        return self.f.n_atoms

    def lift(self, X: Process) -> Process:
        """Pull a base process onto the extended atoms."""
        return X.lift(self.f, self.atom_base)

    def survival(self, t: int) -> np.ndarray:
        """Indicator values of {tau > t} per extended atom."""
        one, zero = self.f.one(), self.f.zero()
        return np.where(self.tau > t, one, zero)

    def project(self, ext_values: np.ndarray) -> np.ndarray:
        """Read base-measurable per-extended-atom values back onto base atoms."""
        return ext_values[..., self.first_ext]

    def to_json(self) -> dict:
        return {
            "levels": int(self.n_levels),
            "weights": _num.array_to_json(self.weights),
            "tau": [
                "inf" if v == self.INF else int(v)
                for v in self.tau_map.reshape(-1)
            ],
        }

    @classmethod
    def from_json(cls, base: FilteredSpace, doc: dict) -> "RandomTimeExtension":
        k = int(doc["levels"])
        taus = np.asarray(doc["tau"], dtype=object).reshape(base.n_atoms, k)
        return cls(base, doc["weights"], taus)

    def __repr__(self) -> str:
        return (
            f"RandomTimeExtension({self.base.n_atoms}x{self.n_levels} -> "
            f"{self.n_atoms} atoms)"
        )


class Enlargement:
    """The progressively enlarged filtration, alongside the lifted base one.

    g partitions refine f by the events tau=0, ..., tau=t, tau>t; cells that
    would be empty never materialize because ids are assigned densely over
    the surviving atoms.
    """

    def __init__(self, ext: RandomTimeExtension):
        self.ext = ext
        self.f = ext.f
        self.INF = ext.INF
        capped_base = ext.INF + 1
        partitions = []
        for t in range(ext.base.T + 1):
            capped = np.minimum(ext.tau, t + 1)
            partitions.append(self.f.cells[t] * capped_base + capped)
        self.g = self.f.with_partitions(partitions)

    @property
    def tau(self) -> np.ndarray:
        return self.ext.tau

    def lift(self, X: Process) -> Process:
        return self.ext.lift(X)

    def default_indicator(self) -> Process:
        """The occurrence process 1{tau <= t}, adapted to g."""
        space = self.f
        vals = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
        for t in range(space.T + 1):
            vals[t, 0] = np.where(self.tau <= t, space.one(), space.zero())
        return Process(self.g, vals, "adapted", check=False)

    def __repr__(self) -> str:
        counts = [self.g.n_cells(t) for t in range(self.g.T + 1)]
        return f"Enlargement(cells per period {counts})"


def progressive_enlarge(ext: RandomTimeExtension) -> Enlargement:
    """Adjoin the running death-time information to the base filtration."""
    return Enlargement(ext)


@dataclass
class AzemaPair:
    """Survival process Z_t = P(tau > t | F_t) and its left limits."""

    z: Process
    z_minus: Process


def azema(ext: RandomTimeExtension) -> AzemaPair:
    """Conditional survival probabilities on the base filtration.

    The left-limit process starts at 1 (tau >= 0 always) and equals the
    one-period lag afterwards.
    """
    base = ext.base
    zv = _num.zeros((base.T + 1, 1, base.n_atoms), base.exact)
    for t in range(base.T + 1):
        cond = ext.f.condexp(ext.survival(t), t)
        zv[t, 0] = ext.project(cond)
    z = Process(base, zv, "adapted", check=False)
    zm = _num.zeros(zv.shape, base.exact)
    zm[0, 0, :] = base.one()
    zm[1:] = zv[:-1]
    z_minus = Process(base, zm, "adapted", check=False)
    return AzemaPair(z, z_minus)


def drift(X: Process, enl: Enlargement) -> Process:
    """Predictable correction making the lifted martingale a g-martingale.

    The increment on each g-cell at t is the conditional expectation of the
    lifted jump given that cell at t-1; subtracting the result from the lift
    is exactly a Doob decomposition under g.
    """
    _require_martingale(X, "drift input")
    Xg = enl.lift(X)
    inc = drift_increments(Xg, under=enl.g)
    vals = _num.zeros(Xg.values.shape, enl.g.exact)
    vals[1:] = np.cumsum(inc, axis=0)
    return Process(enl.g, vals, "predictable", check=False)


@dataclass
class DriftFactors:
    """Fitted multiplier phi with drift increments t_phi * d<N, X>^p.

    residual is the worst absolute fitting gap over all (period, g-cell)
    nodes; per_node carries the same gaps as a g-predictable process. Zero
    residual certifies the multiplier form for every martingale spanned by
    the fitted basis.
    """

    N: Process
    phi: Process
    residual: object
    per_node: Process
    worst_time: int | None
    worst_cell: int | None


def fit_drift_factors(
    enl: Enlargement,
    N: Process,
    basis: list[Process],
    tol=None,
) -> DriftFactors:
    """Solve for the drift multiplier of N against a spanning basis.

    Per (period, g-cell at t-1), the unknown row vector phi must map the
    predictable bracket increments of N with each basis martingale to that
    martingale's g-drift increment. Minimum-norm least squares keeps the
    output deterministic within its equivalence class.
    """
    base = enl.ext.base
    g = enl.g
    _require_martingale(N, "factor process")
    if not basis:
        raise ValueError("need at least one basis martingale")
    d = N.dim
    m = len(basis)
    if tol is None:
        tol = 0 if base.exact else 1e-10

    # All basis elements are swept at once: one drift check, one bracket
    # compensation, one g-drift pass, instead of three sweeps per element.
    spaces = []
    for Xb in basis:
        if Xb.dim != 1:
            raise ValueError("basis elements must be scalar martingales")
        if not any(Xb.space is s for s in spaces):
            spaces.append(Xb.space)
    bvals = np.concatenate([Xb.values for Xb in basis], axis=1)  # (T+1, m, n)
    for s in spaces:
        cols = [j for j, Xb in enumerate(basis) if Xb.space is s]
        stacked = Process(s, bvals[:, cols], "adapted", check=False)
        _require_martingale(stacked, "basis element")

    space_n = N.space
    dN = N.increments()  # (T, d, n)
    dB = bvals[1:] - bvals[:-1]  # (T, m, n)
    prod = (dN[:, :, None, :] * dB[:, None, :, :]).reshape(space_n.T, d * m, -1)
    br_inc = _num.zeros(prod.shape, space_n.exact)
    for t in range(1, space_n.T + 1):
        br_inc[t - 1] = space_n.condexp(prod[t - 1], t - 1)
    br_ext = br_inc.reshape(space_n.T, d, m, -1)[..., enl.ext.atom_base]
    lifted = Process(g, bvals[..., enl.ext.atom_base], "adapted", check=False)
    rhs_inc = drift_increments(lifted, under=g)  # (T, m, n_ext)

    phi_vals = _num.zeros((g.T + 1, d, g.n_atoms), g.exact)
    gap_vals = _num.zeros((g.T + 1, 1, g.n_atoms), g.exact)
    residual = g.zero()
    worst = (None, None)
    for t in range(1, g.T + 1):
        pidx = g.idx[t - 1]
        for cell in range(pidx.n_cells):
            first = pidx.firsts[cell]
            A = br_ext[t - 1, :, :, first].T  # (m, d)
            b = rhs_inc[t - 1, :, first]
            sol = _num.as_array(_num.lstsq_min_norm(A, b), g.exact)
            gap = _num.max_abs(A.dot(sol) - b)
            atoms = pidx.atoms_of(cell)
            phi_vals[t, :, atoms] = sol[None, :]
            gap_vals[t, 0, atoms] = gap
            if gap > residual:
                residual = gap
                worst = (t, cell)
    if residual > tol:
        raise Infeasible(
            f"no drift multiplier for this factor, residual {float(residual):.3g}",
            {"residual": residual, "worst_time": worst[0], "worst_cell": worst[1]},
        )
    return DriftFactors(
        N=N,
        phi=Process(g, phi_vals, "predictable", check=False),
        residual=residual,
        per_node=Process(g, gap_vals, "predictable", check=False),
        worst_time=worst[0],
        worst_cell=worst[1],
    )


@dataclass
class TransformReport:
    """Two-sided comparison of a compensator under the enlarged filtration."""

    max_gap: object
    worst_time: int | None
    tol: object
    passed: bool

    def as_dict(self) -> dict:
        return {
            "max_gap": float(self.max_gap),
            "worst_time": self.worst_time,
            "passed": bool(self.passed),
        }


def compensator_transform_check(
    A: Process,
    factors: DriftFactors,
    enl: Enlargement,
    tol=None,
) -> TransformReport:
    """Check g-compensator == base compensator + fitted drift of the gap.

    The right-hand side uses the fitted multiplier applied to bracket
    increments, never the direct g-drift, so agreement is evidence about the
    factor form rather than an identity of the construction.
    """
    base = enl.ext.base
    if tol is None:
        tol = 0 if base.exact else 1e-10
    lhs = drift_increments(enl.lift(A), under=enl.g)

    a_fp = compensator(A)
    gap = A - a_fp  # base martingale part of A
    br_inc = pred_bracket(factors.N, gap).increments()[..., enl.ext.atom_base]
    phi = factors.phi.values[1:]
    fitted = (phi * br_inc).sum(axis=1, keepdims=True)
    rhs = a_fp.increments()[..., enl.ext.atom_base] + fitted

    diff = abs(lhs - rhs)
    max_gap = _num.max_abs(diff)
    if max_gap == 0:
        worst_time = None
    else:
        worst_time = int(np.unravel_index(np.argmax(_num.to_float(diff)), diff.shape)[0]) + 1
    return TransformReport(max_gap, worst_time, tol, bool(max_gap <= tol))


@dataclass
class Condition1finReport:
    """Positivity-set comparison across the two filtrations at sampled times.

    forward_holds covers {E[xi | g at R-] > 0} inside {E[xi | f at R-] > 0},
    which is automatic; reverse_holds is the substantive inclusion. The check
    samples stopping times rather than enumerating them, so a pass is
    evidence for the sampled family only.
    """

    n_samples: int
    forward_holds: bool
    reverse_holds: bool
    counterexamples: list

    @property
    def passed(self) -> bool:
        return self.forward_holds and self.reverse_holds

    def as_dict(self) -> dict:
        return {
            "n_samples": self.n_samples,
            "forward_holds": self.forward_holds,
            "reverse_holds": self.reverse_holds,
            "passed": self.passed,
            "counterexamples": self.counterexamples,
        }


def _default_sample(enl: Enlargement, k_random: int, seed: int):
    """Deterministic times plus randomized predictable hitting times."""
    base = enl.ext.base
    rng = np.random.default_rng(seed)
    sample = []
    for t in range(base.T + 1):
        R = np.full(base.n_atoms, t, dtype=np.int64)
        for _ in range(3):
            raw = rng.integers(0, 3, size=base.n_cells(t)).astype(object)
            xi = base.idx[t].spread(_num.as_array(raw, base.exact))
            sample.append((R, xi))
    never = base.T + 1
    for _ in range(k_random):
        u_cells = [rng.integers(0, 10, size=base.n_cells(t)) for t in range(base.T + 1)]
        u = np.stack(
            [base.idx[t].spread(u_cells[t].astype(np.int64)) for t in range(base.T + 1)]
        )
        R = np.full(base.n_atoms, never, dtype=np.int64)
        for t in range(base.T, 0, -1):
            R[u[t - 1] >= 7] = t
        v_cells = [rng.integers(0, 3, size=base.n_cells(t)) for t in range(base.T + 1)]
        xi = _num.zeros(base.n_atoms, base.exact)
        for t in range(base.T + 1):
            vt = base.idx[t].spread(_num.as_array(v_cells[t].astype(object), base.exact))
            xi = np.where(R == t, vt, xi)
        sample.append((R, xi))
    return sample


def condition_1fin_check(
    enl: Enlargement,
    sample=None,
    k_random: int = 32,
    seed: int = 0,
    tol=None,
    max_counterexamples: int = 10,
) -> Condition1finReport:
    """Compare positivity sets of E[xi | .] across f and g at time R.

    sample entries are (R, xi) with R an integer per base atom (values above
    T mean the time never arrives) and xi nonnegative per base atom,
    measurable at the partition where R lands. The left-limit convention is
    the partition one period earlier; at R=0 both filtrations are trivial.
    """
    base = enl.ext.base
    ext = enl.ext
    if tol is None:
        tol = 0 if base.exact else 1e-12
    if sample is None:
        sample = _default_sample(enl, k_random, seed)

    forward = True
    reverse = True
    counterexamples: list[dict] = []
    for s_idx, (R, xi) in enumerate(sample):
        R = np.asarray(R, dtype=np.int64)
        xi = _num.as_array(xi, base.exact)
        if np.any(_num.to_float(xi) < 0.0):
            raise ValueError("test variables must be nonnegative")
        xi_ext = xi[ext.atom_base]
        for t in range(base.T + 1):
            on_r = (R == t)[ext.atom_base]
            if not on_r.any():
                continue
            if t == 0:
                mean = (xi * base.prob).sum()
                ef_ext = np.full(ext.n_atoms, mean)  # dtype inferred per mode
                eg_ext = ef_ext
            else:
                ef = base.condexp(xi, t - 1)
                ef_ext = ef[ext.atom_base]
                eg_ext = enl.g.condexp(xi_ext, t - 1)
            pos_f = _num.to_float(ef_ext) > float(tol)
            pos_g = _num.to_float(eg_ext) > float(tol)
            fwd_bad = on_r & pos_g & ~pos_f
            rev_bad = on_r & pos_f & ~pos_g
            if fwd_bad.any():
                forward = False
            if rev_bad.any():
                reverse = False
            for kind, bad in (("forward", fwd_bad), ("reverse", rev_bad)):
                for a in np.flatnonzero(bad):
                    if len(counterexamples) >= max_counterexamples:
                        break
                    counterexamples.append(
                        {
                            "sample": s_idx,
                            "time": t,
                            "direction": kind,
                            "atom": ext.f.atoms[a],
                            "tau": "inf" if ext.tau[a] == ext.INF else int(ext.tau[a]),
                        }
                    )
    return Condition1finReport(len(sample), forward, reverse, counterexamples)
