"""Deflators on finite markets and their survival under enlargement.

Existence is decided by a per-node linear program over one-step state
prices, which on a finite space coincides with the classical no-arbitrage
criterion and yields checkable certificates either way. The constructive
side builds the candidate deflator whose one-step ratio is the reciprocal
of one plus the fitted multiplier applied to the raw factor jump; whenever
the multiplier fit has zero residual this candidate undoes the enlargement
tilt node by node, so its deflator property is exact rather than asymptotic.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linprog

from . import _num
from .calculus import (
    doob_decompose,
    drift_increments,
    spanning_driver,
    martingale_check,
)
from .enlarge import (
    DriftFactors,
    Enlargement,
    RandomTimeExtension,
    drift,
    fit_drift_factors,
    progressive_enlarge,
)
from .errors import Infeasible, NonPositive, RecursionMismatch
from .natural import NaturalModelSpec, construct_tau_proportional
from .space import FilteredSpace, Process

# smallest max-min state-price weight still counted as strictly positive
MIN_WEIGHT = 1e-9


class MarketModel:
    """Strictly positive asset vector with an optional stopping horizon."""

    def __init__(self, space: FilteredSpace, S: Process, horizon=None):
        if not space.same_atoms(S.space):
            raise ValueError("asset process lives on different atoms")
        if np.any(_num.to_float(S.values) <= 0.0):
            raise ValueError("asset components must be strictly positive")
        self.space = space
        self.S = S
        if horizon is None:
            self.horizon = None
        else:
            if np.isscalar(horizon):
                horizon = np.full(space.n_atoms, int(horizon), dtype=np.int64)
            horizon = np.asarray(horizon, dtype=np.int64)
            if horizon.shape != (space.n_atoms,):
                raise ValueError("horizon must be one period per atom")
            if horizon.min() < 0 or horizon.max() > space.T:
                raise ValueError("horizon outside the grid")
            for t in range(space.T + 1):
                ind = (horizon <= t).astype(np.int64)
                if not space.idx[t].constant_on_cells(ind):
                    raise ValueError("horizon is not a stopping time")
            self.horizon = horizon

    def horizon_array(self) -> np.ndarray:
        if self.horizon is None:
            return np.full(self.space.n_atoms, self.space.T, dtype=np.int64)
        return self.horizon

    def node_alive(self, t: int, pidx_first: int) -> bool:
        """Whether the one-step market at period t moves on this parent."""
        return int(self.horizon_array()[pidx_first]) >= t


def stopped(X: Process, R: np.ndarray) -> Process:
    """Freeze values after the per-atom stopping period R."""
    vals = X.values.copy()
    for t in range(1, X.space.T + 1):
        frozen = R < t
        if frozen.any():
            vals[t] = np.where(frozen[None, :], vals[t - 1], vals[t])
    return Process(X.space, vals, X.kind, check=False)


@dataclass
class DeflatorCandidate:
    """Positive unit-start process proposed as a deflator.

    first_nonpositive records, per atom, the first period where the one-step
    ratio failed to stay positive (-1 where it never did). screen_min keeps
    the minimum of the linearized ratio used by scenario positivity screens.
    """

    y: Process
    provenance: str
    first_nonpositive: np.ndarray | None = None
    screen_min: float | None = None
    min_ratio: float | None = None

    @property
    def flagged(self) -> bool:
        return self.first_nonpositive is not None and bool(
            np.any(self.first_nonpositive >= 0)
        )


@dataclass
class DeflatorReport:
    max_drift: object
    deflator_drift: object
    component_drifts: list
    tol: object
    passed: bool

    def as_dict(self) -> dict:
        return {
            "max_drift": float(self.max_drift),
            "deflator_drift": float(self.deflator_drift),
            "component_drifts": [float(d) for d in self.component_drifts],
            "passed": bool(self.passed),
        }


def deflator_check(candidate, market: MarketModel, tol=None) -> DeflatorReport:
    """Martingale checks for Y and each Y*S component up to the horizon."""
    Y = candidate.y if isinstance(candidate, DeflatorCandidate) else candidate
    space = market.space
    if not space.same_atoms(Y.space):
        raise ValueError("deflator lives on different atoms")
    if Y.dim != 1:
        raise ValueError("deflator must be scalar")
    if np.any(Y.values[0, 0] != space.one()):
        raise ValueError("deflator must start at 1")
    if tol is None:
        tol = 0 if space.exact else 1e-10
    R = market.horizon_array()
    active = np.arange(space.T + 1)[:, None] <= R[None, :]
    if np.any((_num.to_float(Y.values[:, 0]) <= 0.0) & active):
        raise NonPositive("deflator hits zero or below before the horizon")

    ys = stopped(Y, R)
    rep = martingale_check(ys, tol=tol, under=space)
    drifts = [rep.max_drift]
    for i in range(market.S.dim):
        prod = Process(
            space, Y.values * market.S.values[:, i : i + 1], "adapted", check=False
        )
        rep_i = martingale_check(stopped(prod, R), tol=tol, under=space)
        drifts.append(rep_i.max_drift)
    max_drift = max(drifts, key=float)
    if space.exact and float(tol) == 0.0:
        passed = all(d == 0 for d in drifts)
    else:
        passed = bool(float(max_drift) <= float(tol))
    return DeflatorReport(max_drift, drifts[0], drifts[1:], tol, passed)


# -- linear-programming existence oracle --------------------------------------


@dataclass
class LPOracleResult:
    feasible: bool
    candidate: DeflatorCandidate | None
    min_weight: float
    infeasible_nodes: int
    certificate: dict | None

    def as_dict(self) -> dict:
        return {
            "feasible": bool(self.feasible),
            "min_weight": float(self.min_weight),
            "infeasible_nodes": int(self.infeasible_nodes),
            "certificate": None
            if self.certificate is None
            else {
                "time": self.certificate["time"],
                "cell": self.certificate["cell"],
                "theta": [float(x) for x in self.certificate["theta"]],
                "expected_gain": float(self.certificate["expected_gain"]),
            },
        }


def _node_state_prices(dS: np.ndarray):
    """Max-min strictly positive one-step state prices; (eps, pi) or (None, None)."""
    d, m = dS.shape
    c = np.zeros(m + 1)
    c[-1] = -1.0
    a_eq = np.zeros((1 + d, m + 1))
    a_eq[0, :m] = 1.0
    a_eq[1:, :m] = dS
    b_eq = np.zeros(1 + d)
    b_eq[0] = 1.0
    a_ub = np.hstack([-np.eye(m), np.ones((m, 1))])
    b_ub = np.zeros(m)
    bounds = [(0.0, None)] * m + [(0.0, 1.0)]
    res = linprog(c, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=b_eq, bounds=bounds,
                  method="highs")
    if res.status != 0:
        return None, None
    return float(res.x[-1]), res.x[:m]


def _node_arbitrage(dS: np.ndarray, p_cond: np.ndarray):
    """Bounded strategy with nonnegative gains maximizing the expected gain."""
    d, m = dS.shape
    c = -(dS * p_cond[None, :]).sum(axis=1)
    res = linprog(c, A_ub=-dS.T, b_ub=np.zeros(m), bounds=[(-1.0, 1.0)] * d,
                  method="highs")
    theta = res.x if res.status == 0 else np.zeros(d)
    gains = theta @ dS
    return theta, gains, float(gains @ p_cond)


def _refine_state_prices(pi: np.ndarray, A, b, exact: bool):
    """Project LP weights onto the exact solution affine space.

    The correction is the minimum-norm solution of A d = A pi - b, so the
    result satisfies the equalities to machine precision (floats) or exactly
    (rationals). Falls back to the raw LP weights if positivity is lost.
    """
    if exact:
        pi_f = _num.as_array(pi, True)
        r = A.dot(pi_f) - b
        try:
            delta = _num.exact_lstsq_min_norm(A, r)
        except ValueError:
            return pi, False
        refined = pi_f - delta
        if np.all(refined > 0) and np.all(A.dot(refined) == b):
            return refined, True
        return pi, False
    r = A.dot(pi) - b
    delta, *_ = np.linalg.lstsq(A, r, rcond=_num.RCOND)
    refined = pi - delta
    if refined.min() > 0:
        return refined, True
    return pi, False


def lp_deflator_oracle(market: MarketModel) -> LPOracleResult:
    """Decide deflator existence by per-node state-price programs.

    Every one-step node on the (unstopped part of the) tree gets a linear
    program searching for conditional state prices with the largest minimum
    weight. All nodes strictly positive: the normalized weights compose into
    a positive martingale density, returned as a candidate deflator. Any
    node failing: a bounded one-step strategy with nonnegative and somewhere
    positive conditional gain is returned instead.
    """
    space = market.space
    dS_all = market.S.increments()
    min_weight = np.inf
    certificate = None
    infeasible_nodes = 0
    ratio = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
    ratio[:, :, :] = space.one()
    for t in range(1, space.T + 1):
        idx = space.idx[t]
        pidx = space.idx[t - 1]
        cp_child = space.cell_prob(t)
        cp_parent = space.cell_prob(t - 1)
        for parent, children in enumerate(space.children(t)):
            if not market.node_alive(t, pidx.firsts[parent]):
                continue
            firsts = idx.firsts[children]
            dS = np.stack([dS_all[t - 1][:, f] for f in firsts], axis=1)
            dS_f = _num.to_float(dS)
            scale = max(float(np.abs(dS_f).max()), 1.0)
            eps, pi = _node_state_prices(dS_f / scale)
            if eps is None or eps <= MIN_WEIGHT:
                infeasible_nodes += 1
                if certificate is None:
                    p_cond = _num.to_float(cp_child[children] / cp_parent[parent])
                    theta, gains, egain = _node_arbitrage(dS_f, p_cond)
                    certificate = {
                        "time": t,
                        "cell": int(parent),
                        "theta": theta,
                        "gains": gains,
                        "expected_gain": egain,
                    }
                continue
            min_weight = min(min_weight, eps)
            m = len(children)
            ones = _num.as_array(np.ones(m), space.exact)
            A = np.concatenate([ones[None, :], dS], axis=0)
            b = _num.zeros(1 + dS.shape[0], space.exact)
            b[0] = space.one()
            pi_ref, _ = _refine_state_prices(pi, A, b, space.exact)
            if not space.exact:
                pi_ref = np.asarray(pi_ref, dtype=np.float64)
            for c_local, child in enumerate(children):
                p_cond = cp_child[child] / cp_parent[parent]
                w = pi_ref[c_local] if space.exact else float(pi_ref[c_local])
                w = _num.as_scalar(w, space.exact)
                ratio[t, 0, idx.atoms_of(child)] = w / p_cond
    if certificate is not None:
        return LPOracleResult(False, None, 0.0, infeasible_nodes, certificate)

    y_vals = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
    y_vals[0, 0] = space.one()
    y_vals[1:, 0] = np.cumprod(ratio[1:, 0], axis=0)
    cand = DeflatorCandidate(
        y=Process(space, y_vals, "adapted", check=False),
        provenance="lp",
    )
    if not np.isfinite(min_weight):
        min_weight = 1.0  # no live nodes at all: constant deflator
    return LPOracleResult(True, cand, float(min_weight), 0, None)


# -- exponential candidate ------------------------------------------------------


def build_exponential_deflator(
    factors: DriftFactors, enl: Enlargement
) -> DeflatorCandidate:
    """Candidate whose one-step ratio inverts the enlargement tilt.

    Ratio at t: 1 / (1 + phi . raw factor jump). With a zero-residual
    multiplier fit this is an exact deflator for every base martingale, so
    validity is still established by deflator_check, never assumed here.
    screen_min reports the minimum of the linearized ratio (one minus the
    multiplier applied to the compensated jump), the quantity scenario
    screens bound away from zero.
    """
    g = enl.g
    n_lift = enl.lift(factors.N)
    dN = n_lift.increments()
    phi = factors.phi.values[1:]
    loading = (phi * dN).sum(axis=1, keepdims=True)  # (T, 1, n)
    ratios = g.one() + loading

    gamma_n = drift(factors.N, enl)
    comp = dN - gamma_n.increments()
    lin = g.one() - (phi * comp).sum(axis=1, keepdims=True)

    nonpos = _num.to_float(ratios[:, 0]) <= 0.0
    any_hit = nonpos.any(axis=0)
    first = np.where(any_hit, nonpos.argmax(axis=0) + 1, -1).astype(np.int64)

    y_vals = _num.zeros((g.T + 1, 1, g.n_atoms), g.exact)
    y_vals[0, 0] = g.one()
    safe = ratios.copy()
    safe[:, 0][nonpos] = g.one()
    inv = _num.as_array(np.ones_like(_num.to_float(safe)), g.exact) / safe
    y_vals[1:] = np.cumprod(inv, axis=0)
    # zero out from the first bad ratio on, instead of carrying junk
    for atom in np.flatnonzero(any_hit):
        y_vals[int(first[atom]) :, 0, atom] = g.zero()
    return DeflatorCandidate(
        y=Process(g, y_vals, "adapted", check=False),
        provenance="exponential",
        first_nonpositive=first,
        screen_min=float(_num.to_float(lin).min()),
        min_ratio=float(_num.to_float(ratios).min()),
    )


@dataclass
class ConditionsReport:
    """Node statistics for the viability conditions.

    continuous_term is identically zero here: there is no continuous
    bracket on a finite grid, the Monte Carlo engine owns its estimate.
    ratio_term_max and ratio_term_mean describe the running root sum of
    squared tilt ratios; zero_division_nodes counts nodes where the tilted
    one-step mass vanished.
    """

    continuous_term: float
    ratio_term_max: float
    ratio_term_mean: float
    zero_division_nodes: int

    def as_dict(self) -> dict:
        return {
            "continuous_term": self.continuous_term,
            "ratio_term_max": self.ratio_term_max,
            "ratio_term_mean": self.ratio_term_mean,
            "zero_division_nodes": self.zero_division_nodes,
        }


def fullviability_conditions(
    factors: DriftFactors, enl: Enlargement, horizon=None
) -> ConditionsReport:
    """Evaluate the integrability proxies for the exponential candidate."""
    g = enl.g
    dN = enl.lift(factors.N).increments()
    phi = factors.phi.values[1:]
    loading = _num.to_float((phi * dN).sum(axis=1))  # (T, n)
    denom = 1.0 + loading
    if horizon is not None:
        R = np.asarray(horizon, dtype=np.int64)
        live = (np.arange(1, g.T + 1)[:, None] <= R[None, :])
        loading = np.where(live, loading, 0.0)
        denom = np.where(live, denom, 1.0)
    zero_div = int(np.count_nonzero(denom == 0.0))
    with np.errstate(divide="ignore", invalid="ignore"):
        u = np.where(denom != 0.0, loading / denom, np.inf)
    cum = np.sqrt(np.cumsum(u * u, axis=0))
    terminal = cum[-1]
    prob = _num.to_float(g.prob)
    finite = np.isfinite(terminal)
    mean = float((terminal[finite] * prob[finite]).sum()) if finite.any() else np.inf
    return ConditionsReport(
        continuous_term=0.0,
        ratio_term_max=float(cum.max()) if cum.size else 0.0,
        ratio_term_mean=mean,
        zero_division_nodes=zero_div,
    )


# -- multi-level recursion ---------------------------------------------------------


@dataclass
class LevelFactors:
    """Artifacts of enlarging one more default into the running filtration."""

    ext: RandomTimeExtension
    enl: Enlargement
    n_new: Process
    phi_new: Process
    fit_residual: object
    gamma: Process | None
    gamma_residual: object


@dataclass
class RecursiveFactors:
    """Concatenated factors across levels plus the verification outcome."""

    levels: list[LevelFactors]
    n_all: Process
    phi_all: Process
    to_base: np.ndarray
    base: FilteredSpace
    verification_residual: object
    gamma_residual: object
    mismatch: bool
    tol: object

    @property
    def final(self) -> Enlargement:
        return self.levels[-1].enl


def _lift_values(values: np.ndarray, atom_map: np.ndarray) -> np.ndarray:
    return values[..., atom_map]


def _gamma_fit(space: FilteredSpace, dn_new, dn_old, dw):
    """Per-cell scalars mapping factor brackets onto triple products.

    space carries the small-filtration partitions (base cells lifted to the
    current atom set): the defining brackets are compensated there, not in
    the running enlarged filtration. For each (period, cell, new component
    i, old component j) solve the overdetermined scalar system over driver
    components l:
        gamma * E[dNnew_i dW_l | cell] = E[dNold_j dNnew_i dW_l | cell]
    by least squares, with gamma := 0 where the left coefficients all
    vanish. A nonzero residual means no scalar works, the gate that marks
    scenarios outside the recursion theorem's reach. Returns per-atom gamma
    values and the worst residual.
    """
    T = space.T
    d_new, d_old, d_w = dn_new.shape[1], dn_old.shape[1], dw.shape[1]
    vals = _num.zeros((T + 1, d_new * d_old, space.n_atoms), space.exact)
    worst = space.zero()
    for t in range(1, T + 1):
        pidx = space.idx[t - 1]
        a = _num.zeros((d_new, d_w, pidx.n_cells), space.exact)
        b = _num.zeros((d_old, d_new, d_w, pidx.n_cells), space.exact)
        cp = space.cell_prob(t - 1)
        for i in range(d_new):
            for l in range(d_w):
                prod = dn_new[t - 1, i] * dw[t - 1, l]
                a[i, l] = pidx.sum_by_cell(prod * space.prob) / cp
                for j in range(d_old):
                    trip = dn_old[t - 1, j] * prod
                    b[j, i, l] = pidx.sum_by_cell(trip * space.prob) / cp
        denom = (a * a).sum(axis=1)  # (d_new, cells)
        numer = (a[None, :, :, :] * b).sum(axis=2)  # (d_old, d_new, cells)
        vanished = np.asarray(denom == space.zero(), dtype=bool)
        safe = np.where(vanished, space.one(), denom)
        gam = np.where(vanished, space.zero(), numer / safe)
        resid = abs(gam[:, :, None, :] * a[None, :, :, :] - b)
        if resid.size:
            worst = max(worst, _num.max_abs(resid))
        for i in range(d_new):
            for j in range(d_old):
                vals[t, i * d_old + j] = pidx.spread(gam[j, i])
    proc = Process(space, vals, "predictable", check=False)
    return proc, worst


def recursive_factors(
    specs: list[NaturalModelSpec],
    W: Process,
    tol=None,
    strict: bool = False,
    verify_basis: list[Process] | None = None,
) -> RecursiveFactors:
    """Assemble drift factors across successive defaults and verify them.

    Each level enlarges the running filtration with one constructed default,
    fits that level's multiplier, and corrects the previous multipliers by
    the fitted bracket scalars before concatenation. The assembled form is
    then compared against directly computed drifts of base martingales; a
    gap is a reported outcome (strict=True turns it into an error), since
    the concatenation identity relies on continuity hypotheses a discrete
    tree need not satisfy.
    """
    if not specs:
        raise ValueError("need at least one default spec")
    base = specs[0].space
    if tol is None:
        tol = 0 if base.exact else 1e-10
    if not base.same_atoms(W.space):
        raise ValueError("driver lives on a different space")

    levels: list[LevelFactors] = []
    gamma_worst = base.zero()
    current = base  # filtration being enlarged at this level
    to_base_now = np.arange(base.n_atoms)  # current atoms -> base atoms
    n_all_vals = None  # (T+1, d, atoms of current level)
    phi_all_vals = None
    w_vals = W.values
    maps = []  # per level: atom_base into the previous level

    for k, spec in enumerate(specs):
        if not spec.space.same_atoms(current):
            raise ValueError(f"spec {k} lives off the level-{k} filtration")
        ext = construct_tau_proportional(spec)
        enl = progressive_enlarge(ext)
        n_new = doob_decompose(spec.z()).martingale
        w_cur = spanning_driver(current)
        factors = fit_drift_factors(
            enl, n_new, [w_cur.component(i) for i in range(w_cur.dim)]
        )
        if n_all_vals is None:
            gamma_proc = None
            level_g_res = base.zero()
            new_block = factors.phi.values
        else:
            small = current.with_partitions(
                [base.cells[t][to_base_now] for t in range(base.T + 1)]
            )
            gamma_proc, level_g_res = _gamma_fit(
                small,
                n_new.increments(),
                n_all_vals[1:] - n_all_vals[:-1],
                w_vals[1:] - w_vals[:-1],
            )
            gamma_worst = max(gamma_worst, level_g_res, key=float)
            d_old = n_all_vals.shape[1]
            # scale each new component by 1 + old multipliers . gamma column
            scale = _num.zeros((current.T + 1, n_new.dim, current.n_atoms), current.exact)
            for i in range(n_new.dim):
                acc = _num.zeros((current.T + 1, current.n_atoms), current.exact)
                for j in range(d_old):
                    acc = acc + phi_all_vals[:, j] * gamma_proc.values[:, i * d_old + j]
                scale[:, i] = acc
            scale = scale + current.one()
            new_block = _lift_values(scale, ext.atom_base) * factors.phi.values
        levels.append(
            LevelFactors(
                ext=ext,
                enl=enl,
                n_new=n_new,
                phi_new=factors.phi,
                fit_residual=factors.residual,
                gamma=gamma_proc,
                gamma_residual=level_g_res,
            )
        )
        if n_all_vals is None:
            n_all_vals = _lift_values(n_new.values, ext.atom_base)
            phi_all_vals = factors.phi.values
        else:
            n_all_vals = np.concatenate(
                [_lift_values(n_all_vals, ext.atom_base), _lift_values(n_new.values, ext.atom_base)],
                axis=1,
            )
            phi_all_vals = np.concatenate(
                [_lift_values(phi_all_vals, ext.atom_base), new_block], axis=1
            )
        w_vals = _lift_values(w_vals, ext.atom_base)
        to_base_now = to_base_now[ext.atom_base]
        maps.append(ext.atom_base)
        current = enl.g

    to_base = to_base_now
    final = levels[-1].enl
    f_cells = [base.cells[t][to_base] for t in range(base.T + 1)]
    f_space = final.g.with_partitions(f_cells)

    # Default verification scope: the driver's components, node by node.
    # Per-node agreement for each W_l extends to every integral H.W, which
    # is the whole martingale class the recursion theorem speaks about;
    # martingales outside the driver's span are out of scope.
    if verify_basis is None:
        verify_basis = [
            Process(base, W.values[:, l : l + 1], "adapted", check=False)
            for l in range(W.dim)
        ]
    worst = base.zero()
    phi_steps = phi_all_vals[1:]
    for Xb in verify_basis:
        xb_vals = _lift_values(Xb.values, to_base)
        x_proc = Process(final.g, xb_vals, "adapted", check=False)
        direct = drift_increments(x_proc, under=final.g)
        dn = n_all_vals[1:] - n_all_vals[:-1]
        dx = xb_vals[1:] - xb_vals[:-1]
        prod = dn * dx  # (T, d, n)
        comp = _num.zeros(prod.shape, base.exact)
        for t in range(1, base.T + 1):
            comp[t - 1] = f_space.condexp(prod[t - 1], t - 1)
        model = (phi_steps * comp).sum(axis=1, keepdims=True)
        gap = _num.max_abs(direct - model)
        worst = max(worst, gap, key=float)

    mismatch = bool(float(worst) > float(tol))
    if strict and mismatch:
        raise RecursionMismatch(
            f"assembled factors miss direct drift by {float(worst):.3g}"
        )
    return RecursiveFactors(
        levels=levels,
        n_all=Process(final.g, n_all_vals, "adapted", check=False),
        phi_all=Process(final.g, phi_all_vals, "predictable", check=False),
        to_base=to_base,
        base=base,
        verification_residual=worst,
        gamma_residual=gamma_worst,
        mismatch=mismatch,
        tol=tol,
    )


# -- transmission across defaults -----------------------------------------------


@dataclass
class TransmissionLevel:
    level: int
    feasible: bool
    min_weight: float
    fit_residual: object | None
    exp_check: DeflatorReport | None
    exp_flagged: bool | None
    certificate: dict | None

    def as_dict(self) -> dict:
        return {
            "level": self.level,
            "feasible": bool(self.feasible),
            "min_weight": float(self.min_weight),
            "fit_residual": None
            if self.fit_residual is None
            else float(self.fit_residual),
            "deflator_check": None if self.exp_check is None else self.exp_check.as_dict(),
            "certificate": self.certificate,
        }


@dataclass
class TransmissionReport:
    levels: list[TransmissionLevel]
    verdict: bool
    composed_check: DeflatorReport | None

    def as_dict(self) -> dict:
        return {
            "levels": [lv.as_dict() for lv in self.levels],
            "verdict": bool(self.verdict),
            "composed_deflator_check": None
            if self.composed_check is None
            else self.composed_check.as_dict(),
        }


def transmission_check(
    market: MarketModel,
    specs: list[NaturalModelSpec],
    horizons: list | None = None,
    tol=None,
) -> TransmissionReport:
    """Track deflator existence through successive default enlargements.

    Level 0 is the base market; each further level enlarges by one
    constructed default and reruns the existence oracle on the lifted,
    possibly earlier-stopped market. Exponential candidates are fitted per
    level and composed multiplicatively on top of the level-0 deflator
    (the per-level candidates only undo enlargement tilts, so the base
    market's own drift correction must ride along); the composed process
    is submitted to deflator_check at each level.
    """
    if tol is None:
        tol = 0 if market.space.exact else 1e-10
    base_res = lp_deflator_oracle(market)
    levels = [
        TransmissionLevel(
            level=0,
            feasible=base_res.feasible,
            min_weight=base_res.min_weight,
            fit_residual=None,
            exp_check=None,
            exp_flagged=None,
            certificate=None if base_res.certificate is None
            else lp_result_certificate(base_res),
        )
    ]
    if not base_res.feasible:
        return TransmissionReport(levels, False, None)

    current_space = market.space
    s_vals = market.S.values
    horizon = market.horizon_array()
    composed_vals = base_res.candidate.y.values
    verdict = True
    for k, spec in enumerate(specs, start=1):
        if not spec.space.same_atoms(current_space):
            raise ValueError(f"spec {k - 1} lives off level {k - 1}")
        ext = construct_tau_proportional(spec)
        enl = progressive_enlarge(ext)
        n_new = doob_decompose(spec.z()).martingale
        w_cur = spanning_driver(current_space)
        factors = fit_drift_factors(
            enl, n_new, [w_cur.component(i) for i in range(w_cur.dim)]
        )
        cand = build_exponential_deflator(factors, enl)

        s_vals = _lift_values(s_vals, ext.atom_base)
        horizon = horizon[ext.atom_base]
        if horizons is not None and k - 1 < len(horizons) and horizons[k - 1] is not None:
            h = horizons[k - 1]
            if np.isscalar(h):
                h = np.full(enl.g.n_atoms, int(h), dtype=np.int64)
            horizon = np.minimum(horizon, np.asarray(h, dtype=np.int64))
        lifted_market = MarketModel(
            enl.g, Process(enl.g, s_vals, "adapted", check=False), horizon
        )
        res = lp_deflator_oracle(lifted_market)
        composed_vals = _lift_values(composed_vals, ext.atom_base) * cand.y.values
        composed = Process(enl.g, composed_vals, "adapted", check=False)
        try:
            exp_check = deflator_check(composed, lifted_market, tol=tol)
        except NonPositive:
            exp_check = None
        levels.append(
            TransmissionLevel(
                level=k,
                feasible=res.feasible,
                min_weight=res.min_weight,
                fit_residual=factors.residual,
                exp_check=exp_check,
                exp_flagged=cand.flagged,
                certificate=None if res.certificate is None else lp_result_certificate(res),
            )
        )
        verdict = verdict and res.feasible
        current_space = enl.g

    composed_check = levels[-1].exp_check if len(levels) > 1 else None
    return TransmissionReport(levels, verdict, composed_check)


def lp_result_certificate(res: LPOracleResult) -> dict:
    cert = res.certificate
    return {
        "time": cert["time"],
        "cell": cert["cell"],
        "theta": [float(x) for x in cert["theta"]],
        "expected_gain": float(cert["expected_gain"]),
    }


# -- honest-time negative control ---------------------------------------------------


@dataclass
class HonestTimeReport:
    tau: np.ndarray
    ext: RandomTimeExtension
    enl: Enlargement
    up_to_horizon: int
    feasible_up_to: bool
    feasible_beyond: bool
    first_infeasible_horizon: int | None
    has_beyond: bool
    certificate: dict | None

    def as_dict(self) -> dict:
        return {
            "tau": [int(v) for v in self.tau],
            "up_to_horizon": int(self.up_to_horizon),
            "feasible_up_to": bool(self.feasible_up_to),
            "feasible_beyond": bool(self.feasible_beyond),
            "first_infeasible_horizon": None
            if self.first_infeasible_horizon is None
            else int(self.first_infeasible_horizon),
            "has_beyond": bool(self.has_beyond),
            "certificate": self.certificate,
        }


def honest_time_control(
    market: MarketModel,
    supermart: Process | None = None,
    component: int = 0,
) -> HonestTimeReport:
    """Enlarge by the last running-maximum time of a supermartingale.

    The random time is the last period where the chosen supermartingale
    (the deflated asset component when none is given) touches its running
    path maximum, so it is known only in hindsight and is not a stopping
    time of the small filtration. Deterministic horizons are then scanned:
    up to the first of the random times the lifted market sees no extra
    information and stays viable; each horizon strictly beyond it admits
    the clairvoyant cells, and the first infeasible one is reported with
    its arbitrage certificate. Per-atom stopping at the time itself is no
    use as a control: any sibling pair split by the time leaves a revealed
    one-atom cell with a sure move before it.
    """
    base_res = lp_deflator_oracle(market)
    if not base_res.feasible:
        raise Infeasible("base market has no deflator; control needs one")
    space = market.space
    if supermart is None:
        v = base_res.candidate.y.values[:, 0] * market.S.values[:, component]
    else:
        if not space.same_atoms(supermart.space):
            raise ValueError("supermartingale lives on different atoms")
        if supermart.dim != 1:
            raise ValueError("supermartingale must be scalar")
        inc = drift_increments(supermart, under=space)
        up_tol = space.zero() if space.exact else 1e-10
        if np.any(_num.to_float(inc) > float(up_tol)):
            raise ValueError("chosen process drifts upward somewhere")
        v = supermart.values[:, 0]
    if space.exact:
        run_max = np.maximum.accumulate(v, axis=0)
        at_max = np.asarray(v == run_max, dtype=bool)
    else:
        vf = _num.to_float(v)
        run_max = np.maximum.accumulate(vf, axis=0)
        at_max = vf >= run_max - 1e-12 * np.maximum(run_max, 1.0)
    tau = np.zeros(space.n_atoms, dtype=np.int64)
    for atom in range(space.n_atoms):
        tau[atom] = int(np.flatnonzero(at_max[:, atom]).max())

    weights = _num.zeros((space.n_atoms, space.T + 1), space.exact)
    for atom in range(space.n_atoms):
        weights[atom, tau[atom]] = space.one()
    tau_map = [list(range(space.T + 1))] * space.n_atoms
    ext = RandomTimeExtension(space, weights, tau_map)
    enl = progressive_enlarge(ext)

    s_lift = Process(enl.g, market.S.values[..., ext.atom_base], "adapted", check=False)
    base_horizon = market.horizon_array()[ext.atom_base]
    h_lo = int(tau.min())
    res_lo = lp_deflator_oracle(
        MarketModel(enl.g, s_lift, np.minimum(base_horizon, h_lo))
    )
    last = int(market.horizon_array().max())
    first_bad = None
    certificate = None
    for h in range(h_lo + 1, last + 1):
        res_h = lp_deflator_oracle(
            MarketModel(enl.g, s_lift, np.minimum(base_horizon, h))
        )
        if not res_h.feasible:
            first_bad = h
            certificate = lp_result_certificate(res_h)
            break
    return HonestTimeReport(
        tau=tau,
        ext=ext,
        enl=enl,
        up_to_horizon=h_lo,
        feasible_up_to=res_lo.feasible,
        feasible_beyond=first_bad is None,
        first_infeasible_horizon=first_bad,
        has_beyond=h_lo < last,
        certificate=certificate,
    )
