"""Seeded random model instances for the verification suites.

Every generator is a pure function of its seed: the same seed returns the
same scenario object, atom for atom. Constructions that can violate a
validity constraint (survival leaving (0, 1), mass turning negative, a
positivity screen failing) run under rejection sampling with a shared retry
budget; the number of attempts is recorded on the scenario so acceptance
rates stay visible.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import _num
from .calculus import doob_decompose, spanning_driver
from .enlarge import Enlargement, fit_drift_factors, progressive_enlarge
from .errors import GenerationFailed, InvalidZ, NegativeMass
from .natural import NaturalModelSpec, construct_tau_proportional
from .space import FilteredSpace, Process, binary_tree
from .viability import MarketModel, build_exponential_deflator

MAX_REJECTIONS = 10000

_PATH_LETTERS = "abcd"


def _rng(seed: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence(int(seed)))


def _fraction_simplex(rng: np.random.Generator, k: int) -> list[Fraction]:
    """Random rational probabilities: integer weights 1..9, normalized."""
    w = [int(v) for v in rng.integers(1, 10, k)]
    s = sum(w)
    return [Fraction(v, s) for v in w]


def random_tree(
    rng: np.random.Generator,
    depth: int,
    max_branching: int,
    min_branching: int = 2,
) -> FilteredSpace:
    """Heterogeneous rational tree: each node draws its own child count
    and child probabilities."""
    if depth < 1 or max_branching < min_branching or min_branching < 2:
        raise ValueError("need depth >= 1 and 2 <= min <= max branching")
    atoms = [""]
    prob = {"": Fraction(1)}
    for _ in range(depth):
        nxt = []
        for a in atoms:
            k = int(rng.integers(min_branching, max_branching + 1))
            ps = _fraction_simplex(rng, k)
            for i in range(k):
                child = a + _PATH_LETTERS[i]
                prob[child] = prob[a] * ps[i]
                nxt.append(child)
        atoms = nxt
    partitions = []
    for t in range(depth + 1):
        seen: dict[str, int] = {}
        partitions.append([seen.setdefault(a[:t], len(seen)) for a in atoms])
    return FilteredSpace(atoms, [prob[a] for a in atoms], partitions)


def random_terminal_martingale(
    rng: np.random.Generator, space: FilteredSpace, lo: int = 1, hi: int = 9
) -> Process:
    term = [Fraction(int(v)) for v in rng.integers(lo, hi + 1, space.n_atoms)]
    return Process.martingale_from_terminal(space, term)


def scalar_driver(rng: np.random.Generator, space: FilteredSpace) -> Process:
    """One-component martingale with a random non-flat jump on every node.

    Unlike spanning_driver this does not span all martingales; the nested
    consistency construction needs the driver to leave room in each node's
    jump space, which a one-dimensional driver does on trees branching
    three ways or more.
    """
    dvals = _num.zeros((space.T, 1, space.n_atoms), True)
    for t in range(1, space.T + 1):
        cp = space.cell_prob(t)
        parent_cp = space.cell_prob(t - 1)
        for cell, kids in enumerate(space.children(t)):
            draws = [Fraction(int(v)) for v in rng.integers(-3, 4, len(kids))]
            if len(set(draws)) == 1:
                draws[-1] += 1
            mean = sum(
                (cp[kid] / parent_cp[cell]) * draws[i] for i, kid in enumerate(kids)
            )
            for i, kid in enumerate(kids):
                dvals[t - 1, 0, space.idx[t].atoms_of(kid)] = draws[i] - mean
    return Process.from_increments(space, dvals)


def flat_start_martingale(
    rng: np.random.Generator,
    space: FilteredSpace,
    shrink: Fraction = Fraction(1, 4),
    under: FilteredSpace | None = None,
) -> Process:
    """Positive martingale with value 1 through period 1.

    A flat first step is what lets the proportional default constructor
    assign its first mass by the predictable rule; with a moving first
    step the forced initial mass breaks the pre-default drift template at
    t=1. Built as 1 + (M_t/M_1 - 1)*shrink, which stays a martingale
    because M_1 is known at every later period.
    """
    fil = under or space
    term = [Fraction(int(v)) for v in rng.integers(1, 10, space.n_atoms)]
    xT = _num.as_array(term, True).reshape(1, -1)
    vals = _num.zeros((space.T + 1, 1, space.n_atoms), True)
    m1 = fil.condexp(xT, 1)
    vals[0, 0, :] = Fraction(1)
    for t in range(1, space.T + 1):
        mt = fil.condexp(xT, t)
        vals[t] = 1 + (mt / m1 - 1) * shrink
    return Process(space, vals, "adapted", under=fil)


def random_decay(
    rng: np.random.Generator,
    space: FilteredSpace,
    lo: int = 14,
    hi: int = 19,
    den: int = 20,
    under: FilteredSpace | None = None,
) -> Process:
    """Predictable per-period survival factors, constant within a period."""
    vals = _num.zeros((space.T + 1, 1, space.n_atoms), True)
    for t in range(1, space.T + 1):
        vals[t, 0, :] = Fraction(int(rng.integers(lo, hi + 1)), den)
    return Process(space, vals, "predictable", under=under)


def random_natural_spec(
    rng: np.random.Generator,
    space: FilteredSpace,
    shrink: Fraction = Fraction(1, 4),
    under: FilteredSpace | None = None,
) -> NaturalModelSpec:
    L = flat_start_martingale(rng, space, shrink, under=under)
    decay = random_decay(rng, space, under=under)
    return NaturalModelSpec(L, decay=decay)


def cox_spec(rng: np.random.Generator, space: FilteredSpace) -> NaturalModelSpec:
    """Deterministic-hazard spec: survival carries no martingale part, so
    the constructed time is independent of the filtration."""
    L = Process.constant(space, Fraction(1))
    return NaturalModelSpec(L, decay=random_decay(rng, space))


def random_market(
    rng: np.random.Generator, space: FilteredSpace, dim: int = 1
) -> MarketModel:
    """Strictly positive martingale asset: a base-measure deflator exists
    (the constant one), so enlargement effects are isolated."""
    parts = [random_terminal_martingale(rng, space) for _ in range(dim)]
    return MarketModel(space, Process.stack(parts))


def arbitrage_market(rng: np.random.Generator, space: FilteredSpace) -> MarketModel:
    """One-sided asset: never loses, gains on at least one child of every
    node. No deflator can exist at any horizon >= 1."""
    vals = _num.zeros((space.T + 1, 1, space.n_atoms), True)
    vals[0, 0, :] = Fraction(1)
    for t in range(1, space.T + 1):
        for cell, kids in enumerate(space.children(t)):
            up = int(rng.integers(0, len(kids)))
            for i, kid in enumerate(kids):
                atoms = space.idx[t].atoms_of(kid)
                gain = Fraction(1 + int(rng.integers(1, 4)), 8) if i == up else Fraction(0)
                parent_atoms = space.idx[t - 1].atoms_of(cell)
                base = vals[t - 1, 0, parent_atoms[0]]
                vals[t, 0, atoms] = base * (1 + gain)
    return MarketModel(space, Process(space, vals))


def random_adapted(
    rng: np.random.Generator,
    space: FilteredSpace,
    lo: int = -5,
    hi: int = 5,
) -> Process:
    """Integer-valued adapted process, zero at t=0."""
    vals = _num.zeros((space.T + 1, 1, space.n_atoms), True)
    for t in range(1, space.T + 1):
        for cell in range(space.n_cells(t)):
            atoms = space.idx[t].atoms_of(cell)
            vals[t, 0, atoms] = Fraction(int(rng.integers(lo, hi + 1)))
    return Process(space, vals)


def _build_with_rejections(build, max_tries: int = MAX_REJECTIONS):
    """Retry `build` until it stops raising validity errors."""
    for attempt in range(1, max_tries + 1):
        try:
            return build(attempt), attempt
        except (InvalidZ, NegativeMass, ValueError):
            continue
    raise GenerationFailed(f"no valid draw within {max_tries} attempts")


@dataclass
class Scenario:
    """One generated model instance plus its bookkeeping.

    specs[0] lives on the base space; any later spec lives on the space
    obtained by enlarging with all earlier defaults, in order.
    """

    name: str
    space: FilteredSpace
    specs: list
    market: MarketModel
    driver: Process
    seed: int
    attempts: int = 1
    supermart: Process | None = None
    meta: dict = field(default_factory=dict)


def single_default_scenario(
    seed: int, depth: int = 3, max_branching: int = 3
) -> Scenario:
    """Random tree, one proportional default, positive martingale market."""
    rng = _rng(seed)
    space = random_tree(rng, depth, max_branching)

    def build(_attempt):
        spec = random_natural_spec(rng, space)
        construct_tau_proportional(spec)  # discard draws with no consistent mass
        return spec

    spec, attempts = _build_with_rejections(build)
    return Scenario(
        name=f"single-default-{seed}",
        space=space,
        specs=[spec],
        market=random_market(rng, space),
        driver=spanning_driver(space),
        seed=seed,
        attempts=attempts,
    )


def cox_scenario(seed: int, depth: int = 3, max_branching: int = 3) -> Scenario:
    rng = _rng(seed)
    space = random_tree(rng, depth, max_branching)
    spec, attempts = _build_with_rejections(lambda _a: cox_spec(rng, space))
    return Scenario(
        name=f"cox-{seed}",
        space=space,
        specs=[spec],
        market=random_market(rng, space),
        driver=spanning_driver(space),
        seed=seed,
        attempts=attempts,
    )


# -- two-default families ------------------------------------------------


def _consistent_second_martingale(
    rng: np.random.Generator,
    spec1: NaturalModelSpec,
    ext1,
    enl1: Enlargement,
    driver: Process,
    step: Fraction = Fraction(1, 8),
) -> tuple[Process, dict]:
    """Level-two martingale engineered so the nested-drift coefficient fit
    is exact and the assembled two-level drift matches direct computation.

    The coefficient relation is pointwise over the enlarged cells sitting
    inside a base node, not just on base-node averages: for a planted
    scalar gamma, the conditional child measure of the new martingale's
    jump must equal (1 + phi1*gamma) times one fixed base-child measure U,
    where phi1 is the first level's drift multiplier on that enlarged
    cell. U has to be mean-zero and uncorrelated with driver*(dM1 - gamma)
    under the node's child law, which leaves room exactly when the node
    branches more ways than the driver spans; jumps are additive so the
    planted measure does not get modulated by the running level. Nodes
    with no room are left flat, which is consistent with gamma = 0.
    """
    g = enl1.g
    fbase = ext1.f  # base filtration carried onto the extended atoms
    atom_base = ext1.atom_base
    z1 = spec1.z().values
    dm1 = doob_decompose(spec1.z()).martingale.increments()[:, 0, :][..., atom_base]
    dw = driver.increments()[:, 0, :][..., atom_base]
    prob = g.prob
    gammas = [Fraction(1, 8), Fraction(-1, 8), Fraction(1, 4), Fraction(1, 2)]

    lvals = _num.zeros((g.T + 1, 1, g.n_atoms), True)
    lvals[0, 0, :] = Fraction(1)
    lvals[1, 0, :] = Fraction(1)  # flat first step
    plan = {}
    for t in range(2, g.T + 1):
        add = _num.zeros((g.n_atoms,), True)
        fidx_prev, fidx_now = fbase.idx[t - 1], fbase.idx[t]
        fcell_now = fbase.cells[t]
        gidx_prev = g.idx[t - 1]
        gcell_prev = g.cells[t - 1]
        for fcell in range(fidx_prev.n_cells):
            f_atoms = fidx_prev.atoms_of(fcell)
            kids = sorted({int(fcell_now[a]) for a in f_atoms})
            kpos = {k: i for i, k in enumerate(kids)}
            dn = _num.zeros((len(kids),), True)
            dwv = _num.zeros((len(kids),), True)
            for i, k in enumerate(kids):
                a0 = fidx_now.atoms_of(k)[0]
                dn[i] = dm1[t - 1, a0]
                dwv[i] = dw[t - 1, a0]
            gamma = gammas[int(rng.integers(0, len(gammas)))]
            ones = _num.as_array([Fraction(1)] * len(kids), True)
            U = None
            for v in _num.exact_nullspace(np.stack([ones, dwv * (dn - gamma)])):
                if (v * dwv).sum() != 0:
                    U = v
                    break
            if U is None:
                continue
            plan[(t, fcell)] = gamma
            zprev = z1[t - 1, 0, atom_base[f_atoms[0]]]
            gcells = sorted({int(gcell_prev[a]) for a in f_atoms})
            rho = []
            top = Fraction(0)
            for d in gcells:
                d_atoms = gidx_prev.atoms_of(d)
                alive = ext1.tau[d_atoms[0]] > t - 1
                phi1 = 1 / zprev if alive else -1 / (1 - zprev)
                dmass = prob[d_atoms].sum()
                groups: dict[int, list[int]] = {}
                for a in d_atoms:
                    groups.setdefault(int(fcell_now[a]), []).append(a)
                if sorted(groups) != kids:
                    raise ValueError("a base child lost all mass under a default cell")
                for k, katoms in groups.items():
                    r = (1 + phi1 * gamma) * U[kpos[k]] / (prob[katoms].sum() / dmass)
                    rho.append((r, katoms))
                    top = max(top, abs(r))
            if top == 0:
                continue
            for r, katoms in rho:
                add[katoms] = r * step / top
        lvals[t, 0, :] = lvals[t - 1, 0, :] + add
    return Process(g, lvals, "adapted"), plan


def _defying_second_martingale(
    rng: np.random.Generator,
    spec1: NaturalModelSpec,
    ext1,
    enl1: Enlargement,
    driver: Process,
    step: Fraction = Fraction(1, 8),
) -> Process:
    """Level-two martingale built to defeat the recursion coefficient fit.

    Per base node the jump measure is chosen in the exact nullspace of the
    defining bracket (new martingale against the driver, compensated on
    the node) while keeping the triple product with the first level's
    martingale nonzero. The fit then has a zero left side against a
    nonzero right side, so its residual is the triple product itself and
    the consistency gate trips by construction.
    """
    g = enl1.g
    fbase = ext1.f
    atom_base = ext1.atom_base
    dm1 = doob_decompose(spec1.z()).martingale.increments()[:, 0, :][..., atom_base]
    dw = driver.increments()[:, 0, :][..., atom_base]
    prob = g.prob

    lvals = _num.zeros((g.T + 1, 1, g.n_atoms), True)
    lvals[0, 0, :] = Fraction(1)
    lvals[1, 0, :] = Fraction(1)
    planted_any = False
    for t in range(2, g.T + 1):
        add = _num.zeros((g.n_atoms,), True)
        fidx_prev, fidx_now = fbase.idx[t - 1], fbase.idx[t]
        fcell_now = fbase.cells[t]
        gidx_prev = g.idx[t - 1]
        gcell_prev = g.cells[t - 1]
        for fcell in range(fidx_prev.n_cells):
            f_atoms = fidx_prev.atoms_of(fcell)
            gcells = sorted({int(gcell_prev[a]) for a in f_atoms})
            pairs = []  # (atoms, joint mass, dw, dm1, owning cell index)
            for di, d in enumerate(gcells):
                groups: dict[int, list[int]] = {}
                for a in gidx_prev.atoms_of(d):
                    groups.setdefault(int(fcell_now[a]), []).append(a)
                for k, katoms in sorted(groups.items()):
                    a0 = fidx_now.atoms_of(k)[0]
                    pairs.append(
                        (katoms, prob[katoms].sum(), dw[t - 1, a0], dm1[t - 1, a0], di)
                    )
            rows = [
                _num.as_array(
                    [mass if di == want else Fraction(0) for _, mass, _, _, di in pairs],
                    True,
                )
                for want in range(len(gcells))
            ]
            rows.append(_num.as_array([mass * w for _, mass, w, _, _ in pairs], True))
            best = None
            for v in _num.exact_nullspace(np.stack(rows)):
                b = sum(
                    v[i] * mass * w * n for i, (_, mass, w, n, _) in enumerate(pairs)
                )
                if b != 0 and (best is None or abs(b) > abs(best[1])):
                    best = (v, b)
            if best is None:
                continue
            planted_any = True
            v = best[0]
            top = max(abs(x) for x in v)
            for i, (katoms, _, _, _, _) in enumerate(pairs):
                add[katoms] = v[i] * step / top
        lvals[t, 0, :] = lvals[t - 1, 0, :] + add
    if not planted_any:
        raise ValueError("no node could defeat the coefficient fit")
    return Process(g, lvals, "adapted")


def _dependent_second_martingale(
    enl1: Enlargement, amplitude: Fraction = Fraction(1, 8)
) -> Process:
    """Level-two martingale jumping with the first default's compensated
    indicator: its brackets mix default timing into the driver directions,
    which generically breaks single-valuedness of the recursion
    coefficient across driver components."""
    g = enl1.g
    D = doob_decompose(enl1.default_indicator()).martingale
    lvals = _num.zeros((g.T + 1, 1, g.n_atoms), True)
    lvals[0, 0, :] = Fraction(1)
    lvals[1, 0, :] = Fraction(1)
    for t in range(2, g.T + 1):
        dmart = D.values[t, 0] - D.values[t - 1, 0]
        lvals[t, 0, :] = lvals[t - 1, 0, :] * (1 + amplitude * dmart)
    return Process(g, lvals, "adapted")


def recursion_scenario(seed: int, depth: int = 3) -> Scenario:
    """Two-default instance for the nested-drift consistency suite.

    Seeds cycle through three families: planted-coefficient second levels
    (consistency gate passes and the assembled drift verifies, both by
    construction), deterministic-hazard second levels (trivially
    consistent), and fit-defying second levels (the gate trips by
    construction and the case is archived). The base tree branches three
    ways against a one-component driver, which is what leaves the two
    engineered constructions room to move.
    """
    rng = _rng(seed)
    space = random_tree(rng, depth, 3, min_branching=3)
    driver = scalar_driver(rng, space)
    family = ("planted", "cox", "defying")[seed % 3]

    def build(_attempt):
        spec1 = random_natural_spec(rng, space)
        ext1 = construct_tau_proportional(spec1)
        enl1 = progressive_enlarge(ext1)
        g = enl1.g
        meta = {"family": family}
        if family == "planted":
            L2, plan = _consistent_second_martingale(rng, spec1, ext1, enl1, driver)
            meta["planted"] = {f"t{t}c{c}": str(v) for (t, c), v in plan.items()}
        elif family == "cox":
            L2 = Process.constant(g, Fraction(1))
        else:
            L2 = _defying_second_martingale(rng, spec1, ext1, enl1, driver)
        decay2 = random_decay(rng, g, lo=14, hi=17)
        spec2 = NaturalModelSpec(L2, decay=decay2)
        return spec1, spec2, meta

    (spec1, spec2, meta), attempts = _build_with_rejections(build)
    return Scenario(
        name=f"recursion-{family}-{seed}",
        space=space,
        specs=[spec1, spec2],
        market=random_market(rng, space),
        driver=driver,
        seed=seed,
        attempts=attempts,
        meta=meta,
    )


# -- transmission ---------------------------------------------------------


def _screen(spec: NaturalModelSpec, screen_min) -> tuple[bool, dict]:
    """Positivity screen on one level: survival well inside (0, 1) and the
    one-minus-multiplier-times-compensated-jump floor."""
    z = _num.to_float(spec.z().values[1:])
    stats = {
        "min_z": float(z.min()),
        "max_z": float(z.max()),
        "screen_min": float(screen_min),
    }
    ok = z.min() > 0.05 and z.max() < 0.95 and float(screen_min) > 0.01
    return ok, stats


def transmission_scenario(seed: int, depth: int = 3) -> Scenario:
    """Two proportional defaults over a martingale market, both levels
    passing the positivity screen required by the transmission suite."""
    rng = _rng(seed)
    space = random_tree(rng, depth, 3)
    driver = spanning_driver(space)

    def build(_attempt):
        spec1 = random_natural_spec(rng, space, shrink=Fraction(1, 8))
        ext1 = construct_tau_proportional(spec1)
        enl1 = progressive_enlarge(ext1)
        m1 = doob_decompose(spec1.z()).martingale
        fac1 = fit_drift_factors(enl1, m1, [driver.component(i) for i in range(driver.dim)])
        cand1 = build_exponential_deflator(fac1, enl1)
        ok1, stats1 = _screen(spec1, cand1.screen_min)
        if not ok1:
            raise ValueError("level-1 screen failed")
        g = enl1.g
        spec2 = random_natural_spec(rng, g, shrink=Fraction(1, 8), under=g)
        ext2 = construct_tau_proportional(spec2)
        enl2 = progressive_enlarge(ext2)
        m2 = doob_decompose(spec2.z()).martingale
        # the lifted base driver is not a martingale one level up, so the
        # second fit runs against the enlarged filtration's own driver
        w2 = spanning_driver(g)
        fac2 = fit_drift_factors(enl2, m2, [w2.component(i) for i in range(w2.dim)])
        cand2 = build_exponential_deflator(fac2, enl2)
        ok2, stats2 = _screen(spec2, cand2.screen_min)
        if not ok2:
            raise ValueError("level-2 screen failed")
        return spec1, spec2, {"level1": stats1, "level2": stats2}

    (spec1, spec2, meta), attempts = _build_with_rejections(build)
    return Scenario(
        name=f"transmission-{seed}",
        space=space,
        specs=[spec1, spec2],
        market=random_market(rng, space),
        driver=driver,
        seed=seed,
        attempts=attempts,
        meta=meta,
    )


# -- honest-time negative controls ----------------------------------------


def _dip_recover_supermart(space: FilteredSpace, c: Fraction) -> Process:
    """Supermartingale flat at its maximum on the up subtree, dipping to c
    on the down side, with exactly one path recovering to the old maximum
    at the end. The recovering path's late at-max time forces a revealed
    one-atom cell strictly before it, which is where viability dies."""
    vals = _num.zeros((space.T + 1, 1, space.n_atoms), True)
    vals[0, 0, :] = Fraction(1)
    vals[1, 0, :] = Fraction(1)
    for t in range(2, space.T):
        for j, a in enumerate(space.atoms):
            vals[t, 0, j] = c if a[0] == "d" else Fraction(1)
    t = space.T
    for j, a in enumerate(space.atoms):
        if a[0] == "u":
            vals[t, 0, j] = Fraction(1)
        elif a[1:].startswith("u" * (space.T - 2)) and a.endswith("u"):
            vals[t, 0, j] = Fraction(1)  # the recovering path
        elif a[1] == "u":
            vals[t, 0, j] = 2 * c - 1
        else:
            vals[t, 0, j] = c / 2
    return Process(space, vals)


def honest_scenario(seed: int, T: int = 3) -> Scenario:
    """Binomial market for the last-visit-time control.

    Even seeds supply the dip-and-recover supermartingale explicitly;
    odd seeds leave the choice to the control (deflated asset), whose
    all-down paths peak at time zero."""
    rng = _rng(seed)
    k = int(rng.integers(1, 8))
    u = 1 + Fraction(k, 8)
    d = 2 - u
    space = binary_tree(T)
    vals = _num.zeros((T + 1, 1, space.n_atoms), True)
    for j, a in enumerate(space.atoms):
        s = Fraction(1)
        vals[0, 0, j] = s
        for t in range(1, T + 1):
            s = s * (u if a[t - 1] == "u" else d)
            vals[t, 0, j] = s
    market = MarketModel(space, Process(space, vals))
    supermart = None
    if seed % 2 == 0:
        c = [Fraction(1, 4), Fraction(1, 2), Fraction(3, 4)][seed % 3]
        supermart = _dip_recover_supermart(space, c)
    return Scenario(
        name=f"honest-{seed}",
        space=space,
        specs=[],
        market=market,
        driver=spanning_driver(space),
        seed=seed,
        supermart=supermart,
        meta={"u": str(u), "d": str(d)},
    )


# -- serialization ----------------------------------------------------------


def scenario_to_doc(sc: Scenario) -> dict:
    """Self-contained document for the base level; deeper levels carry the
    generator recipe (family and seed) and are rebuilt on load."""
    processes = {"S": sc.market.S, "driver": sc.driver}
    if sc.specs:
        processes["L"] = sc.specs[0].L
        processes["decay"] = sc.specs[0].decay
    if sc.supermart is not None:
        processes["supermart"] = sc.supermart
    doc = {
        "name": sc.name,
        "seed": sc.seed,
        "attempts": sc.attempts,
        "space": sc.space.to_json(processes),
        "n_specs": len(sc.specs),
        "meta": sc.meta,
    }
    return doc


def scenario_from_doc(doc: dict) -> Scenario:
    """Rebuild a scenario from its document.

    Single-level scenarios load verbatim; multi-level ones regenerate from
    the recorded seed and check the base level matches the stored data."""
    n_specs = int(doc.get("n_specs", 0))
    name = doc["name"]
    seed = int(doc["seed"])
    if n_specs >= 2:
        maker = recursion_scenario if name.startswith("recursion") else transmission_scenario
        sc = regenerated = maker(seed)
        stored_space, procs = FilteredSpace.from_json(doc["space"])
        if not regenerated.space.structure_equal(stored_space):
            raise ValueError("stored scenario does not match its recipe")
        if np.any(procs["S"].values != regenerated.market.S.values):
            raise ValueError("stored market does not match its recipe")
        return sc
    space, procs = FilteredSpace.from_json(doc["space"])
    specs = []
    if n_specs == 1:
        specs = [NaturalModelSpec(procs["L"], decay=procs["decay"])]
    return Scenario(
        name=name,
        space=space,
        specs=specs,
        market=MarketModel(space, procs["S"]),
        driver=procs["driver"],
        seed=seed,
        attempts=int(doc.get("attempts", 1)),
        supermart=procs.get("supermart"),
        meta=dict(doc.get("meta", {})),
    )
