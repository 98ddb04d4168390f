from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from enlarge_lab import (
    FilteredSpace,
    Process,
    binary_tree,
    bracket,
    compensator,
    doob_decompose,
    indicator_basis,
    jump_constraint,
    martingale_check,
    orthogonalize,
    pred_bracket,
    represent,
    stoch_exponential,
    stoch_integral,
)
from enlarge_lab.errors import NoRepresentation, NotMartingale, NotPredictable

import oracles


def fair_walk(T=2):
    """+-1 random walk on the fair binary tree."""
    space = binary_tree(T)
    vals = np.zeros((T + 1, 1, space.n_atoms), dtype=object)
    for t in range(T + 1):
        for i, atom in enumerate(space.atoms):
            ups = atom[:t].count("u")
            vals[t, 0, i] = Fraction(2 * ups - t)
    return space, Process(space, vals)


def product_walk_space(T=2):
    """Two independent fair coins per period; atoms like "uu|du"."""
    choices = ["uu", "ud", "du", "dd"]
    atoms = [""]
    for _ in range(T):
        atoms = [a + ("|" if a else "") + c for a in atoms for c in choices]
    prob = [Fraction(1, 4 ** T)] * len(atoms)
    partitions = []
    for t in range(T + 1):
        seen = {}
        partitions.append([seen.setdefault(a[: 3 * t], len(seen)) for a in atoms])
    return FilteredSpace(atoms, prob, partitions)


def walk_pair(T=2):
    """Independent +-1 walks (X, Y) on the product space."""
    space = product_walk_space(T)
    xv = np.zeros((T + 1, 1, space.n_atoms), dtype=object)
    yv = np.zeros((T + 1, 1, space.n_atoms), dtype=object)
    for i, atom in enumerate(space.atoms):
        steps = atom.split("|") if atom else []
        for t in range(T + 1):
            xs = sum(1 if s[0] == "u" else -1 for s in steps[:t])
            ys = sum(1 if s[1] == "u" else -1 for s in steps[:t])
            xv[t, 0, i] = Fraction(xs)
            yv[t, 0, i] = Fraction(ys)
    return space, Process(space, xv), Process(space, yv)


# -- doob decomposition -------------------------------------------------


def test_doob_martingale_input_untouched():
    space, X = fair_walk(2)
    parts = doob_decompose(X)
    assert np.array_equal(parts.martingale.values, X.values - X.values[0])
    assert np.all(parts.drift.values == Fraction(0))


def test_doob_deterministic_input_is_pure_drift():
    space = binary_tree(2)
    vals = np.zeros((3, 1, 4), dtype=object)
    for t in range(3):
        vals[t, 0, :] = Fraction(t)
    parts = doob_decompose(Process(space, vals))
    assert np.all(parts.martingale.values == Fraction(0))
    assert [parts.drift.values[t, 0, 0] for t in range(3)] == [0, 1, 2]


def test_doob_binomial_asset_drift():
    # S_t = prod(1 + mu + sigma*eps_s), mu=1/10, sigma=1/5; the compensator
    # increment must equal mu*S_{t-1} on every node.
    mu, sigma = Fraction(1, 10), Fraction(1, 5)
    space = binary_tree(3)
    vals = np.zeros((4, 1, 8), dtype=object)
    for i, atom in enumerate(space.atoms):
        s = Fraction(1)
        vals[0, 0, i] = s
        for t, step in enumerate(atom, start=1):
            s *= 1 + mu + (sigma if step == "u" else -sigma)
            vals[t, 0, i] = s
    S = Process(space, vals)
    parts = doob_decompose(S)
    dA = parts.drift.increments()
    for t in range(1, 4):
        assert np.array_equal(dA[t - 1, 0], mu * S.values[t - 1, 0])
    # independent brute-force check of the same increments
    steps = oracles.drift_steps(
        [list(vals[t, 0]) for t in range(4)], list(space.prob), [list(c) for c in space.cells]
    )
    for t in range(3):
        assert list(dA[t, 0]) == steps[t]


def test_doob_recombine_and_exact_martingality():
    space = binary_tree(3)
    rng = np.random.default_rng(11)
    vals = np.zeros((4, 1, 8), dtype=object)
    for t in range(4):
        raw = [Fraction(int(v), 5) for v in rng.integers(-10, 10, size=space.n_cells(t))]
        vals[t, 0] = space.idx[t].spread(np.array(raw, dtype=object))
    X = Process(space, vals)
    parts = doob_decompose(X)
    assert np.array_equal(parts.recombine().values, X.values)
    assert martingale_check(parts.martingale).max_drift == 0


# -- compensator ---------------------------------------------------------


def test_compensator_half_mass_and_idempotence():
    space, X = fair_walk(1)
    ind = np.zeros((2, 1, 2), dtype=object)
    ind[1, 0] = [Fraction(1), Fraction(0)]  # 1{first toss = u}
    A = Process(space, ind)
    Ap = compensator(A)
    assert Ap.values[1, 0, 0] == Fraction(1, 2)
    assert Ap.values[1, 0, 1] == Fraction(1, 2)
    # compensating a predictable process reproduces its increments
    App = compensator(Ap)
    assert np.array_equal(App.increments(), Ap.increments())


def test_compensator_positive_part_of_walk():
    space, X = fair_walk(2)
    inc = np.zeros((3, 1, 4), dtype=object)
    inc[2, 0] = [max(x, Fraction(0)) for x in X.values[2, 0]]
    A = Process(space, np.cumsum(inc, axis=0), check=False)
    Ap = compensator(A)
    dAp = Ap.increments()[1, 0]
    # 1 on the "u" cell, 0 on the "d" cell
    assert list(dAp) == [Fraction(1), Fraction(1), Fraction(0), Fraction(0)]
    gap = A - Ap
    assert martingale_check(gap).max_drift == 0


# -- brackets ------------------------------------------------------------


def test_bracket_of_walk_counts_time():
    space, X = fair_walk(3)
    B = bracket(X, X)
    for t in range(4):
        assert np.all(B.values[t, 0] == Fraction(t))
    Bp = pred_bracket(X, X)
    for t in range(4):
        assert np.all(Bp.values[t, 0] == Fraction(t))


def test_pred_bracket_independent_walks_vanishes():
    space, X, Y = walk_pair(2)
    assert np.all(pred_bracket(X, Y).values == Fraction(0))


def test_pred_bracket_symmetric_bilinear():
    space, X, Y = walk_pair(2)
    XY = pred_bracket(X, Y)
    YX = pred_bracket(Y, X)
    assert np.array_equal(XY.values, YX.values)
    Z = X * 3 + Y  # martingale only if coefficients predictable, here constants
    left = pred_bracket(Z, Y)
    right = pred_bracket(X, Y) * 3 + pred_bracket(Y, Y)
    assert np.array_equal(left.values, right.values)


def test_pred_bracket_pulls_out_predictable_integrand():
    space, X = fair_walk(3)
    hv = np.zeros((4, 1, 8), dtype=object)
    for t in range(1, 4):
        hv[t, 0, :] = Fraction(t)
    H = Process(space, hv, kind="predictable")
    HX = stoch_integral(H, X)
    left = pred_bracket(HX, X)
    right = stoch_integral(H, pred_bracket(X, X))
    assert np.array_equal(left.values, right.values)


def test_bracket_oracle_agreement():
    space, X, Y = walk_pair(2)
    B = bracket(X, Y)
    want = oracles.bracket_path(
        [list(X.values[t, 0]) for t in range(3)], [list(Y.values[t, 0]) for t in range(3)]
    )
    for t in range(3):
        assert list(B.values[t, 0]) == want[t]


# -- integrals and exponentials -------------------------------------------


def test_integral_identity_integrand():
    space, X = fair_walk(2)
    H = Process(space, np.full((3, 1, 4), Fraction(1), dtype=object), kind="predictable",
                check=False)
    I = stoch_integral(H, X)
    assert np.array_equal(I.values, X.values - X.values[0])


def test_integral_time_weighted_walk():
    space, X = fair_walk(2)
    hv = np.zeros((3, 1, 4), dtype=object)
    hv[1, 0, :] = Fraction(1)
    hv[2, 0, :] = Fraction(2)
    H = Process(space, hv, kind="predictable")
    I = stoch_integral(H, X)
    uu = space.atoms.index("uu")
    assert I.values[2, 0, uu] == Fraction(3)  # 1*1 + 2*1


def test_integral_rejects_adapted_integrand():
    space, X = fair_walk(2)
    with pytest.raises(NotPredictable):
        stoch_integral(X, X)


def test_martingale_transform_is_martingale():
    space, X = fair_walk(3)
    rng = np.random.default_rng(5)
    hv = np.zeros((4, 1, 8), dtype=object)
    for t in range(1, 4):
        raw = [Fraction(int(v), 3) for v in rng.integers(-6, 7, size=space.n_cells(t - 1))]
        hv[t, 0] = space.idx[t - 1].spread(np.array(raw, dtype=object))
    H = Process(space, hv, kind="predictable")
    assert martingale_check(stoch_integral(H, X)).max_drift == 0


def test_exponential_identity_and_product():
    space, X = fair_walk(2)
    zero = Process(space, np.zeros((3, 1, 4), dtype=object), check=False)
    E0 = stoch_exponential(zero)
    assert np.all(E0.process.values == Fraction(1))
    assert not E0.flagged

    E = stoch_exponential(X)
    uu = space.atoms.index("uu")
    assert E.process.values[2, 0, uu] == Fraction(4)  # (1+1)(1+1)


def test_exponential_absorption_flagged():
    space = binary_tree(2)
    vals = np.zeros((3, 1, 4), dtype=object)
    vals[1, 0] = [Fraction(-1), Fraction(-1), Fraction(1), Fraction(1)]
    vals[2, 0] = vals[1, 0]
    X = Process(space, vals)
    E = stoch_exponential(X)
    u_atoms = [i for i, a in enumerate(space.atoms) if a.startswith("u")]
    for i in u_atoms:
        assert E.process.values[1, 0, i] == 0
        assert E.process.values[2, 0, i] == 0
        assert E.first_nonpositive[i] == 1
    assert E.flagged


# -- martingale check ------------------------------------------------------


def test_martingale_check_flags_drift():
    space = binary_tree(2)
    vals = np.zeros((3, 1, 4), dtype=object)
    for t in range(3):
        vals[t, 0, :] = Fraction(t)
    rep = martingale_check(Process(space, vals), tol=Fraction(1, 2))
    assert rep.max_drift == 1
    assert not rep.passed
    assert rep.worst_time == 1

    space_f, X = fair_walk(2)
    rep2 = martingale_check(X, tol=1e-12)
    assert rep2.passed and rep2.max_drift == 0


# -- jump support -----------------------------------------------------------


def test_jump_constraint_walk_and_constant():
    space, X = fair_walk(2)
    sup = jump_constraint(X)
    assert sup.n == 2
    assert sup.alphas[0].values[1, 0, 0] == Fraction(-1)
    assert sup.alphas[1].values[1, 0, 0] == Fraction(1)

    C = Process.constant(space, Fraction(7))
    supc = jump_constraint(C)
    assert supc.n == 1


def test_jump_constraint_trinomial():
    space = FilteredSpace(
        ["a", "b", "c"],
        [Fraction(1, 3)] * 3,
        [[0, 0, 0], [0, 1, 2]],
    )
    vals = np.zeros((2, 1, 3), dtype=object)
    vals[1, 0] = [Fraction(2), Fraction(0), Fraction(-2)]
    sup = jump_constraint(Process(space, vals))
    assert sup.n == 3


def test_jump_constraint_reconstructs_increments():
    space, X, Y = walk_pair(2)
    W = Process.stack([X, Y])
    sup = jump_constraint(W)
    assert sup.n == 4
    dW = W.increments()
    recon = np.zeros_like(dW)
    for h, alpha in enumerate(sup.alphas):
        av = alpha.values[1:]
        active = np.zeros(dW.shape, dtype=bool)
        hit = np.all(dW == av, axis=1, keepdims=True) & (sup.counts.values[1:] > h)
        recon = recon + np.where(hit, av, Fraction(0))
    assert np.array_equal(recon, dW)


# -- orthogonalize -----------------------------------------------------------


def test_orthogonalize_collinear_drops_second():
    space, X = fair_walk(2)
    W = Process.stack([X, X * 2])
    out = orthogonalize(W)
    assert np.array_equal(out.values[:, 0], X.values[:, 0])
    assert np.all(out.values[:, 1] == Fraction(0))


def test_orthogonalize_keeps_orthogonal_pair():
    space, X, Y = walk_pair(2)
    out = orthogonalize(Process.stack([X, Y]))
    cross = pred_bracket(out.component(0), out.component(1))
    assert np.all(cross.values == Fraction(0))


def test_orthogonalize_binomial_leaves_one_component():
    # one degree of freedom per binomial cell: second component collapses
    space, X = fair_walk(2)
    B = bracket(X, X)  # [X,X]_t = t, deterministic
    Y = X + B - pred_bracket(X, X)  # equals X again, collinear by construction
    W = Process.stack([X, Y])
    out = orthogonalize(W)
    assert np.any(out.values[:, 0] != 0)
    assert np.all(out.values[:, 1] == Fraction(0))
    # original components are integrals of the output
    rep = represent(W.component(0), out)
    assert rep.residual == 0


def test_orthogonalize_cross_moments_vanish():
    space, X, Y = walk_pair(2)
    W = Process.stack([X, X * 2 + Y])
    out = orthogonalize(W)
    for i in range(2):
        for j in range(2):
            if i != j:
                cross = pred_bracket(out.component(i), out.component(j))
                assert np.all(cross.values == Fraction(0))
    for i in range(2):
        assert represent(W.component(i), out).residual == 0


def test_orthogonalize_rejects_non_martingale():
    space = binary_tree(2)
    vals = np.zeros((3, 1, 4), dtype=object)
    for t in range(3):
        vals[t, 0, :] = Fraction(t)
    with pytest.raises(NotMartingale):
        orthogonalize(Process(space, vals))


# -- represent ---------------------------------------------------------------


def test_represent_self_is_identity():
    space, X = fair_walk(2)
    rep = represent(X, X)
    assert rep.residual == 0
    assert np.all(rep.integrand.values[1:] == Fraction(1))


def test_represent_binomial_ratio():
    space, X = fair_walk(2)
    rng = np.random.default_rng(2)
    terminal = np.array([Fraction(int(v), 4) for v in rng.integers(-12, 12, size=4)], dtype=object)
    M = Process.martingale_from_terminal(space, terminal)
    rep = represent(M, X)
    assert rep.residual == 0
    dM, dX = M.increments(), X.increments()
    for t in range(1, 3):
        ratio = dM[t - 1, 0] / dX[t - 1, 0]
        assert np.array_equal(rep.integrand.values[t, 0], ratio)
    # reconstruction
    I = stoch_integral(rep.integrand, X)
    assert np.array_equal(I.values, M.values - M.values[0])


def test_represent_zero_driver_fails():
    space, X = fair_walk(2)
    Z = Process(space, np.zeros((3, 1, 4), dtype=object), check=False)
    with pytest.raises(NoRepresentation):
        represent(X, Z, tol=Fraction(1, 1000))


def test_indicator_basis_spans_all_martingales():
    space = binary_tree(3)
    basis = indicator_basis(space)
    # every element is an exact martingale
    for X in basis:
        assert martingale_check(X).max_drift == 0
    # a generic martingale is represented with zero residual
    rng = np.random.default_rng(9)
    terminal = np.array([Fraction(int(v), 3) for v in rng.integers(-9, 9, size=8)], dtype=object)
    M = Process.martingale_from_terminal(space, terminal)
    W = Process.stack(basis)
    assert represent(M, W).residual == 0


# -- hypothesis properties ----------------------------------------------------


@st.composite
def small_tree_and_values(draw):
    branchings = draw(st.lists(st.integers(2, 3), min_size=1, max_size=3))
    n = 1
    partitions = [[0]]
    for b in branchings:
        n *= b
    atoms = list(range(n))
    partitions = []
    for t in range(len(branchings) + 1):
        width = 1
        for b in branchings[:t]:
            width *= b
        block = n // width
        partitions.append([i // block for i in atoms])
    weights = draw(
        st.lists(st.integers(1, 6), min_size=n, max_size=n)
    )
    total = sum(weights)
    prob = [Fraction(w, total) for w in weights]
    values = draw(
        st.lists(
            st.lists(st.integers(-8, 8), min_size=n, max_size=n),
            min_size=len(partitions),
            max_size=len(partitions),
        )
    )
    return [str(a) for a in atoms], prob, partitions, values


@settings(max_examples=30, deadline=None)
@given(small_tree_and_values())
def test_property_doob_recombines_exactly(data):
    atoms, prob, partitions, raw = data
    space = FilteredSpace(atoms, prob, partitions)
    vals = np.zeros((space.T + 1, 1, space.n_atoms), dtype=object)
    for t in range(space.T + 1):
        row = np.array([Fraction(v) for v in raw[t]], dtype=object)
        vals[t, 0] = space.condexp(row, t)  # force adaptedness
    X = Process(space, vals)
    parts = doob_decompose(X)
    assert np.array_equal(parts.recombine().values, X.values)
    assert martingale_check(parts.martingale).max_drift == 0
    gap = X - parts.drift
    assert martingale_check(gap).max_drift == 0


@settings(max_examples=30, deadline=None)
@given(small_tree_and_values())
def test_property_compensated_process_is_martingale(data):
    atoms, prob, partitions, raw = data
    space = FilteredSpace(atoms, prob, partitions)
    vals = np.zeros((space.T + 1, 1, space.n_atoms), dtype=object)
    for t in range(space.T + 1):
        row = np.array([Fraction(v) for v in raw[t]], dtype=object)
        vals[t, 0] = space.condexp(row, t)
    A = Process(space, vals)
    Ap = compensator(A)
    assert martingale_check(A - Ap).max_drift == 0
