from fractions import Fraction

import numpy as np
import pytest

from enlarge_lab import (
    NaturalModelSpec,
    Process,
    RandomTimeExtension,
    azema,
    binary_tree,
    construct_tau_proportional,
    dies_template_check,
    indicator_basis,
    intercept_check,
    progressive_enlarge,
)
from enlarge_lab.errors import InvalidZ, NegativeMass, NotMartingale

F = Fraction


def hand_model(exact=True):
    """The worked 2-period example, same numbers as in test_enlarge.

    decay (3/4, 2/3); L flat over the first period, then (5/4, 3/4) on each
    branch. Terminal masses were computed by hand from the recursion.
    """
    base = binary_tree(2, exact=exact)
    conv = (lambda x: x) if exact else float
    l_vals = np.array(
        [
            [[conv(F(1))] * 4],
            [[conv(F(1))] * 4],
            [[conv(F(5, 4)), conv(F(3, 4)), conv(F(5, 4)), conv(F(3, 4))]],
        ],
        dtype=object if exact else np.float64,
    )
    g_vals = np.zeros((3, 1, 4), dtype=object if exact else np.float64)
    g_vals[1, 0, :] = conv(F(3, 4))
    g_vals[2, 0, :] = conv(F(2, 3))
    L = Process(base, l_vals)
    decay = Process(base, g_vals, kind="predictable")
    return base, NaturalModelSpec(L, decay=decay)


HAND_WEIGHTS = {
    "uu": [F(1, 8), F(1, 4), F(5, 8)],
    "ud": [F(3, 8), F(1, 4), F(3, 8)],
    "du": [F(1, 8), F(1, 4), F(5, 8)],
    "dd": [F(3, 8), F(1, 4), F(3, 8)],
}


def cond_mass(ext, t, u):
    """Brute-force P(tau = u | partition at t) per base atom, via dicts."""
    base = ext.base
    num = {}
    den = {}
    for e in range(ext.n_atoms):
        c = int(base.cells[t][ext.atom_base[e]])
        p = ext.f.prob[e]
        den[c] = den.get(c, base.zero()) + p
        if ext.tau[e] == u:
            num[c] = num.get(c, base.zero()) + p
    return [
        num.get(int(base.cells[t][i]), base.zero()) / den[int(base.cells[t][i])]
        for i in range(base.n_atoms)
    ]


# -- construction -------------------------------------------------------------


def test_construct_matches_hand_table():
    base, spec = hand_model()
    ext = construct_tau_proportional(spec)
    assert ext.n_levels == 3
    for i, atom in enumerate(base.atoms):
        assert list(ext.weights[i]) == HAND_WEIGHTS[atom]
    assert [list(r) for r in ext.tau_map] == [[1, 2, ext.INF]] * 4


def test_construct_pure_cox_closed_form():
    base = binary_tree(2)
    L = Process.constant(base, F(1))
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(2, 3)
    g_vals[2, 0, :] = F(3, 4)
    spec = NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))
    ext = construct_tau_proportional(spec)
    # survival product (1, 2/3, 1/2): masses are its consecutive gaps
    for i in range(4):
        assert list(ext.weights[i]) == [F(1, 3), F(1, 6), F(1, 2)]


def test_construct_one_step_collapse():
    base = binary_tree(1)
    l_vals = np.array([[[F(1), F(1)]], [[F(1), F(1)]]], dtype=object)
    g_vals = np.zeros((2, 1, 2), dtype=object)
    g_vals[1, 0, :] = F(5, 8)
    spec = NaturalModelSpec(
        Process(base, l_vals), decay=Process(base, g_vals, kind="predictable")
    )
    ext = construct_tau_proportional(spec)
    for i in range(2):
        assert list(ext.weights[i]) == [F(3, 8), F(5, 8)]


def test_construct_survival_matches_prescription_exactly():
    base, spec = hand_model()
    ext = construct_tau_proportional(spec)
    pair = azema(ext)
    assert np.array_equal(pair.z.values, spec.z().values)
    assert np.array_equal(pair.z_minus.values, spec.z_minus().values)


def test_construct_float_mode_tracks_exact():
    base_f, spec_f = hand_model(exact=False)
    ext_f = construct_tau_proportional(spec_f)
    for i, atom in enumerate(base_f.atoms):
        want = [float(x) for x in HAND_WEIGHTS[atom]]
        assert np.allclose(ext_f.weights[i].astype(float), want, atol=1e-14)
    pair = azema(ext_f)
    assert np.max(np.abs(pair.z.values - spec_f.z().values)) < 1e-12


def test_mass_martingality_and_totals():
    base, spec = hand_model()
    ext = construct_tau_proportional(spec)
    zv = spec.z().values[:, 0]
    for t in range(1, 3):
        total = np.zeros(4, dtype=object)
        total[:] = F(0)
        for u in range(1, t + 1):
            qt = np.array(cond_mass(ext, t, u), dtype=object)
            total = total + qt
            if u <= t - 1:
                prev = cond_mass(ext, t - 1, u)
                pulled = base.condexp(qt, t - 1)
                assert list(pulled) == prev
        assert np.array_equal(total, F(1) - zv[t])


# -- validation ----------------------------------------------------------------


def make_l(base, rows):
    return Process(base, np.array(rows, dtype=object).reshape(3, 1, 4))


def test_rejects_survival_reaching_one():
    base = binary_tree(2)
    L = make_l(base, [[F(1)] * 4, [F(1)] * 4, [F(8, 5), F(2, 5), F(8, 5), F(2, 5)]])
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(1)
    g_vals[2, 0, :] = F(2, 3)
    with pytest.raises(InvalidZ):
        NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))


def test_rejects_nonpositive_l():
    base = binary_tree(2)
    L = make_l(base, [[F(1)] * 4, [F(1)] * 4, [F(2), F(0), F(2), F(0)]])
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(3, 4)
    g_vals[2, 0, :] = F(3, 4)
    with pytest.raises(InvalidZ):
        NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))


def test_rejects_drifting_l():
    base = binary_tree(2)
    L = make_l(base, [[F(1)] * 4, [F(1)] * 4, [F(3, 2), F(1), F(3, 2), F(1)]])
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(3, 4)
    g_vals[2, 0, :] = F(3, 4)
    with pytest.raises(NotMartingale):
        NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))


def test_rejects_lambda_in_exact_mode():
    base = binary_tree(2)
    L = Process.constant(base, F(1))
    lam = np.zeros((3, 1, 4), dtype=object)
    lam[1, 0, :] = F(1, 2)
    lam[2, 0, :] = F(1)
    with pytest.raises(ValueError):
        NaturalModelSpec(L, lambda_=Process(base, lam, kind="predictable"))


def test_lambda_parametrization_in_float_mode():
    base = binary_tree(2, exact=False)
    L = Process.constant(base, 1.0)
    lam = np.zeros((3, 1, 4))
    lam[1, 0, :] = np.log(2.0)
    lam[2, 0, :] = 2.0 * np.log(2.0)
    spec = NaturalModelSpec(L, lambda_=Process(base, lam, kind="predictable"))
    ext = construct_tau_proportional(spec)
    pair = azema(ext)
    assert np.allclose(pair.z.values[1, 0], 0.5, atol=1e-14)
    assert np.allclose(pair.z.values[2, 0], 0.25, atol=1e-14)


def test_negative_mass_when_survival_rebounds():
    # Z_1 = 3/4 leaves 1/4 of dead mass; L jumping to 8/5 pulls Z_2 to 4/5,
    # above the reachable level, so the common rescale factor goes negative.
    base = binary_tree(2)
    L = make_l(base, [[F(1)] * 4, [F(1)] * 4, [F(8, 5), F(2, 5), F(8, 5), F(2, 5)]])
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(3, 4)
    g_vals[2, 0, :] = F(2, 3)
    spec = NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))
    with pytest.raises(NegativeMass):
        construct_tau_proportional(spec)


# -- interception --------------------------------------------------------------


def test_intercept_deterministic_time_certain():
    base = binary_tree(1)
    ext = RandomTimeExtension(base, [[F(1)]] * 2, [[1]] * 2)
    report = intercept_check(ext, [1])
    assert report.probabilities == [F(1)]
    assert report.max_probability == F(1)


def test_intercept_natural_masses():
    base, spec = hand_model()
    ext = construct_tau_proportional(spec)
    report = intercept_check(ext, [1, 2, 0])
    # P(tau=1) = E[1 - Z_1] = 1/4; P(tau=2) = E[Z_1 (1 - g_2)] = 1/4
    assert report.probabilities == [F(1, 4), F(1, 4), F(0)]
    assert report.max_probability == F(1, 4)
    hit = np.where(base.cells[1] == 0, 1, 2)
    stopped = intercept_check(ext, [hit])
    assert stopped.probabilities == [F(1, 4)]


# -- drift template --------------------------------------------------------------


def test_dies_pure_cox_is_exactly_zero():
    base = binary_tree(2)
    L = Process.constant(base, F(1))
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(2, 3)
    g_vals[2, 0, :] = F(3, 4)
    spec = NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))
    ext = construct_tau_proportional(spec)
    report = dies_template_check(ext, spec, indicator_basis(base))
    assert report.pre_residual == 0
    assert report.post_residual == 0
    assert report.passed


def test_dies_hand_model_exact():
    base, spec = hand_model()
    ext = construct_tau_proportional(spec)
    report = dies_template_check(ext, spec, indicator_basis(base))
    assert report.pre_residual == 0
    assert report.post_residual == 0
    assert report.passed
    assert report.p_fitted is None


def test_dies_fitted_coefficient_vanishes_when_template_exact():
    base, spec0 = hand_model()
    yfac = indicator_basis(base)[0]
    spec = NaturalModelSpec(spec0.L, decay=spec0.decay, yfac=yfac)
    ext = construct_tau_proportional(spec)
    report = dies_template_check(ext, spec, indicator_basis(base))
    assert report.pre_residual == 0
    assert report.post_residual == 0
    assert np.all(report.p_fitted.values == F(0))


def test_dies_never_default_has_no_post_cells():
    base = binary_tree(2)
    ext = RandomTimeExtension(base, [[F(1)]] * 4, [["inf"]] * 4)
    Z = Process.constant(base, F(1))
    report = dies_template_check(ext, Z, indicator_basis(base))
    assert report.pre_residual == 0
    assert report.post_residual == 0
    assert report.worst_post == (None, None)


def test_dies_flags_first_step_when_l_moves_early():
    # an L that moves over the first period puts the first default slice at
    # odds with the alive-side template: the residual localizes at t=1
    base = binary_tree(2)
    L = make_l(
        base,
        [[F(1)] * 4, [F(5, 4), F(5, 4), F(3, 4), F(3, 4)], [F(5, 4), F(5, 4), F(3, 4), F(3, 4)]],
    )
    g_vals = np.zeros((3, 1, 4), dtype=object)
    g_vals[1, 0, :] = F(1, 2)
    g_vals[2, 0, :] = F(2, 3)
    spec = NaturalModelSpec(L, decay=Process(base, g_vals, kind="predictable"))
    ext = construct_tau_proportional(spec)
    report = dies_template_check(ext, spec, indicator_basis(base))
    assert report.pre_residual > 0
    assert report.worst_pre[0] == 1


def test_dies_float_mode_residuals_small():
    base, spec = hand_model(exact=False)
    ext = construct_tau_proportional(spec)
    report = dies_template_check(ext, spec, indicator_basis(base))
    assert report.pre_residual < 1e-12
    assert report.post_residual < 1e-12
    assert report.passed
