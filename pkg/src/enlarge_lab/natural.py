"""Default times matching a prescribed conditional survival process.

The survival process is given in factored form: a positive unit-mean-start
martingale times a predictable decay product. The constructor distributes
default mass forward period by period: each period a predictable slice of the
surviving mass defaults, and all previously assigned masses are rescaled by
one common factor chosen so the total matches the prescribed survival. That
common factor is what makes the after-default conditional laws tilt the base
measure uniformly across default times, and the predictable new mass is what
keeps the alive-side tilt equal to the survival martingale increment over the
lagged survival value.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _num
from .calculus import doob_decompose, drift_increments, martingale_check, pred_bracket
from .enlarge import progressive_enlarge, RandomTimeExtension
from .errors import InvalidZ, NegativeMass, NotMartingale
from .space import FilteredSpace, Process


class NaturalModelSpec:
    """Inputs for the proportional default-time constructor.

    L is a strictly positive martingale starting at 1. The hazard enters
    either as `decay` (predictable per-period survival factors in (0, 1],
    the only form exact mode supports) or as `lambda_` (a nondecreasing
    predictable cumulative hazard, float mode). p and yfac are optional:
    a bounded predictable vector and an auxiliary vector martingale used by
    the after-default drift template fit.
    """

    def __init__(
        self,
        L: Process,
        decay: Process | None = None,
        lambda_: Process | None = None,
        p: Process | None = None,
        yfac: Process | None = None,
    ):
        if (decay is None) == (lambda_ is None):
            raise ValueError("give exactly one of decay or lambda_")
        space = L.space
        self.space = space
        if L.dim != 1:
            raise ValueError("L must be scalar")
        if np.any(_num.to_float(L.values) <= 0.0):
            raise InvalidZ("L must be strictly positive")
        if np.any(L.values[0, 0] != space.one()):
            raise ValueError("L must start at 1")
        report = martingale_check(L, tol=None if space.exact else 1e-12)
        if not report.passed:
            raise NotMartingale(
                f"L must be a martingale, drift {float(report.max_drift):.3g}", report
            )
        self.L = L

        if lambda_ is not None:
            if space.exact:
                raise ValueError("exact mode takes the decay parametrization")
            if lambda_.kind != "predictable":
                raise ValueError("cumulative hazard must be predictable")
            dlam = lambda_.increments()
            if np.any(dlam < 0.0):
                raise ValueError("cumulative hazard must be nondecreasing")
            g_vals = np.zeros_like(lambda_.values)
            g_vals[1:] = np.exp(-dlam)
            decay = Process(space, g_vals, "predictable", check=False)
        if decay.kind != "predictable":
            raise ValueError("decay factors must be predictable")
        if decay.dim != 1:
            raise ValueError("decay must be scalar")
        gv = _num.to_float(decay.values[1:])
        if np.any(gv <= 0.0) or np.any(gv > 1.0):
            raise ValueError("decay factors must lie in (0, 1]")
        self.decay = decay
        self.p = p
        self.yfac = yfac
        self._validate_z()

    def _validate_z(self) -> None:
        z = _num.to_float(self.z().values)
        if np.any(z <= 0.0):
            raise InvalidZ("survival process must stay strictly positive")
        if np.any(z[1:] >= 1.0):
            raise InvalidZ("survival process must stay strictly below 1 after t=0")

    def survival_factor(self) -> Process:
        """Cumulative decay product, 1 at t=0."""
        space = self.space
        vals = _num.zeros((space.T + 1, 1, space.n_atoms), space.exact)
        vals[0, 0] = space.one()
        vals[1:, 0] = np.cumprod(self.decay.values[1:, 0], axis=0)
        return Process(space, vals, "adapted", check=False)

    def z(self) -> Process:
        """The prescribed conditional survival probabilities."""
        return self.L * self.survival_factor()

    def z_minus(self) -> Process:
        z = self.z()
        vals = _num.zeros(z.values.shape, self.space.exact)
        vals[0, 0, :] = self.space.one()
        vals[1:] = z.values[:-1]
        return Process(self.space, vals, "adapted", check=False)

    @classmethod
    def from_json(cls, processes: dict[str, Process], doc: dict) -> "NaturalModelSpec":
        """Resolve process references ({"L": name, "decay"/"Lambda": name, ...})."""

        def pick(key):
            name = doc.get(key)
            if name is None:
                return None
            if name not in processes:
                raise ValueError(f"unknown process reference {name!r} for {key}")
            return processes[name]

        return cls(
            L=pick("L"),
            decay=pick("decay"),
            lambda_=pick("Lambda"),
            p=pick("p"),
            yfac=pick("Yfac"),
        )


def construct_tau_proportional(
    spec: NaturalModelSpec,
    space: FilteredSpace | None = None,
    tol: float = 1e-12,
) -> RandomTimeExtension:
    """Build a random time whose conditional survival equals spec's exactly.

    Masses move forward one period at a time. The first period's default
    mass is forced by the survival target. Afterwards the new mass is the
    predictable slice of the surviving mass, and the previously assigned
    masses all scale by the single factor that makes the total close; a
    negative factor means the target survival rose faster than the surviving
    mass allows, reported as NegativeMass. Terminal masses become the level
    weights of the extension, so the level marginals reproduce every
    intermediate conditional law by the martingale property of the masses.
    """
    base = spec.space
    if space is not None and not base.same_atoms(space):
        raise ValueError("spec processes live on a different space")
    zv = spec.z().values[:, 0]  # (T+1, n)
    gv = spec.decay.values[:, 0]
    T, n = base.T, base.n_atoms
    one = base.one()

    q = _num.zeros((0, n), base.exact)
    for t in range(1, T + 1):
        if t == 1:
            q = (one - zv[1])[None, :]
            continue
        new = zv[t - 1] * (one - gv[t])
        scale = ((one - zv[t]) - new) / (one - zv[t - 1])
        if base.exact:
            if np.any(scale < 0):
                raise NegativeMass(
                    f"surviving mass cannot cover the target at t={t}"
                )
        else:
            if np.any(scale < -tol):
                raise NegativeMass(
                    f"surviving mass cannot cover the target at t={t}"
                )
            scale = np.maximum(scale, 0.0)
        q = np.concatenate([q * scale[None, :], new[None, :]], axis=0)

    weights = np.concatenate([q.T, zv[T][:, None]], axis=1)  # (n, T+1)
    tau_map = [list(range(1, T + 1)) + ["inf"]] * n
    return RandomTimeExtension(base, weights, tau_map)


@dataclass
class InterceptReport:
    """Coincidence probabilities of the random time with supplied times."""

    probabilities: list
    max_probability: object

    def as_dict(self) -> dict:
        return {
            "probabilities": [float(p) for p in self.probabilities],
            "max_probability": float(self.max_probability),
        }


def intercept_check(ext: RandomTimeExtension, times) -> InterceptReport:
    """Exact probability that the random time lands on each supplied time.

    Entries of `times` are either a single period or one period per base
    atom; periods beyond the horizon never coincide (the time at infinity is
    not counted as a hit).
    """
    base = ext.base
    probs = []
    for R in times:
        if np.isscalar(R):
            R = np.full(base.n_atoms, int(R), dtype=np.int64)
        else:
            R = np.asarray(R, dtype=np.int64)
        r_ext = R[ext.atom_base]
        hit = (ext.tau == r_ext) & (r_ext <= base.T)
        p = ext.f.prob[hit].sum() if hit.any() else base.zero()
        probs.append(p)
    mx = max(probs, key=float) if probs else base.zero()
    return InterceptReport(probs, mx)


@dataclass
class DiesReport:
    """Residuals of the two-regime drift template.

    The alive side is fully determined (multiplier one over lagged
    survival); the after-default side fixes the mirrored multiplier and
    fits one free coefficient vector per (period, cell) against the
    auxiliary factor's brackets. p_fitted is None when no auxiliary factor
    was supplied.
    """

    pre_residual: object
    post_residual: object
    p_fitted: Process | None
    worst_pre: tuple
    worst_post: tuple
    tol: object
    passed: bool

    def as_dict(self) -> dict:
        return {
            "pre_residual": float(self.pre_residual),
            "post_residual": float(self.post_residual),
            "passed": bool(self.passed),
        }


def dies_template_check(
    ext: RandomTimeExtension,
    spec_or_z,
    basis: list[Process],
    tol=None,
) -> DiesReport:
    """Compare enlarged-filtration drifts against the two-regime template.

    On cells still alive at t-1 the drift increment of every basis
    martingale must equal its bracket increment with the survival
    martingale part, divided by lagged survival. On defaulted cells the
    template is the mirrored multiplier plus an optional fitted term against
    the auxiliary factor. Accepts either a model spec or the survival
    process itself.
    """
    base = ext.base
    if isinstance(spec_or_z, NaturalModelSpec):
        Z = spec_or_z.z()
        Y = spec_or_z.yfac
    else:
        Z = spec_or_z
        Y = None
    if tol is None:
        tol = 0 if base.exact else 1e-10
    enl = progressive_enlarge(ext)
    g = enl.g
    M = doob_decompose(Z).martingale

    # one stacked sweep: component i*dim+j of a bracket against the stack
    # is the bracket with component j, so per-element loops are not needed
    stacked = Process(
        base,
        np.concatenate([Xb.values for Xb in basis], axis=1),
        "adapted",
        check=False,
    )
    mdim = stacked.dim
    actual = drift_increments(enl.lift(stacked), under=g)
    br_m = pred_bracket(M, stacked).increments()[..., ext.atom_base]
    br_y = None
    if Y is not None:
        raw = pred_bracket(Y, stacked).increments()[..., ext.atom_base]
        br_y = raw.reshape(raw.shape[0], Y.dim, mdim, raw.shape[-1])

    zvals = Z.values[:, 0]
    dim_y = Y.dim if Y is not None else 0
    p_vals = _num.zeros((g.T + 1, max(dim_y, 1), g.n_atoms), g.exact)
    pre_res = g.zero()
    post_res = g.zero()
    worst_pre = (None, None)
    worst_post = (None, None)
    for t in range(1, g.T + 1):
        pidx = g.idx[t - 1]
        for cell in range(pidx.n_cells):
            first = pidx.firsts[cell]
            zp = zvals[t - 1, ext.atom_base[first]]
            alive = ext.tau[first] > t - 1
            if alive:
                gap = _num.max_abs(abs(actual[t - 1, :, first] - br_m[t - 1, :, first] / zp))
                if gap > pre_res:
                    pre_res = gap
                    worst_pre = (t, cell)
                continue
            rhs = actual[t - 1, :, first] + br_m[t - 1, :, first] / (base.one() - zp)
            if Y is not None:
                A = br_y[t - 1, :, :, first].T
                sol = _num.as_array(_num.lstsq_min_norm(A, rhs), g.exact)
                gap = _num.max_abs(A.dot(sol) - rhs)
                p_vals[t, :, pidx.atoms_of(cell)] = sol[None, :]
            else:
                gap = _num.max_abs(rhs)
            if gap > post_res:
                post_res = gap
                worst_post = (t, cell)
    p_fitted = (
        Process(g, p_vals, "predictable", check=False) if Y is not None else None
    )
    passed = bool(pre_res <= tol and post_res <= tol)
    return DiesReport(pre_res, post_res, p_fitted, worst_pre, worst_post, tol, passed)
