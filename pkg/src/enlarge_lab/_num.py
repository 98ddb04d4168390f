"""Scalar arithmetic shared by the exact and float engine modes.

Exact mode keeps ``fractions.Fraction`` values in object-dtype numpy arrays,
float mode uses float64. numpy's reductions (``add.reduceat``, ``cumsum``,
``cumprod``) and elementwise arithmetic work on both, so higher layers stay
mode-agnostic. This module collects the places where the two modes genuinely
differ: coercion, JSON round-tripping, and small dense linear solves.
"""

from __future__ import annotations

from fractions import Fraction

import numpy as np

# Singular-value cutoff for all float least-squares solves.
RCOND = 1e-12

_frac = np.frompyfunc(lambda v: v if isinstance(v, Fraction) else Fraction(v), 1, 1)


def as_scalar(value, exact: bool):
    """Coerce one number (int, float, Fraction, or a "p/q" string)."""
    if exact:
        if isinstance(value, Fraction):
            return value
        if isinstance(value, (int, str)):
            return Fraction(value)
        if isinstance(value, float):
            # exact binary value of the float, not a decimal approximation
            return Fraction(value)
        raise TypeError(f"cannot coerce {type(value).__name__} to Fraction")
    if isinstance(value, str):
        return float(Fraction(value))
    return float(value)


def as_array(data, exact: bool) -> np.ndarray:
    """Coerce nested sequences (or an array) to the mode's dtype."""
    if exact:
        arr = np.asarray(data, dtype=object)
        if arr.dtype != object:  # pragma: no cover - asarray honored dtype
            arr = arr.astype(object)
        return _frac(arr)
    arr = np.asarray(data)
    if arr.dtype == object:
        return arr.astype(np.float64)
    return np.asarray(data, dtype=np.float64)


def zeros(shape, exact: bool) -> np.ndarray:
    if exact:
        return np.full(shape, Fraction(0), dtype=object)
    return np.zeros(shape, dtype=np.float64)


def full(shape, value, exact: bool) -> np.ndarray:
    if exact:
        return np.full(shape, as_scalar(value, True), dtype=object)
    return np.full(shape, float(value), dtype=np.float64)


def to_float(arr: np.ndarray) -> np.ndarray:
    return np.asarray(arr, dtype=np.float64) if arr.dtype == object else arr


def scalar_to_json(v):
    if isinstance(v, Fraction):
        return str(v)
    return float(v)


def array_to_json(arr: np.ndarray):
    if arr.dtype == object:
        return np.frompyfunc(str, 1, 1)(arr).tolist()
    return arr.tolist()


def max_abs(arr: np.ndarray):
    """Maximum absolute entry; Fraction in exact mode, float otherwise."""
    if arr.size == 0:
        return Fraction(0) if arr.dtype == object else 0.0
    return abs(arr).max()


# ---------------------------------------------------------------------------
# Exact dense linear algebra. Systems here are tiny (a handful of unknowns,
# tens of equations), so textbook Gaussian elimination over Fractions is fine.


def _echelon(M: np.ndarray):
    """Reduced row echelon form (copy) plus pivot column indices."""
    M = M.copy()
    rows, cols = M.shape
    pivots = []
    r = 0
    for c in range(cols):
        hit = None
        for i in range(r, rows):
            if M[i, c] != 0:
                hit = i
                break
        if hit is None:
            continue
        if hit != r:
            M[[hit, r]] = M[[r, hit]]
        M[r] = M[r] / M[r, c]
        for i in range(rows):
            if i != r and M[i, c] != 0:
                M[i] = M[i] - M[i, c] * M[r]
        pivots.append(c)
        r += 1
        if r == rows:
            break
    return M, pivots


def exact_solve(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """One solution of A x = b over Fractions, free variables set to 0.

    Raises ValueError when the system is inconsistent.
    """
    m, n = A.shape
    aug = np.concatenate([A, b.reshape(m, 1)], axis=1)
    red, pivots = _echelon(aug)
    if n in pivots:
        raise ValueError("inconsistent linear system")
    x = np.full(n, Fraction(0), dtype=object)
    for r, c in enumerate(pivots):
        # free columns contribute 0, so the reduced rhs is the value
        x[c] = red[r, n] - sum(red[r, j] * x[j] for j in range(c + 1, n) if red[r, j] != 0)
    return x


def exact_nullspace(A: np.ndarray) -> list[np.ndarray]:
    """Basis of the right nullspace of A over Fractions."""
    m, n = A.shape
    red, pivots = _echelon(A)
    free = [c for c in range(n) if c not in pivots]
    basis = []
    for f in free:
        v = np.full(n, Fraction(0), dtype=object)
        v[f] = Fraction(1)
        for r, c in enumerate(pivots):
            v[c] = -red[r, f]
        basis.append(v)
    return basis


def exact_lstsq_min_norm(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least-squares solution over Fractions (pseudoinverse)."""
    # normal equations give some least-squares solution ...
    AtA = A.T.dot(A)
    Atb = A.T.dot(b)
    x0 = exact_solve(AtA, Atb)
    # ... and projecting it onto the row space makes it the min-norm one
    red, pivots = _echelon(A)
    if not pivots:
        return np.full(A.shape[1], Fraction(0), dtype=object)
    R = red[: len(pivots)]
    y = exact_solve(R.dot(R.T), R.dot(x0))
    return R.T.dot(y)


def lstsq_min_norm(A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Minimum-norm least squares in whichever mode the inputs carry."""
    if A.dtype == object or b.dtype == object:
        return exact_lstsq_min_norm(as_array(A, True), as_array(b, True))
    sol, *_ = np.linalg.lstsq(A, b, rcond=RCOND)
    return sol


def float_nullspace(A: np.ndarray) -> list[np.ndarray]:
    if A.size == 0:
        return [np.eye(A.shape[1])[i] for i in range(A.shape[1])]
    _, s, vh = np.linalg.svd(A)
    rank = int(np.sum(s > RCOND * max(A.shape) * (s[0] if s.size else 1.0)))
    return [vh[i] for i in range(rank, A.shape[1])]


def nullspace(A: np.ndarray) -> list[np.ndarray]:
    if A.dtype == object:
        return exact_nullspace(A)
    return float_nullspace(A)
