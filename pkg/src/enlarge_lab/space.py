"""Finite filtered probability spaces and node-indexed processes.

A space is a finite set of atoms with strictly positive probabilities and a
filtration given as a refining sequence of partitions, one per period
t = 0..T. Partitions are stored as dense integer cell ids per atom. Processes
store one value per (period, component, atom); adaptedness or predictability
is a validated constraint, not a storage format.

Everything works identically in exact mode (Fraction entries, object dtype)
and float mode (float64); see `_num`.
"""

from __future__ import annotations

import json
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from . import _num
from .errors import NotPredictable


def _dense_relabel(arr: np.ndarray) -> np.ndarray:
    """Relabel integers densely, numbering by first appearance."""
    _, first_idx, inverse = np.unique(arr, return_index=True, return_inverse=True)
    rank = np.empty(len(first_idx), dtype=np.int64)
    rank[np.argsort(first_idx, kind="stable")] = np.arange(len(first_idx))
    return rank[inverse]


class PartitionIndex:
    """Grouping of atoms into the cells of one partition.

    Stores an atom permutation that makes every cell a contiguous block, so
    grouped sums are `np.add.reduceat` over the permuted array. Works for
    object (Fraction) and float arrays alike. Cell ids must be dense.
    """

    __slots__ = ("cells", "n_cells", "order", "starts", "counts", "firsts")

    def __init__(self, cells: np.ndarray):
        cells = np.asarray(cells, dtype=np.int64)
        n = cells.shape[0]
        if n == 0:
            raise ValueError("partition over zero atoms")
        order = np.argsort(cells, kind="stable")
        sorted_cells = cells[order]
        boundaries = np.flatnonzero(np.diff(sorted_cells)) + 1
        starts = np.concatenate(([0], boundaries))
        self.cells = cells
        self.n_cells = len(starts)
        self.order = order
        self.starts = starts
        self.counts = np.diff(np.concatenate((starts, [n])))
        self.firsts = order[starts]
        if not np.array_equal(sorted_cells[starts], np.arange(self.n_cells)):
            raise ValueError("cell ids must be dense integers starting at 0")

    def sum_by_cell(self, values: np.ndarray) -> np.ndarray:
        """Sum per-atom values over each cell; values shaped (..., n_atoms)."""
        permuted = values[..., self.order]
        return np.add.reduceat(permuted, self.starts, axis=-1)

    def spread(self, cell_values: np.ndarray) -> np.ndarray:
        """Broadcast per-cell values (..., n_cells) back to atoms."""
        repeated = np.repeat(cell_values, self.counts, axis=-1)
        out = np.empty_like(repeated)
        out[..., self.order] = repeated
        return out

    def constant_on_cells(self, values: np.ndarray) -> bool:
        rep = values[..., self.firsts]
        return bool(np.all(self.spread(rep) == values))

    def atoms_of(self, cell: int) -> np.ndarray:
        s = self.starts[cell]
        return self.order[s : s + self.counts[cell]]


class FilteredSpace:
    """Finite outcome set, probabilities, and a refining partition sequence."""

    def __init__(
        self,
        atoms: Sequence[str],
        prob,
        partitions: Sequence,
        exact: bool | None = None,
    ):
        self.atoms = [str(a) for a in atoms]
        if exact is None:
            exact = _looks_exact(prob)
        self.exact = bool(exact)
        self.prob = _num.as_array(prob, self.exact)
        if self.prob.ndim != 1 or self.prob.shape[0] != len(self.atoms):
            raise ValueError("prob must be one value per atom")
        if len(set(self.atoms)) != len(self.atoms):
            raise ValueError("atom labels must be unique")
        if len(partitions) < 2:
            raise ValueError("need partitions for at least t=0 and t=1")
        self.cells = [_dense_relabel(np.asarray(p, dtype=np.int64)) for p in partitions]
        for t, c in enumerate(self.cells):
            if c.shape[0] != self.n_atoms:
                raise ValueError(f"partition at t={t} has wrong length")
        self.idx = [PartitionIndex(c) for c in self.cells]
        self._cell_prob: dict[int, np.ndarray] = {}
        self._children: dict[int, list[np.ndarray]] = {}
        self._validate()

    # -- structure -----------------------------------------------------

    @property
    def n_atoms(self) -> int:
        return len(self.atoms)

    @property
    def T(self) -> int:
        return len(self.cells) - 1

    def n_cells(self, t: int) -> int:
        return self.idx[t].n_cells

    def _validate(self) -> None:
        if np.any(_num.to_float(self.prob) <= 0.0):
            raise ValueError("atom probabilities must be strictly positive")
        total = self.prob.sum()
        if self.exact:
            if total != 1:
                raise ValueError(f"probabilities sum to {total}, expected 1")
        elif abs(float(total) - 1.0) > 1e-12:
            raise ValueError(f"probabilities sum to {total!r}, expected 1")
        for t in range(1, self.T + 1):
            idx = self.idx[t]
            parent = self.cells[t - 1]
            if not idx.constant_on_cells(parent):
                raise ValueError(f"partition at t={t} does not refine t={t - 1}")

    def zero(self):
        return Fraction(0) if self.exact else 0.0

    def one(self):
        return Fraction(1) if self.exact else 1.0

    # -- conditioning --------------------------------------------------

    def average(self, values: np.ndarray, t: int) -> np.ndarray:
        """E[values | partition at t], one entry per cell."""
        idx = self.idx[t]
        weighted = idx.sum_by_cell(values * self.prob)
        return weighted / self.cell_prob(t)

    def condexp(self, values: np.ndarray, t: int) -> np.ndarray:
        """E[values | partition at t], broadcast back to atoms."""
        return self.idx[t].spread(self.average(values, t))

    def cell_prob(self, t: int) -> np.ndarray:
        if t not in self._cell_prob:
            self._cell_prob[t] = self.idx[t].sum_by_cell(self.prob)
        return self._cell_prob[t]

    def parents(self, t: int) -> np.ndarray:
        """Cell id at t-1 containing each cell of partition t."""
        if t < 1:
            raise ValueError("parents defined for t >= 1")
        return self.cells[t - 1][self.idx[t].firsts]

    def children(self, t: int) -> list[np.ndarray]:
        """Child cell ids at t for each parent cell at t-1."""
        if t not in self._children:
            parent_of = self.parents(t)
            groups: list[list[int]] = [[] for _ in range(self.n_cells(t - 1))]
            for child, p in enumerate(parent_of):
                groups[int(p)].append(child)
            self._children[t] = [np.asarray(g, dtype=np.int64) for g in groups]
        return self._children[t]

    # -- derived spaces ------------------------------------------------

    def with_partitions(self, partitions: Sequence) -> "FilteredSpace":
        """Same atoms and probabilities under a different filtration."""
        return FilteredSpace(self.atoms, self.prob, partitions, exact=self.exact)

    def same_atoms(self, other: "FilteredSpace") -> bool:
        return self.n_atoms == other.n_atoms and self.atoms == other.atoms

    def structure_equal(self, other: "FilteredSpace") -> bool:
        return (
            self.same_atoms(other)
            and bool(np.all(self.prob == other.prob))
            and self.T == other.T
            and all(np.array_equal(a, b) for a, b in zip(self.cells, other.cells))
        )

    # -- serialization ---------------------------------------------------

    def to_json(self, processes: dict[str, "Process"] | None = None) -> dict:
        doc = {
            "atoms": list(self.atoms),
            "prob": [_num.scalar_to_json(p) for p in self.prob],
            "partitions": [c.tolist() for c in self.cells],
            "processes": {},
        }
        for name, proc in (processes or {}).items():
            doc["processes"][name] = proc.to_json()
        return doc

    @classmethod
    def from_json(cls, doc: dict, exact: bool | None = None):
        """Parse a space document; returns (space, processes)."""
        if exact is None:
            exact = _looks_exact(doc["prob"])
        space = cls(doc["atoms"], doc["prob"], doc["partitions"], exact=exact)
        processes = {
            name: Process.from_json(space, pdoc)
            for name, pdoc in doc.get("processes", {}).items()
        }
        return space, processes

    def dump(self, path, processes=None) -> None:
        with open(path, "w") as fh:
            json.dump(self.to_json(processes), fh, sort_keys=True, indent=1)
            fh.write("\n")

    def __repr__(self) -> str:
        mode = "exact" if self.exact else "float"
        return f"FilteredSpace({self.n_atoms} atoms, T={self.T}, {mode})"


def _looks_exact(data) -> bool:
    """Heuristic mode detection: any Fraction or "p/q" string means exact."""
    if isinstance(data, np.ndarray):
        return data.dtype == object
    stack = [data]
    while stack:
        item = stack.pop()
        if isinstance(item, (Fraction, str)):
            return True
        if isinstance(item, float):
            return False
        if isinstance(item, (list, tuple)):
            stack.extend(item)
    return False


class Process:
    """Process values stored per (period, component, atom).

    kind "adapted": value at t is measurable for the partition at t.
    kind "predictable": value at t is measurable for the partition at t-1,
    and the value at t=0 is zero by convention.

    `under` selects the filtration the measurability is checked against;
    it defaults to the carrier space and only differs when a process on an
    extended atom set is constrained by a coarser filtration on the same
    atoms (the carrier keeps the arrays aligned, `under` keeps the meaning).
    """

    __slots__ = ("space", "values", "kind", "dim")

    def __init__(self, space: FilteredSpace, values, kind: str = "adapted",
                 check: bool = True, under: FilteredSpace | None = None):
        if kind not in ("adapted", "predictable"):
            raise ValueError(f"unknown process kind {kind!r}")
        self.space = space
        self.kind = kind
        vals = values if isinstance(values, np.ndarray) else _num.as_array(values, space.exact)
        if (vals.dtype == object) != space.exact:
            vals = _num.as_array(vals, space.exact)
        if vals.ndim == 2:
            vals = vals.reshape(vals.shape[0], 1, vals.shape[1])
        if vals.ndim != 3 or vals.shape[0] != space.T + 1 or vals.shape[2] != space.n_atoms:
            raise ValueError("values must have shape (T+1, dim, n_atoms)")
        self.values = vals
        self.dim = vals.shape[1]
        if check:
            self._check_measurable(under or space)

    def _check_measurable(self, under: FilteredSpace) -> None:
        if not under.same_atoms(self.space):
            raise ValueError("measurability filtration lives on different atoms")
        if self.kind == "adapted":
            for t in range(self.space.T + 1):
                if not under.idx[t].constant_on_cells(self.values[t]):
                    raise ValueError(f"values at t={t} are not measurable at t={t}")
        else:
            if np.any(self.values[0] != self.space.zero()):
                raise NotPredictable("predictable process must vanish at t=0")
            for t in range(1, self.space.T + 1):
                if not under.idx[t - 1].constant_on_cells(self.values[t]):
                    raise NotPredictable(
                        f"value at t={t} is not measurable at t={t - 1}"
                    )

    # -- construction ----------------------------------------------------

    @classmethod
    def constant(cls, space: FilteredSpace, value, dim: int = 1) -> "Process":
        vals = _num.full((space.T + 1, dim, space.n_atoms), value, space.exact)
        return cls(space, vals, "adapted", check=False)

    @classmethod
    def from_increments(cls, space: FilteredSpace, dvals: np.ndarray,
                        kind: str = "adapted", cumulative: bool = True,
                        under: FilteredSpace | None = None) -> "Process":
        """Build from per-period increments (T, dim, n), zero initial value."""
        if dvals.ndim == 2:
            dvals = dvals.reshape(dvals.shape[0], 1, dvals.shape[1])
        full = _num.zeros((space.T + 1,) + dvals.shape[1:], space.exact)
        if cumulative:
            full[1:] = np.cumsum(dvals, axis=0)
        else:
            full[1:] = dvals
        return cls(space, full, kind, under=under)

    @classmethod
    def martingale_from_terminal(cls, space: FilteredSpace, terminal) -> "Process":
        """The martingale E[xT | partition at t]; exact by construction."""
        xT = _num.as_array(terminal, space.exact)
        if xT.ndim == 1:
            xT = xT.reshape(1, -1)
        vals = _num.zeros((space.T + 1,) + xT.shape, space.exact)
        for t in range(space.T + 1):
            vals[t] = space.condexp(xT, t)
        return cls(space, vals, "adapted", check=False)

    @classmethod
    def stack(cls, procs: Sequence["Process"]) -> "Process":
        """Concatenate components of same-kind processes on one space."""
        if not procs:
            raise ValueError("nothing to stack")
        space = procs[0].space
        kind = procs[0].kind
        if any(p.space is not space and not p.space.structure_equal(space) for p in procs):
            raise ValueError("stack requires a common space")
        if any(p.kind != kind for p in procs):
            raise ValueError("stack requires a common kind")
        vals = np.concatenate([p.values for p in procs], axis=1)
        return cls(space, vals, kind, check=False)

    # -- views -----------------------------------------------------------

    def increments(self) -> np.ndarray:
        """Jumps at t=1..T, shaped (T, dim, n_atoms); the jump at 0 is 0."""
        return self.values[1:] - self.values[:-1]

    def component(self, i: int) -> "Process":
        return Process(self.space, self.values[:, i : i + 1], self.kind, check=False)

    def scalar_values(self) -> np.ndarray:
        if self.dim != 1:
            raise ValueError("not a scalar process")
        return self.values[:, 0]

    def terminal(self) -> np.ndarray:
        return self.values[-1]

    def lift(self, space: FilteredSpace, atom_map: np.ndarray,
             under: FilteredSpace | None = None) -> "Process":
        """Pull values through atom_map onto a finer space's atoms."""
        vals = self.values[..., atom_map]
        return Process(space, vals, self.kind, check=under is not None, under=under)

    # -- arithmetic --------------------------------------------------------

    def _combined_kind(self, other: "Process") -> str:
        both = (self.kind, other.kind)
        return "predictable" if both == ("predictable", "predictable") else "adapted"

    def __add__(self, other):
        if isinstance(other, Process):
            return Process(self.space, self.values + other.values,
                           self._combined_kind(other), check=False)
        return Process(self.space, self.values + _num.as_scalar(other, self.space.exact),
                       self.kind, check=False)

    def __sub__(self, other):
        if isinstance(other, Process):
            return Process(self.space, self.values - other.values,
                           self._combined_kind(other), check=False)
        return Process(self.space, self.values - _num.as_scalar(other, self.space.exact),
                       self.kind, check=False)

    def __mul__(self, other):
        if isinstance(other, Process):
            return Process(self.space, self.values * other.values,
                           self._combined_kind(other), check=False)
        return Process(self.space, self.values * _num.as_scalar(other, self.space.exact),
                       self.kind, check=False)

    def __rmul__(self, other):
        return self.__mul__(other)

    def __neg__(self):
        return Process(self.space, -self.values, self.kind, check=False)

    # -- serialization -----------------------------------------------------

    def to_json(self) -> dict:
        atom_major = np.swapaxes(self.values, 1, 2)  # (T+1, atom, comp)
        return {
            "dim": self.dim,
            "kind": self.kind,
            "values": _num.array_to_json(atom_major),
        }

    @classmethod
    def from_json(cls, space: FilteredSpace, doc: dict) -> "Process":
        vals = _num.as_array(doc["values"], space.exact)
        if vals.ndim != 3:
            raise ValueError("process values must be [period][atom][component]")
        return cls(space, np.swapaxes(vals, 1, 2), doc.get("kind", "adapted"))

    def __repr__(self) -> str:
        return f"Process(dim={self.dim}, kind={self.kind}, T={self.space.T})"


def binary_tree(T: int, exact: bool = True, up_prob=None) -> FilteredSpace:
    """Binomial tree with path atoms like "udu"; fair coin by default."""
    if T < 1:
        raise ValueError("need at least one period")
    if up_prob is None:
        up_prob = Fraction(1, 2) if exact else 0.5
    p = _num.as_scalar(up_prob, exact)
    atoms = [""]
    for _ in range(T):
        atoms = [a + step for a in atoms for step in "ud"]
    prob = [
        (p if exact else p) ** a.count("u") * ((1 - p)) ** a.count("d") for a in atoms
    ]
    partitions = []
    for t in range(T + 1):
        prefixes: dict[str, int] = {}
        partitions.append([prefixes.setdefault(a[:t], len(prefixes)) for a in atoms])
    return FilteredSpace(atoms, prob, partitions, exact=exact)


_TREE_LABELS = {2: "ud", 3: "umd"}


def uniform_tree(T: int, branching: int, probs=None, exact: bool = True) -> FilteredSpace:
    """Recombining-labels product tree: every node splits the same way.

    probs gives the per-child step probabilities (defaults uniform); the
    same distribution applies at every node, so atom probabilities are
    plain products.
    """
    if T < 1:
        raise ValueError("need at least one period")
    if branching < 2:
        raise ValueError("need at least two children per node")
    labels = _TREE_LABELS.get(branching) or "abcdefghijklmnop"[:branching]
    if len(labels) < branching:
        raise ValueError("branching too large for path labels")
    if probs is None:
        probs = [
            Fraction(1, branching) if exact else 1.0 / branching
        ] * branching
    if len(probs) != branching:
        raise ValueError("one probability per child required")
    step_p = {labels[i]: _num.as_scalar(probs[i], exact) for i in range(branching)}
    total = sum(step_p.values())
    if (total != 1) if exact else abs(total - 1.0) > 1e-12:
        raise ValueError("child probabilities must sum to 1")
    atoms = [""]
    for _ in range(T):
        atoms = [a + step for a in atoms for step in labels]
    one = Fraction(1) if exact else 1.0
    prob = []
    for a in atoms:
        mass = one
        for ch in a:
            mass = mass * step_p[ch]
        prob.append(mass)
    partitions = []
    for t in range(T + 1):
        prefixes: dict[str, int] = {}
        partitions.append([prefixes.setdefault(a[:t], len(prefixes)) for a in atoms])
    return FilteredSpace(atoms, prob, partitions, exact=exact)
