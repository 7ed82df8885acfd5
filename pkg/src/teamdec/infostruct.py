"""Information structures: partitions, precedence, and classification.

Measurement information is compared through partitions.  For a static
deterministic measurement the partition lives on the exogenous space.
Dynamic and noisy measurements are compared on "support atoms": a pair
of measurement values co-occurs when some positive-prior exogenous point
and some action history give both values positive probability at once
(measurement noises are independent across decision makers, so every
in-support combination occurs).  DM i's information refines DM k's
exactly when each of DM i's values co-occurs with at most one of DM k's.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .constants import EQ_TOL
from .errors import (
    GroundMismatch,
    MalformedAnnotation,
    NonDeterministicMeasurement,
    ValidationError,
)
from .model import (
    FiniteSpace,
    RandomizedProfile,
    TeamProblem,
    induced_joint,
)


class ISClass(Enum):
    STATIC = "static"
    CLASSICAL = "classical"
    PARTIALLY_NESTED = "partially-nested"
    NONCLASSICAL = "nonclassical"


@dataclass(frozen=True)
class Partition:
    """A partition of a FiniteSpace, held in canonical form: blocks are
    sorted tuples of point indices, ordered by least element."""

    ground: FiniteSpace
    blocks: tuple

    def __init__(self, ground: FiniteSpace, blocks):
        canon = sorted(tuple(sorted(set(b))) for b in blocks if len(b) > 0)
        seen = [i for b in canon for i in b]
        if sorted(seen) != list(range(len(ground))):
            raise ValidationError(
                f"blocks do not partition ground set {ground.name!r}"
            )
        object.__setattr__(self, "ground", ground)
        object.__setattr__(self, "blocks", tuple(canon))

    @staticmethod
    def from_labels(ground: FiniteSpace, label_of) -> "Partition":
        """Partition by the value of ``label_of(point_index)``."""
        groups: dict = {}
        for i in range(len(ground)):
            groups.setdefault(label_of(i), []).append(i)
        return Partition(ground, groups.values())

    @staticmethod
    def trivial(ground: FiniteSpace) -> "Partition":
        return Partition(ground, [range(len(ground))])

    @staticmethod
    def discrete(ground: FiniteSpace) -> "Partition":
        return Partition(ground, [[i] for i in range(len(ground))])

    def block_of(self, i: int) -> tuple:
        for b in self.blocks:
            if i in b:
                return b
        raise ValidationError(f"index {i} not in ground set")

    def block_index(self) -> np.ndarray:
        """Array mapping each ground index to its block's position."""
        out = np.empty(len(self.ground), dtype=int)
        for j, b in enumerate(self.blocks):
            out[list(b)] = j
        return out

    def refines(self, other: "Partition") -> bool:
        """True iff every block of self lies inside a block of other."""
        _check_ground(self, other)
        coarse = other.block_index()
        return all(len({coarse[i] for i in b}) == 1 for b in self.blocks)


def _check_ground(p: Partition, q: Partition) -> None:
    if p.ground.points != q.ground.points:
        raise GroundMismatch(
            f"partitions on {p.ground.name!r} and {q.ground.name!r}"
        )


def meet(p: Partition, q: Partition) -> Partition:
    """Finest common coarsening: connected components of block overlap."""
    _check_ground(p, q)
    n = len(p.ground)
    parent = list(range(n))

    def find(i):
        while parent[i] != i:
            parent[i] = parent[parent[i]]
            i = parent[i]
        return i

    def union(i, j):
        ri, rj = find(i), find(j)
        if ri != rj:
            parent[ri] = rj

    for part in (p, q):
        for b in part.blocks:
            for i in b[1:]:
                union(b[0], i)
    groups: dict = {}
    for i in range(n):
        groups.setdefault(find(i), []).append(i)
    return Partition(p.ground, groups.values())


def join(p: Partition, q: Partition) -> Partition:
    """Coarsest common refinement: nonempty pairwise block intersections."""
    _check_ground(p, q)
    pi, qi = p.block_index(), q.block_index()
    groups: dict = {}
    for i in range(len(p.ground)):
        groups.setdefault((pi[i], qi[i]), []).append(i)
    return Partition(p.ground, groups.values())


def meet_all(parts) -> Partition:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = meet(out, p)
    return out


def join_all(parts) -> Partition:
    parts = list(parts)
    out = parts[0]
    for p in parts[1:]:
        out = join(out, p)
    return out


@dataclass(frozen=True)
class PrecedenceGraph:
    """Directed edges (k, i), k < i, meaning DM k's action can change
    DM i's measurement distribution."""

    n_dms: int
    edges: tuple


def affects(problem: TeamProblem, k: int, i: int) -> bool:
    """True iff some two histories differing only in u_k give DM i
    different measurement rows (exact table comparison)."""
    n = problem.n_dms
    if not (1 <= k < i <= n):
        raise ValidationError(f"need 1 <= k < i <= {n}, got k={k}, i={i}")
    table = problem.kernels[i - 1].table
    first = table.take([0], axis=k)
    return not np.array_equal(table, np.broadcast_to(first, table.shape))


def precedence_graph(problem: TeamProblem) -> PrecedenceGraph:
    n = problem.n_dms
    edges = tuple(
        (k, i) for i in range(2, n + 1) for k in range(1, i) if affects(problem, k, i)
    )
    return PrecedenceGraph(n, edges)


def sigma_field_of(problem: TeamProblem, dm: int) -> Partition:
    """Partition of the exogenous space induced by DM ``dm``'s measurement.

    Requires the measurement to be action-independent with point-mass
    rows; otherwise NonDeterministicMeasurement is raised.
    """
    n = problem.n_dms
    if not (1 <= dm <= n):
        raise ValidationError(f"dm index {dm} out of range 1..{n}")
    table = problem.kernels[dm - 1].table
    for ax in range(1, table.ndim - 1):
        sl = table.take([0], axis=ax)
        if not np.array_equal(table, np.broadcast_to(sl, table.shape)):
            raise NonDeterministicMeasurement(
                f"DM {dm}'s measurement depends on u{ax}"
            )
    rows = table.reshape(table.shape[0], -1, table.shape[-1])[:, 0, :]
    argmax = rows.argmax(axis=1)
    if np.any(rows[np.arange(rows.shape[0]), argmax] < 1.0 - EQ_TOL):
        w = int(np.argmax(rows.max(axis=1) < 1.0 - EQ_TOL))
        raise NonDeterministicMeasurement(
            f"DM {dm}'s row at omega0={problem.omega0.points[w]!r} "
            f"is not a point mass"
        )
    return Partition.from_labels(problem.omega0, lambda i: int(argmax[i]))


def _row_supports(problem: TeamProblem, dm: int) -> np.ndarray:
    """Boolean support table of DM ``dm``'s kernel, one row per history."""
    return problem.kernels[dm - 1].table > 0.0


def _refines_on_atoms(problem: TeamProblem, k: int, i: int) -> bool:
    """Does DM i's information determine DM k's, on support atoms?

    Iterates over positive-prior exogenous points and all action
    histories; early-exits on the first measurement value of DM i seen
    together with two distinct values of DM k.
    """
    sup_i = _row_supports(problem, i)  # (|O|, |U1|..|U_{i-1}|, |Yi|)
    sup_k = _row_supports(problem, k)  # (|O|, |U1|..|U_{k-1}|, |Yk|)
    pos = problem.prior.support()
    u_sizes = [len(problem.u_spaces[j]) for j in range(i - 1)]
    paired: dict = {}
    for w in pos:
        for hist in itertools.product(*(range(s) for s in u_sizes)):
            vi = np.flatnonzero(sup_i[(w, *hist)])
            vk = np.flatnonzero(sup_k[(w, *hist[: k - 1])])
            if len(vk) == 0 or len(vi) == 0:
                continue
            if len(vk) > 1:
                # several values of DM k co-occur with each value of DM i
                return False
            target = int(vk[0])
            for v in vi:
                prev = paired.setdefault(int(v), target)
                if prev != target:
                    return False
    return True


def information_nested(problem: TeamProblem, k: int, i: int) -> bool:
    """True iff DM i's information contains DM k's (k < i), compared on
    support atoms over positive-prior points and all action histories."""
    n = problem.n_dms
    if not (1 <= k < i <= n):
        raise ValidationError(f"need 1 <= k < i <= {n}, got k={k}, i={i}")
    return _refines_on_atoms(problem, k, i)


def classify(problem: TeamProblem) -> ISClass:
    """Classify the information structure.

    Problems without precedence edges are static; among those, nested
    information along the DM order upgrades the label to classical (a
    single DM is classical vacuously).  Problems with edges are
    partially nested when every edge (k, i) has DM i's information
    refining DM k's, and nonclassical otherwise.
    """
    graph = precedence_graph(problem)
    n = problem.n_dms
    if not graph.edges:
        nested = all(
            information_nested(problem, k, i)
            for i in range(2, n + 1)
            for k in range(1, i)
        )
        return ISClass.CLASSICAL if nested else ISClass.STATIC
    if all(information_nested(problem, k, i) for (k, i) in graph.edges):
        return ISClass.PARTIALLY_NESTED
    return ISClass.NONCLASSICAL


def is_partially_nested(problem: TeamProblem) -> bool:
    """Every precedence edge is covered by nested information.  Holds
    for every problem classify() does not label nonclassical."""
    return classify(problem) is not ISClass.NONCLASSICAL


def nested_along_order(problem: TeamProblem) -> bool:
    """All pairs k < i have DM i's information refining DM k's.  This is
    the gate used by the classical-midpoint realization; it covers both
    static nested structures and dynamic full-recall chains."""
    n = problem.n_dms
    return all(
        information_nested(problem, k, i)
        for i in range(2, n + 1)
        for k in range(1, i)
    )


def test_conditional_independence(joint: np.ndarray, tol: float = EQ_TOL) -> bool:
    """Is X independent of Z given Y, for a joint table over (X, Y, Z)?

    Checks P(x, z | y) = P(x | y) P(z | y) on every positive-mass slice
    of Y, to within ``tol``.
    """
    j = np.asarray(joint, dtype=float)
    if j.ndim != 3:
        raise ValidationError(f"need a 3-axis joint, got shape {j.shape}")
    if np.any(j < 0) or not np.all(np.isfinite(j)):
        raise ValidationError("joint table must be nonnegative and finite")
    total = j.sum()
    if total <= 0:
        raise ValidationError("joint table has zero total mass")
    j = j / total
    for y in range(j.shape[1]):
        sl = j[:, y, :]
        py = sl.sum()
        if py <= 0.0:
            continue
        cond = sl / py
        prod = np.outer(cond.sum(axis=1), cond.sum(axis=0))
        if np.max(np.abs(cond - prod)) > tol:
            return False
    return True


@dataclass(frozen=True)
class SubsystemAnnotation:
    """Decomposition of the exogenous space into per-DM subsystem states
    plus shared-signal factors.

    ``factor_sizes`` gives the mixed-radix factorization of the
    exogenous index (C order, leftmost factor slowest).  Each DM owns a
    disjoint set of state factors; ``shared_factors`` are visible to the
    whole team; leftover factors are treated as per-DM noises attached
    by ``noise_factors`` (optional, also disjoint).
    """

    factor_sizes: tuple
    dm_state_factors: tuple  # per DM, tuple of factor positions
    shared_factors: tuple
    dm_noise_factors: tuple = ()

    def __init__(self, factor_sizes, dm_state_factors, shared_factors, dm_noise_factors=None):
        object.__setattr__(self, "factor_sizes", tuple(int(s) for s in factor_sizes))
        object.__setattr__(
            self, "dm_state_factors", tuple(tuple(f) for f in dm_state_factors)
        )
        object.__setattr__(self, "shared_factors", tuple(shared_factors))
        if dm_noise_factors is None:
            dm_noise_factors = tuple(() for _ in self.dm_state_factors)
        object.__setattr__(
            self, "dm_noise_factors", tuple(tuple(f) for f in dm_noise_factors)
        )

    def validate_against(self, problem: TeamProblem) -> None:
        n_fac = len(self.factor_sizes)
        size = 1
        for s in self.factor_sizes:
            if s < 1:
                raise MalformedAnnotation(f"factor size {s} < 1")
            size *= s
        if size != len(problem.omega0):
            raise MalformedAnnotation(
                f"factor sizes multiply to {size}, exogenous space has "
                f"{len(problem.omega0)} points"
            )
        if len(self.dm_state_factors) != problem.n_dms:
            raise MalformedAnnotation(
                f"{len(self.dm_state_factors)} state-factor groups for "
                f"{problem.n_dms} DMs"
            )
        used: list = []
        for group in self.dm_state_factors + (self.shared_factors,) + self.dm_noise_factors:
            for f in group:
                if not (0 <= f < n_fac):
                    raise MalformedAnnotation(f"factor index {f} out of range")
                used.append(f)
        if len(used) != len(set(used)):
            raise MalformedAnnotation("factor groups overlap")


def is_stochastically_decoupled(
    problem: TeamProblem,
    annotation: SubsystemAnnotation,
    tol: float = EQ_TOL,
) -> bool:
    """Do the per-subsystem conditional-independence conditions hold?

    For each DM i the check is: its subsystem state is independent of
    the other subsystems' states, the shared factors, and the earlier
    DMs' measurements, given DM i's own measurement.  The joint is the
    exact closed loop under the uniform randomized profile (full
    support, so every reachable branch is exercised).
    """
    annotation.validate_against(problem)
    joint = induced_joint(problem, RandomizedProfile.uniform(problem))
    # split the exogenous axis into annotated factors
    joint = joint.reshape(tuple(annotation.factor_sizes) + joint.shape[1:])
    n_fac = len(annotation.factor_sizes)
    n = problem.n_dms

    def y_axis(k: int) -> int:  # k is 1-based
        return n_fac + 2 * (k - 1)

    for i in range(1, n + 1):
        x_axes = [f for f in annotation.dm_state_factors[i - 1]]
        if not x_axes:
            continue
        own = y_axis(i)
        z_axes = sorted(
            [f for f in annotation.shared_factors]
            + [
                f
                for j in range(n)
                if j != i - 1
                for f in annotation.dm_state_factors[j]
            ]
            + [y_axis(j) for j in range(1, i)]
        )
        keep = x_axes + [own] + z_axes
        drop = tuple(a for a in range(joint.ndim) if a not in keep)
        # after summing, surviving axes appear in ascending original order;
        # permute them into (X..., Y, Z...)
        sorted_keep = sorted(keep)
        perm = [sorted_keep.index(a) for a in keep]
        marg = joint.sum(axis=drop).transpose(perm)
        nx = int(np.prod([joint.shape[a] for a in x_axes]))
        ny = joint.shape[own]
        nz = int(np.prod([joint.shape[a] for a in z_axes])) if z_axes else 1
        tri = marg.reshape(nx, ny, nz)
        if not test_conditional_independence(tri, tol=tol):
            return False
    return True
