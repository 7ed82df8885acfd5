import itertools

import numpy as np
import pytest

from teamdec.errors import (
    GroundMismatch,
    NonDeterministicMeasurement,
    ValidationError,
)
from teamdec.infostruct import (
    ISClass,
    Partition,
    affects,
    classify,
    information_nested,
    is_partially_nested,
    is_stochastically_decoupled,
    join,
    join_all,
    meet,
    meet_all,
    precedence_graph,
    sigma_field_of,
)
from teamdec.infostruct import test_conditional_independence as check_ci
from teamdec.model import FiniteSpace

from conftest import classical_team, random_team, relay_team


def all_partitions(n):
    """Every set partition of range(n), via restricted growth strings."""
    if n == 0:
        return
    rgs = [0] * n

    def emit():
        groups = {}
        for i, g in enumerate(rgs):
            groups.setdefault(g, []).append(i)
        return list(groups.values())

    while True:
        yield emit()
        i = n - 1
        while i > 0:
            if rgs[i] <= max(rgs[:i]):
                break
            i -= 1
        if i == 0:
            return
        rgs[i] += 1
        for j in range(i + 1, n):
            rgs[j] = 0


def test_partition_canonical_form_and_refines():
    g = FiniteSpace("g", list(range(4)))
    p = Partition(g, [[3, 1], [0], [2]])
    assert p.blocks == ((0,), (1, 3), (2,))
    assert Partition.discrete(g).refines(p)
    assert p.refines(Partition.trivial(g)) and not p.refines(
        Partition.discrete(g)
    )
    with pytest.raises(ValidationError):
        Partition(g, [[0, 1], [1, 2, 3]])
    with pytest.raises(ValidationError):
        Partition(g, [[0, 1]])


def test_meet_join_match_lattice_oracle_on_all_pairs():
    """meet = finest common coarsening, join = coarsest common refinement,
    verified against an exhaustive scan of the partition lattice of a
    4-point set (15 partitions, 225 pairs)."""
    g = FiniteSpace("g", list(range(4)))
    lattice = [Partition(g, blocks) for blocks in all_partitions(4)]
    for p, q in itertools.product(lattice, repeat=2):
        m, j = meet(p, q), join(p, q)
        coarsenings = [
            c for c in lattice if p.refines(c) and q.refines(c)
        ]
        refinements = [
            c for c in lattice if c.refines(p) and c.refines(q)
        ]
        finest_coarsening = [
            c for c in coarsenings if all(c.refines(o) for o in coarsenings)
        ]
        coarsest_refinement = [
            c
            for c in refinements
            if all(o.refines(c) for o in refinements)
        ]
        assert m.blocks == finest_coarsening[0].blocks
        assert j.blocks == coarsest_refinement[0].blocks


def test_meet_join_algebra():
    g = FiniteSpace("g", list(range(5)))
    p = Partition(g, [[0, 1], [2, 3], [4]])
    q = Partition(g, [[0], [1, 2], [3, 4]])
    r = Partition(g, [[0, 4], [1, 2, 3]])
    assert meet(p, q).blocks == meet(q, p).blocks
    assert join(p, q).blocks == join(q, p).blocks
    assert meet(p, p).blocks == p.blocks and join(p, p).blocks == p.blocks
    assert (
        meet(meet(p, q), r).blocks
        == meet(p, meet(q, r)).blocks
        == meet_all([p, q, r]).blocks
    )
    assert (
        join(join(p, q), r).blocks
        == join(p, join(q, r)).blocks
        == join_all([p, q, r]).blocks
    )
    assert p.refines(meet(p, q)) and q.refines(meet(p, q))
    assert join(p, q).refines(p) and join(p, q).refines(q)


def test_partition_ground_mismatch():
    a = FiniteSpace("a", [0, 1])
    b = FiniteSpace("b", [0, 2])
    with pytest.raises(GroundMismatch):
        meet(Partition.trivial(a), Partition.trivial(b))


def test_affects_and_precedence_on_broadcast_vs_dynamic_kernels():
    static = random_team(0, dynamic=False)
    dyn = random_team(0, dynamic=True)
    assert not affects(static, 1, 2)
    assert affects(dyn, 1, 2)
    assert precedence_graph(static).edges == ()
    assert precedence_graph(dyn).edges == ((1, 2),)


def test_classify_static_and_nonclassical():
    assert classify(random_team(1, dynamic=False)) is ISClass.STATIC
    assert classify(random_team(1, dynamic=True)) is ISClass.NONCLASSICAL
    assert not is_partially_nested(random_team(1, dynamic=True))


def test_classify_classical_on_static_nested_team():
    team = classical_team(5)
    assert classify(team) is ISClass.CLASSICAL
    assert information_nested(team, 1, 2)


def test_classify_partially_nested_on_relay_chain():
    """DM 2 sees (y1, u1) exactly, so the action edge 1->2 is nested; an
    action edge exists, so the label is partially nested, not classical."""
    team = relay_team(5)
    assert precedence_graph(team).edges == ((1, 2),)
    assert information_nested(team, 1, 2)
    assert classify(team) is ISClass.PARTIALLY_NESTED
    assert is_partially_nested(team)


def test_classify_partially_nested_with_unrelated_third_dm():
    """DM 1 affects DM 2 and DM 2 sees DM 1's data (nested edge); DM 3 is
    affected by nobody, so the only edge is nested: partially nested but
    not classical (DM 3 does not see DM 2's information)."""
    base = relay_team(6)
    rng = np.random.default_rng(6)
    from teamdec.model import (
        CostTable,
        FiniteSpace,
        MeasurementKernel,
        TeamProblem,
    )

    y3 = FiniteSpace("y3", [0, 1])
    u3 = FiniteSpace("u3", [0.0, 1.0])
    rows3 = rng.dirichlet(np.ones(2), size=(len(base.omega0),))
    t3 = np.broadcast_to(
        rows3[:, None, None, :],
        (len(base.omega0), 2, 2, 2),
    ).copy()
    team = TeamProblem(
        base.omega0,
        base.prior,
        list(base.y_spaces) + [y3],
        list(base.u_spaces) + [u3],
        list(base.kernels) + [MeasurementKernel(3, t3)],
        CostTable(rng.uniform(0, 1, size=(len(base.omega0), 2, 2, 2))),
    )
    assert precedence_graph(team).edges == ((1, 2),)
    assert classify(team) is ISClass.PARTIALLY_NESTED


def test_sigma_field_requires_point_mass_kernels():
    team = random_team(2, dynamic=False)
    with pytest.raises(NonDeterministicMeasurement):
        sigma_field_of(team, 1)


def test_sigma_field_partitions_by_measurement_preimage():
    from teamdec.model import (
        CostTable,
        MeasurementKernel,
        Pmf,
        TeamProblem,
    )

    omega = FiniteSpace("w", list(range(4)))
    y1 = FiniteSpace("y1", [0, 1])
    u1 = FiniteSpace("u1", [0.0, 1.0])
    # y1 = parity of omega
    t1 = np.zeros((4, 2))
    t1[np.arange(4), np.arange(4) % 2] = 1.0
    team = TeamProblem(
        omega,
        Pmf.uniform(omega),
        [y1],
        [u1],
        [MeasurementKernel(1, t1)],
        CostTable(np.zeros((4, 2))),
    )
    part = sigma_field_of(team, 1)
    assert part.blocks == ((0, 2), (1, 3))


def test_conditional_independence_detects_product_and_coupling():
    rng = np.random.default_rng(0)
    px = rng.dirichlet(np.ones(3))
    pz = rng.dirichlet(np.ones(2))
    for _ in range(5):
        py = rng.dirichlet(np.ones(2))
        prod = np.einsum("x,y,z->xyz", px, py, pz)
        assert check_ci(prod)
    coupled = np.zeros((2, 2, 2))
    coupled[0, 0, 0] = coupled[1, 0, 1] = 0.25
    coupled[0, 1, 0] = coupled[1, 1, 1] = 0.25
    assert not check_ci(coupled)
    with pytest.raises(ValidationError):
        check_ci(np.zeros((2, 2)))
    with pytest.raises(ValidationError):
        check_ci(np.zeros((2, 2, 2)))


def test_stochastic_decoupling_verdicts_from_gallery_annotation():
    from teamdec.gallery import decoupled_example

    good = decoupled_example()
    assert is_stochastically_decoupled(good.problem, good.annotation)
    bad = decoupled_example(coupled=True)
    assert not is_stochastically_decoupled(bad.problem, bad.annotation)
