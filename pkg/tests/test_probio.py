"""JSON round-trips for problems, annotations, and strategic measures."""

import hashlib
import json

import numpy as np
import pytest

from teamdec.errors import MalformedAnnotation, ValidationError
from teamdec.gallery import decoupled_example
from teamdec.model import (
    CostTable,
    FiniteSpace,
    MeasurementKernel,
    Pmf,
    TeamProblem,
)
from teamdec.probio import (
    annotation_from_dict,
    digest_bytes,
    load_measure,
    load_problem,
    measure_from_dict,
    measure_to_dict,
    problem_from_dict,
    problem_to_dict,
    save_problem,
)
from teamdec.strategic import induce_LA, induce_LR

from conftest import random_profile, random_randomized_profile, random_team


def assert_problems_equal(a: TeamProblem, b: TeamProblem):
    assert a.name == b.name
    assert a.omega0 == b.omega0
    assert list(a.y_spaces) == list(b.y_spaces)
    assert list(a.u_spaces) == list(b.u_spaces)
    assert np.array_equal(a.prior.mass, b.prior.mass)
    for ka, kb in zip(a.kernels, b.kernels):
        assert np.array_equal(ka.table, kb.table)
    assert np.array_equal(a.cost.table, b.cost.table)


def test_problem_dict_roundtrip_static_and_dynamic():
    for seed, dynamic in [(0, False), (1, True), (2, True)]:
        problem = random_team(seed, dynamic=dynamic)
        doc = json.loads(json.dumps(problem_to_dict(problem)))
        assert_problems_equal(problem, problem_from_dict(doc))


def test_problem_file_roundtrip_digest_and_determinism(tmp_path):
    problem = random_team(3, dynamic=True)
    path = tmp_path / "team.json"
    save_problem(problem, str(path))
    loaded = load_problem(str(path))
    assert_problems_equal(problem, loaded.problem)
    assert loaded.annotation is None
    assert loaded.path == str(path)
    raw = path.read_bytes()
    assert loaded.digest == hashlib.sha256(raw).hexdigest()
    assert digest_bytes(raw) == loaded.digest

    # serialization is canonical: saving again produces identical bytes
    again = tmp_path / "team2.json"
    save_problem(problem, str(again))
    assert again.read_bytes() == raw


def test_sparse_zeros_are_omitted_and_restored(tmp_path):
    omega = FiniteSpace("w", [0, 1, 2])
    prior = Pmf(omega, [0.5, 0.0, 0.5])
    y1 = FiniteSpace("y1", ["lo", "hi"])
    u1 = FiniteSpace("u1", [0, 1])
    kernel = MeasurementKernel(1, [[1.0, 0.0], [0.0, 1.0], [1.0, 0.0]])
    cost = CostTable([[0.0, 1.0], [2.0, 0.0], [0.0, 0.0]])
    problem = TeamProblem(omega, prior, [y1], [u1], [kernel], cost, name="sparse")

    doc = problem_to_dict(problem)
    assert set(doc["prior"]) == {"0", "2"}
    assert doc["kernels"][0] == {"0": {"lo": 1.0}, "1": {"hi": 1.0}, "2": {"lo": 1.0}}
    assert set(doc["cost"]) == {"0|1", "1|0"}

    path = tmp_path / "sparse.json"
    save_problem(problem, str(path))
    assert_problems_equal(problem, load_problem(str(path)).problem)


def test_tuple_points_and_annotation_roundtrip(tmp_path):
    bundle = decoupled_example()
    path = tmp_path / "decoupled.json"
    save_problem(bundle.problem, str(path), annotation=bundle.annotation)
    loaded = load_problem(str(path))
    assert_problems_equal(bundle.problem, loaded.problem)
    # tuple-valued points survive the JSON list encoding
    assert all(isinstance(p, tuple) for p in loaded.problem.omega0.points)
    assert loaded.annotation == bundle.annotation
    loaded.annotation.validate_against(loaded.problem)


def test_missing_sections_and_bad_spaces_are_rejected():
    with pytest.raises(ValidationError):
        problem_from_dict([])
    with pytest.raises(ValidationError):
        problem_from_dict({})
    base = problem_to_dict(random_team(0))
    for section in ("spaces", "prior", "kernels", "cost"):
        broken = json.loads(json.dumps(base))
        del broken[section]
        with pytest.raises(ValidationError):
            problem_from_dict(broken)

    no_omega = json.loads(json.dumps(base))
    del no_omega["spaces"]["omega0"]
    with pytest.raises(ValidationError):
        problem_from_dict(no_omega)

    lopsided = json.loads(json.dumps(base))
    lopsided["spaces"]["actions"] = lopsided["spaces"]["actions"][:1]
    with pytest.raises(ValidationError):
        problem_from_dict(lopsided)

    not_a_dict = json.loads(json.dumps(base))
    not_a_dict["spaces"]["omega0"] = [0, 1]
    with pytest.raises(ValidationError):
        problem_from_dict(not_a_dict)


def test_unknown_labels_and_bad_arity_are_rejected():
    base = problem_to_dict(random_team(1, dynamic=True))

    bad_prior = json.loads(json.dumps(base))
    bad_prior["prior"]["ghost"] = 0.5
    with pytest.raises(ValidationError, match="unknown exogenous"):
        problem_from_dict(bad_prior)

    short_history = json.loads(json.dumps(base))
    row = next(iter(short_history["kernels"][1].values()))
    short_history["kernels"][1] = {"0": row}
    with pytest.raises(ValidationError, match="expected 2"):
        problem_from_dict(short_history)

    bad_action = json.loads(json.dumps(base))
    key, row = next(iter(bad_action["kernels"][1].items()))
    bad_action["kernels"][1]["0|ghost"] = row
    with pytest.raises(ValidationError, match="unknown action"):
        problem_from_dict(bad_action)

    bad_measurement = json.loads(json.dumps(base))
    key = next(iter(bad_measurement["kernels"][0]))
    bad_measurement["kernels"][0][key] = {"ghost": 1.0}
    with pytest.raises(ValidationError, match="unknown measurement"):
        problem_from_dict(bad_measurement)

    wrong_kernel_count = json.loads(json.dumps(base))
    wrong_kernel_count["kernels"] = wrong_kernel_count["kernels"][:1]
    with pytest.raises(ValidationError, match="kernel tables"):
        problem_from_dict(wrong_kernel_count)

    bad_cost_key = json.loads(json.dumps(base))
    bad_cost_key["cost"]["0|0"] = 1.0
    with pytest.raises(ValidationError, match="expected 3"):
        problem_from_dict(bad_cost_key)

    bad_cost_action = json.loads(json.dumps(base))
    bad_cost_action["cost"]["0|ghost|0"] = 1.0
    with pytest.raises(ValidationError, match="unknown action"):
        problem_from_dict(bad_cost_action)


def test_reserved_separator_and_string_collisions_are_rejected():
    omega = FiniteSpace("w", ["a|b", "c"])
    prior = Pmf(omega, [0.5, 0.5])
    y1 = FiniteSpace("y1", [0])
    u1 = FiniteSpace("u1", [0, 1])
    kernel = MeasurementKernel(1, [[1.0], [1.0]])
    cost = CostTable([[1.0, 2.0], [3.0, 4.0]])
    problem = TeamProblem(omega, prior, [y1], [u1], [kernel], cost)
    with pytest.raises(ValidationError, match="separator"):
        problem_to_dict(problem)

    # int 1 and string "1" collide once stringified
    omega2 = FiniteSpace("w", [1, "1"])
    problem2 = TeamProblem(omega2, Pmf(omega2, [0.5, 0.5]), [y1], [u1], [kernel], cost)
    with pytest.raises(ValidationError, match="string form"):
        problem_to_dict(problem2)


def test_annotation_parsing_errors():
    assert annotation_from_dict({}) is None
    assert annotation_from_dict({"annotations": {}}) is None
    assert annotation_from_dict({"annotations": {"subsystems": {}}}) is None

    with pytest.raises(MalformedAnnotation):
        annotation_from_dict(
            {"annotations": {"subsystems": {"factor_sizes": [2, 2]}}}
        )
    with pytest.raises(MalformedAnnotation):
        annotation_from_dict(
            {
                "annotations": {
                    "subsystems": {
                        "factor_sizes": [2, "x"],
                        "dm_state_factors": [[0], [1]],
                    }
                }
            }
        )


def test_mismatched_annotation_fails_on_load(tmp_path):
    bundle = decoupled_example()
    doc = problem_to_dict(bundle.problem, annotation=bundle.annotation)
    doc["annotations"]["subsystems"]["factor_sizes"] = [2, 2]  # product 4 != 8
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    with pytest.raises(MalformedAnnotation):
        load_problem(str(path))


def test_measure_roundtrip_deterministic_and_randomized(tmp_path):
    problem = random_team(4, dynamic=True)
    for measure in (
        induce_LA(problem, random_profile(problem, 0)),
        induce_LR(problem, random_randomized_profile(problem, 1)),
    ):
        doc = json.loads(json.dumps(measure_to_dict(measure)))
        back = measure_from_dict(problem, doc)
        # construction renormalizes total mass, so equality holds to
        # one rounding of the sum; the support must match exactly
        assert np.allclose(back.joint, measure.joint, rtol=1e-12, atol=1e-15)
        assert np.array_equal(back.joint != 0.0, measure.joint != 0.0)
        assert back.origin == measure.origin
        # only nonzero cells are written
        assert len(doc["joint"]) == int(np.count_nonzero(measure.joint))

    measure = induce_LA(problem, random_profile(problem, 2))
    path = tmp_path / "measure.json"
    path.write_text(json.dumps(measure_to_dict(measure)))
    assert np.allclose(
        load_measure(problem, str(path)).joint, measure.joint, rtol=1e-12, atol=1e-15
    )


def test_measure_parsing_errors():
    problem = random_team(5)
    measure = induce_LA(problem, random_profile(problem, 0))
    doc = measure_to_dict(measure)

    with pytest.raises(ValidationError):
        measure_from_dict(problem, {"origin": "x"})

    wrong_arity = {"joint": {"0|0": 1.0}}
    with pytest.raises(ValidationError, match="expected 5"):
        measure_from_dict(problem, wrong_arity)

    key = next(iter(doc["joint"]))
    parts = key.split("|")
    parts[0] = "ghost"
    bad_point = {"joint": {"|".join(parts): 0.5}}
    with pytest.raises(ValidationError, match="unknown point"):
        measure_from_dict(problem, bad_point)
