import json
import math

import numpy as np
import pytest

import cqa


def test_ybus_of_tangency_case():
    g, b = cqa.build_ybus(cqa.builtin_case("ex1"))
    assert np.array_equal(g, np.zeros((2, 2)))
    assert np.array_equal(b, np.array([[-1.0, 1.0], [1.0, -1.0]]))


def test_tangency_point_is_degenerate():
    case = cqa.builtin_case("ex1", alpha=2.0)
    x = cqa.builtin_point("ex1", alpha=2.0)
    assert np.max(np.abs(cqa.pf_residual(case, x))) <= 1e-12
    report = cqa.licq_check(case, x)
    assert report["licq_holds"] is False
    assert (report["rank"], report["rows"]) == (5, 6)
    mult = cqa.kkt_solve(case, x)
    assert mult["classification"] == "RAY"
    assert cqa.kkt_residual(case, x, np.array(mult["particular"])) <= 1e-10


def test_jacobian_against_finite_differences():
    case = cqa.builtin_case("ex2")
    x = cqa.builtin_point("ex2")
    j = cqa.pf_jacobian(case, x)
    h = 1e-6
    fd = np.empty_like(j)
    for i in range(x.size):
        e = np.zeros_like(x)
        e[i] = h
        fd[:, i] = (cqa.pf_residual(case, x + e) - cqa.pf_residual(case, x - e)) / (2 * h)
    assert np.max(np.abs(j - fd)) <= 1e-6


def test_newton_and_load_model():
    case = cqa.builtin_case("ex3")
    x, iterations = cqa.newton_pf(case)
    assert iterations <= 10
    assert np.array_equal(cqa.param_jacobian(case, "load", x), -np.eye(4))
    assert cqa.check_rank_hypothesis(case, "load", x)["satisfied"] is True
    assert cqa.check_rank_hypothesis(case, "line", x)["satisfied"] is False


def test_genericity_is_deterministic():
    case = cqa.builtin_case("ex1")
    a = cqa.run_genericity_experiment(case, trials=40, seed=3)
    b = cqa.run_genericity_experiment(case, trials=40, seed=3, threads=3)
    assert a == b
    assert a["licq_failure_count"] == 0


def test_probe_sees_degeneracy_only_at_zero():
    rows = cqa.tangency_escape_probe(1.0, [0.0, 1e-2, -1e-2])
    assert [r["licq_holds"] for r in rows] == [False, True, True]


def test_case_round_trip_and_errors():
    case = cqa.builtin_case("ex2")
    again = cqa.load_case(case.to_json())
    assert again.to_json() == case.to_json()
    assert again.n_buses == 2
    doc = json.loads(case.to_json())
    doc["buses"][0]["type"] = "hub"
    with pytest.raises(cqa.InputError, match=r"\$\.buses\[0\]\.type"):
        cqa.load_case(json.dumps(doc))
    with pytest.raises(cqa.InputError):
        cqa.builtin_case("ex9")


def test_infeasible_point_raises():
    case = cqa.builtin_case("ex1")
    x = cqa.builtin_point("ex1").copy()
    x[6] = math.sqrt(2.0) + 0.1  # v2 beyond its bound
    with pytest.raises(cqa.InfeasibleError):
        cqa.licq_check(case, x)
