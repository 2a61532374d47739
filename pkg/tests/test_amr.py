import numpy as np
import pytest

from curladapt import edge_fem
from curladapt.amr import adaptive_solve, doerfler_mark, records_to_csv
from curladapt.estimators import EstimatorKind, indicator
from curladapt.mesh import bisect_refine, build_structured_unit_square, tag_regions
from curladapt.problems import interface_problem, paper_problem


def test_doerfler_theta_one_marks_all_nonzero():
    marked = doerfler_mark([0.0, 1.0, 2.0, 0.0, 3.0], theta=1.0)
    assert marked == {1, 2, 4}


def test_doerfler_greedy_hand_example():
    assert doerfler_mark([4.0, 1.0, 1.0, 1.0, 1.0], theta=0.5) == {0}


def test_doerfler_equal_indicators():
    assert doerfler_mark(np.ones(8), theta=0.5) == {0, 1, 2, 3}


def test_doerfler_all_zero():
    assert doerfler_mark(np.zeros(5), theta=0.7) == set()


def test_doerfler_rejects_bad_input():
    with pytest.raises(ValueError):
        doerfler_mark([1.0, 2.0], theta=0.0)
    with pytest.raises(ValueError):
        doerfler_mark([1.0, 2.0], theta=1.5)
    with pytest.raises(ValueError):
        doerfler_mark([1.0, -2.0], theta=0.5)


def test_doerfler_minimality_randomized():
    # dropping the smallest marked indicator must break the bulk bound
    rng = np.random.default_rng(123)
    for _ in range(1000):
        n = rng.integers(1, 40)
        indicators = rng.random(n) * rng.choice([0.0, 1.0, 10.0], size=n)
        theta = rng.uniform(0.05, 1.0)
        marked = doerfler_mark(indicators, theta)
        total = indicators.sum()
        if not marked:
            assert total == 0.0
            continue
        marked_sum = indicators[list(marked)].sum()
        assert marked_sum >= theta * total - 1e-12 * total
        smallest = min(marked, key=lambda t: (indicators[t], -t))
        assert marked_sum - indicators[smallest] < theta * total


def test_adaptive_stops_after_single_refinement():
    problem = paper_problem(1.0, 1.0)
    records = adaptive_solve(problem, max_dofs=41)  # initial mesh has 40 dofs
    assert len(records) == 2
    assert records[-1].n_dofs >= 41
    assert records[-1].n_marked == 0


def test_adaptive_rejects_non_increasing_budget():
    problem = paper_problem(1.0, 1.0)
    with pytest.raises(ValueError):
        adaptive_solve(problem, max_dofs=40)


def test_adaptive_records_monotone_elements_and_eta():
    problem = paper_problem(0.1, 10.0)
    records = adaptive_solve(problem, max_dofs=1200)
    elements = [r.n_elements for r in records]
    assert elements == sorted(elements)
    etas = [r.eta for r in records]
    violations = sum(1 for a, b in zip(etas, etas[1:]) if b > a)
    assert violations <= 1
    assert all(np.isfinite(r.error) for r in records)
    assert records[0].n_dofs == 40


def test_adaptive_smooth_problem_stays_quasi_uniform():
    problem = paper_problem(0.1, 10.0)
    mesh = build_structured_unit_square(4)
    while True:
        solution = edge_fem.solve(mesh, problem.coefficients, problem.f)
        if solution.dofmap.n_free >= 1200:
            break
        breakdown = indicator(solution, problem, EstimatorKind.ROBUST)
        mesh = bisect_refine(mesh, doerfler_mark(breakdown.total, 0.5))
        assert mesh.diameters.max() / mesh.diameters.min() <= 8.0


def test_adaptive_interface_concentrates_near_interface():
    # with a strong eps contrast the early marks cluster on the phase
    # boundary; fractions frozen from the first verified run (0.45, 0.50,
    # 0.42 for the first three iterations)
    problem = interface_problem(1e4, 1.0, 1.0)
    mesh = tag_regions(build_structured_unit_square(4), problem.classifier)
    for iteration in range(3):
        solution = edge_fem.solve(mesh, problem.coefficients, problem.f,
                                  rel_tol=1e-6)
        breakdown = indicator(solution, problem, EstimatorKind.ROBUST)
        marked = doerfler_mark(breakdown.total, 0.5)
        xs = mesh.vertices[mesh.triangles][:, :, 0]
        touches = np.isclose(xs, 0.5, atol=1e-12).any(axis=1)
        fraction = sum(bool(touches[t]) for t in marked) / len(marked)
        assert fraction >= 0.30
        mesh = bisect_refine(mesh, marked)


def test_records_csv(tmp_path):
    problem = paper_problem(1.0, 1.0)
    records = adaptive_solve(problem, max_dofs=60)
    path = tmp_path / "records.csv"
    records_to_csv(records, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "iter,elements,dofs,eta,error,marked"
    assert len(lines) == len(records) + 1
    first = lines[1].split(",")
    assert int(first[0]) == 0 and int(first[2]) == 40
