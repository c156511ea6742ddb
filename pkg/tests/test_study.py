import numpy as np
import pytest

import minar.study as study
from minar.exceptions import NumericalUnderflow
from minar.study import StudySpec, parse_scenario, run_study, scenario_params

from conftest import C1, C2


def small_spec(**kw):
    base = dict(family="pl", scenarios=["A2B1C1"], sizes=[40], reps=2, seed=7, quad_nodes=4,
                tol=1e-3, max_iter=20)
    base.update(kw)
    return StudySpec(**base)


def test_scenario_values():
    p = scenario_params("gl", "(A1)(B2)(C2)")
    np.testing.assert_array_equal(p.alpha, [0.1, 0.3, 0.5])
    np.testing.assert_array_equal(p.mu, [1.0, 1.0, 1.0])
    np.testing.assert_array_equal(p.sigma, C2)
    np.testing.assert_array_equal(scenario_params("pl", "a3b1c1").sigma, C1)
    assert len(study.all_scenarios()) == 12
    with pytest.raises(ValueError):
        parse_scenario("A4B1C1")


def test_spec_defaults_and_validation():
    s = StudySpec()
    assert s.sizes == [50, 100, 300] and s.reps == 50 and s.quad_nodes == 10
    with pytest.raises(ValueError):
        StudySpec(reps=0)
    with pytest.raises(ValueError):
        StudySpec(sizes=[5])


def test_deterministic_csv():
    a = run_study(small_spec(), threads=1).to_csv()
    b = run_study(small_spec(), threads=1).to_csv()
    assert a == b
    assert a != run_study(small_spec(seed=8), threads=1).to_csv()


def test_thread_count_does_not_change_output():
    spec = small_spec(sizes=[30, 40])
    assert run_study(spec, threads=1).to_csv() == run_study(spec, threads=2).to_csv()


def test_single_replication_reports_na():
    res = run_study(small_spec(reps=1), threads=1)
    text = res.to_csv()
    row = text.splitlines()[1].split(",")
    assert row[6] == "NA"
    assert "(NA)" in res.format_table()


def test_failures_are_counted(monkeypatch):
    calls = {"n": 0}
    real = study.fit

    def flaky(x, family, config):
        calls["n"] += 1
        if calls["n"] == 2:
            raise NumericalUnderflow("forced")
        return real(x, family, config)

    monkeypatch.setattr(study, "fit", flaky)
    res = run_study(small_spec(reps=3), threads=1)
    c = res.cells[0]
    assert c.n_fail == 1 and c.n_ok == 2 and c.failure_rate == pytest.approx(1 / 3)
    assert "0.3333" in res.to_csv()


def test_seeds_are_distinct():
    s = {tuple(study.replication_seed(1, c, r).generate_state(2)) for c in range(3) for r in range(5)}
    assert len(s) == 15


def test_metadata_records_quadrature():
    meta = run_study(small_spec(reps=1), threads=1).metadata()
    assert meta["quad_nodes"] == 4 and "Gauss-Hermite" in meta["quadrature"]


def test_threads_env(monkeypatch):
    monkeypatch.setenv("MINAR_THREADS", "3")
    assert study.resolve_threads() == 3
    monkeypatch.setenv("MINAR_THREADS", "x")
    with pytest.raises(ValueError):
        study.resolve_threads()
