import math

import pytest

import qsed


def unit(g=1.0):
    return qsed.SystemParams(g=g, gamma=1.0, epsilon=1.0)


def test_analytic_values():
    assert qsed.qm_triple_intracavity(1.0, unit()).real == pytest.approx(-0.0174455076121506256, rel=1e-13)
    assert qsed.sed_moment_M(1.0, unit()) == pytest.approx(0.0197961027423361668, rel=1e-13)
    assert qsed.qm_external(0.1, unit(0.1)) == pytest.approx(-2.94627825494394802e-11, rel=1e-12)
    assert qsed.sed_external(0.1, unit(0.1)) == pytest.approx(8.83883476483184406e-7, rel=1e-12)


def test_errors_map_to_python_exceptions():
    p = unit()
    p.gamma2 = 2.0
    with pytest.raises(qsed.UnequalDamping):
        qsed.qm_triple_intracavity(1.0, p)
    with pytest.raises(ValueError):
        qsed.signal_to_noise(1.0, 1.0, 0.1, 0.1)
    with pytest.raises(qsed.DegenerateEnsemble):
        qsed.triple_central_moment([(1, 1, 1)] * 10, 1)


def test_crystals_match_published_couplings():
    rows = {c["name"]: c for c in qsed.crystals()}
    assert set(rows) == {"AgGaSe2", "KTP"}
    for c in rows.values():
        assert abs(c["g"] / c["published"]["g"] - 1) < 0.05
    n = qsed.samples_for_snr(1.0, 1.0, rows["AgGaSe2"]["published"]["g"], 0.1)
    assert n == pytest.approx(3.7e11, rel=0.05)


def test_triple_central_moment():
    m = qsed.triple_central_moment([(2.0, 2.0, 2.0)] * 100, 10)
    assert m.mean == 0
    assert m.std_error == 0
    assert m.n_paths == 100


def test_small_simulation_is_deterministic_and_signed():
    kw = dict(taus=[0.5, 1.0], paths=4000, seed=3, batches=20)
    a = qsed.run_intracavity_experiment(qsed.QM, unit(), **kw)
    b = qsed.run_intracavity_experiment(qsed.QM, unit(), threads=2, **kw)
    assert a.to_csv() == b.to_csv()
    assert a.taus == [0.5, 1.0]
    assert a.moments[-1].mean.real < 0
    s = qsed.run_intracavity_experiment(qsed.SED, unit(), **kw)
    assert s.moments[-1].mean.real > 0
    assert s.to_csv().startswith("tau,mean_re,mean_im,std_error,n_paths,theory,g,N,gamma,seed\n")


def test_external_estimate_runs():
    m = qsed.run_external_experiment(qsed.SED, unit(0.1), 0.1, paths=2000, seed=1, batches=10)
    assert m.n_paths == 2000
    assert math.isfinite(m.mean.real)


def test_presets(tmp_path):
    assert "fig5" in qsed.preset_names()
    assert "[scenario]" in qsed.preset_text("table1")
    code, log, err = qsed.run_preset("table1", out=str(tmp_path))
    assert code == 0, err
    assert (tmp_path / "table1.csv").exists()
    code, _, err = qsed.run_preset("no_such_preset")
    assert code == 2
