import json
import math

import numpy as np
import pytest

import streamem as se


THETA0 = np.array([0.5, 0.5, 1.0, 3.0])


def mixture_data(n=500, seed=7):
    return se.sample_poisson_mixture(np.array([0.8, 0.2]), np.array([1.0, 3.0]), n, seed=seed)


def test_module_surface():
    assert se.__version__
    mix = se.make_poisson_mixture(2)
    assert mix.name() == "poisson-mixture-2"
    assert mix.param_dim() == 4
    assert mix.stat_dim() == 4
    assert mix.param_names() == ["omega1", "omega2", "beta1", "beta2"]
    ppca = se.Ppca1Model(6)
    assert ppca.obs_dim() == 6
    assert ppca.param_dim() == 7
    assert ppca.reduced_dim() == 7


def test_samplers_are_deterministic():
    a = mixture_data(200, seed=11)
    b = mixture_data(200, seed=11)
    c = mixture_data(200, seed=12)
    assert a.shape == (200, 1)
    assert np.array_equal(a, b)
    assert not np.array_equal(a, c)
    u = np.array([1.0, 0.0, 0.0])
    g1 = se.sample_ppca1(u, 2.0, 50, seed=9, rep=3)
    g2 = se.sample_ppca1(u, 2.0, 50, seed=9, rep=3)
    assert g1.shape == (50, 3)
    assert np.array_equal(g1, g2)


def test_mixture_estep_matches_bayes_rule():
    mix = se.make_poisson_mixture(2)
    y = np.array([2.0])
    # Posterior over components by direct computation of omega_i f_i(y).
    terms = [
        0.5 * math.exp(-1.0) * 1.0**2 / 2.0,
        0.5 * math.exp(-3.0) * 3.0**2 / 2.0,
    ]
    post = np.array(terms) / sum(terms)
    stat = mix.estep(THETA0, y)
    assert stat == pytest.approx([post[0], post[1], post[0] * 2.0, post[1] * 2.0], abs=1e-14)
    # mstep inverts the statistic: weights are the posterior masses, means the
    # per-component averages.
    theta = mix.mstep(np.array([0.25, 0.75, 0.5, 1.5]))
    assert theta == pytest.approx([0.25, 0.75, 2.0, 2.0], abs=1e-15)


def test_batch_em_ascends_and_records():
    mix = se.make_poisson_mixture(2)
    data = mixture_data()
    traj = se.batch_em(mix, data, THETA0, 12)
    assert len(traj) == 12
    assert traj.thetas().shape == (12, 4)
    assert traj.steps() == list(range(1, 13))
    ll = traj.logliks()
    assert np.all(np.diff(ll) >= -1e-10 * np.abs(ll[:-1]))
    assert np.array_equal(traj.final_theta, traj.thetas()[-1])
    assert traj.averaged_theta is None


def test_online_em_recovers_truth_and_averages():
    mix = se.make_poisson_mixture(2)
    data = mixture_data(20000, seed=21)
    traj = se.online_em(mix, data, THETA0, alpha=0.6, avg_start=0.5)
    avg = traj.averaged_theta
    assert avg is not None
    assert avg[:2] == pytest.approx([0.8, 0.2], abs=0.05)
    assert avg[2:] == pytest.approx([1.0, 3.0], abs=0.2)
    again = se.online_em(mix, data, THETA0, alpha=0.6, avg_start=0.5)
    assert np.array_equal(traj.final_theta, again.final_theta)


def test_incremental_first_tour_equals_running_average():
    mix = se.make_poisson_mixture(2)
    data = mixture_data(200, seed=31)
    inc = se.incremental_em(mix, data, THETA0, 1)
    onl = se.online_em(mix, data, THETA0, alpha=1.0)
    assert np.abs(inc.thetas() - onl.thetas()).max() <= 1e-14


def test_polyak_ruppert_matches_manual_mean():
    mix = se.make_poisson_mixture(2)
    data = mixture_data(400, seed=41)
    traj = se.online_em(mix, data, THETA0, alpha=0.6)
    n0 = 200
    manual = traj.thetas()[n0:].mean(axis=0)
    manual[:2] /= manual[:2].sum()  # the exported mean scrubs the simplex
    assert se.polyak_ruppert(mix, traj, n0) == pytest.approx(manual, abs=1e-12)


def test_ppca_estep_dimensions_and_score():
    ppca = se.Ppca1Model(5)
    u = np.zeros(5)
    u[0] = 1.0
    theta = ppca.pack(u, 2.0)
    data = se.sample_ppca1(u, 2.0, 100, seed=51)
    stat = ppca.estep(theta, data[0])
    assert stat.shape == (7,)  # conditional (|y|^2, x y, x^2) given y
    assert se.normalized_loglik(ppca, theta, data) < 0.0
    info = ppca.complete_fisher(theta)
    assert info.shape == (6, 6)  # reduced coordinates: u and lambda
    assert np.allclose(info, info.T)
    assert ppca.score(theta, data[0]).shape == (6,)


def test_run_fit_dispatch_and_tours():
    mix = se.make_poisson_mixture(2)
    data = mixture_data(300, seed=61)
    traj = se.run_fit(mix, data, THETA0, algo="online", tours=3, alpha=0.7, avg_start=0.5)
    assert len(traj.tour_loglik) == 3
    assert traj.averaged_theta is not None
    grad = se.run_fit(mix, data, THETA0, algo="titterington", tours=2)
    assert len(grad.tour_loglik) == 2
    assert grad.projection_events >= 0


def test_exceptions_translate():
    mix = se.make_poisson_mixture(2)
    with pytest.raises(se.ConfigError):
        se.online_em(mix, mixture_data(10), THETA0, alpha=0.3)
    with pytest.raises(se.DomainError):
        se.batch_em(mix, np.array([[-1.0]]), THETA0, 1)
    with pytest.raises(se.DataError):
        se.read_dataset_csv("/no/such/file.csv")
    assert issubclass(se.InadmissibleStatError, se.DomainError)


def test_experiment_plan_roundtrip():
    plan = {
        "name": "tiny",
        "model": "poisson-mix",
        "weights": [0.8, 0.2],
        "means": [1.0, 3.0],
        "init": "fixed",
        "init-weights": [0.5, 0.5],
        "init-means": [1.5, 2.5],
        "data-sizes": [100],
        "replications": 2,
        "master-seed": 42,
        "metric": "normalized-loglik",
        "estimators": [{"algo": "batch", "iters": 3}],
    }
    report = json.loads(se.run_experiment(json.dumps(plan)))
    assert report["plan"] == "tiny"
    assert report["total-runs"] == 2
    assert report["failed-runs"] == 0
    assert len(report["rows"]) == 3  # iter:1..2 and final
    row = report["rows"][0]
    assert row["metric"] == "normalized-loglik"
    assert row["samples"] == 2


def test_fisher_band_and_sd():
    assert se.asymptotic_sd_ppca_norm_u(5.0, 1.0, 20000) == pytest.approx(
        math.sqrt(72.0 / 20000.0), rel=1e-15
    )
    lo, hi = se.fisher_band_ppca_norm_u(5.0, 1.0, 20000)
    assert lo < 1.0 < hi
    assert hi - 1.0 == pytest.approx(1.0 - lo, rel=1e-12)
