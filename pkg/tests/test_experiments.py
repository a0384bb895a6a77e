import math

import numpy as np
import pytest
from scipy.integrate import quad

from spikedrmt import laws
from spikedrmt.ensembles import EnsembleSpec, entry_law, quantile_spectrum, sample_iid_diagonal, sample_wigner
from spikedrmt.errors import InsufficientTracking
from spikedrmt.experiments import (ExperimentConfig, check_h2, check_h3a, concentration_check, gamma_statistics,
                                   goe2_gap_mean, gram_convergence, quadform_clt, run_trials,
                                   sticking_distances)
from spikedrmt.linalg import symmetric_eigvalsh
from spikedrmt.perturb import PerturbationSpec

SC = laws.semicircle()


def quantile_cfg(thetas, n, trials, seed, model="orthonormalised"):
    return ExperimentConfig(EnsembleSpec("quantile_deterministic", n, limit=SC),
                            PerturbationSpec(tuple(thetas), model), (n,), trials=trials, master_seed=seed)


def goe_cfg(thetas, n, trials, seed, model="orthonormalised", sampler="auto"):
    return ExperimentConfig(EnsembleSpec("wigner", n, invariant=True),
                            PerturbationSpec(tuple(thetas), model), (n,), trials=trials, master_seed=seed,
                            sampler=sampler)


def test_config_validation():
    with pytest.raises(ValueError):
        goe_cfg((1.5,), 10, 0, 0)
    with pytest.raises(ValueError):
        ExperimentConfig(EnsembleSpec("wigner", 10), PerturbationSpec((1.0,), "iid"), (10,),
                         alpha_prime=0.1, h3a_alpha=0.2)
    cfg = ExperimentConfig(EnsembleSpec("wigner", 10), PerturbationSpec((1.0,), "iid"), (10,), sampler="spectral")
    with pytest.raises(ValueError):
        cfg.resolved_sampler()


def test_sampler_resolution():
    assert goe_cfg((1.5,), 10, 1, 0).resolved_sampler() == "spectral"
    assert quantile_cfg((1.5,), 10, 1, 0).resolved_sampler() == "diagonal"
    cfg = ExperimentConfig(EnsembleSpec("wigner", 10, entry_law=entry_law("rademacher")),
                           PerturbationSpec((1.0,), "iid"), (10,))
    assert cfg.resolved_sampler() == "dense"


def test_run_trials_deterministic():
    cfg = goe_cfg((1.5, -2.0), 100, 3, 11)
    a = [r.to_dict() for r in run_trials(cfg)]
    b = [r.to_dict() for r in run_trials(cfg, threads=3)]
    assert a == b
    assert [(r["n"], r["trial_id"]) for r in a] == [(100, 0), (100, 1), (100, 2)]
    c = [r.to_dict() for r in run_trials(goe_cfg((1.5, -2.0), 100, 3, 12))]
    assert a != c


def test_single_trial_twice_identical():
    cfg = quantile_cfg((1.5,), 200, 1, 5)
    assert run_trials(cfg)[0].to_dict() == run_trials(cfg)[0].to_dict()


def test_record_shapes():
    cfg = goe_cfg((-2.0, 1.5), 150, 2, 3)
    rec = run_trials(cfg)[0]
    assert rec.error is None
    assert len(rec.unperturbed_high) == cfg.track + 2 and len(rec.deformed_high) == cfg.track
    assert len(rec.gamma) == 2
    rep = cfg.prediction()
    # gamma_1 belongs to the smallest eigenvalue, gamma_2 to the largest
    assert rec.gamma[0] == pytest.approx(math.sqrt(150) * (rec.deformed_low[0] - rep.spikes[0].rho))
    assert rec.gamma[1] == pytest.approx(math.sqrt(150) * (rec.deformed_high[-1] - rep.spikes[1].rho))


def test_dense_and_spectral_agree_in_law():
    from spikedrmt.stats import ks_two_sample
    d = run_trials(goe_cfg((1.5,), 120, 400, 21, sampler="dense"), threads=0)
    s = run_trials(goe_cfg((1.5,), 120, 400, 22, sampler="spectral"), threads=0)
    for key in ("deformed_high", "unperturbed_high"):
        a = [r.to_dict()[key][-1] for r in d]
        b = [r.to_dict()[key][-1] for r in s]
        assert ks_two_sample(a, b).p_value > 1e-3


@pytest.mark.slow
def test_fig1_outlier_mean():
    recs = run_trials(quantile_cfg((1.5,), 2000, 500, 1), threads=0)
    top = np.array([r.deformed_high[-1] for r in recs])
    assert top.mean() == pytest.approx(1.5 + 1 / 1.5, abs=0.01)


@pytest.mark.slow
def test_fig1_subcritical_sticks():
    recs = run_trials(quantile_cfg((0.5,), 2000, 500, 2), threads=0)
    top = np.array([r.deformed_high[-1] for r in recs])
    assert 1.95 <= top.mean() <= 2.02


@pytest.mark.slow
def test_goe_variance_of_gamma():
    cfg = goe_cfg((1.5,), 2000, 2000, 31)
    recs = run_trials(cfg, threads=0)
    rep = cfg.prediction()
    fs = gamma_statistics(recs, rep)[0]
    c = rep.spikes[0].c_alpha
    assert c == pytest.approx(0.7454, abs=1e-4)
    var = np.var(fs.gammas[:, 0], ddof=1)
    assert 0.9 * 2 * c * c <= var <= 1.1 * 2 * c * c
    # centring allowance
    assert abs(fs.gammas.mean()) <= 4 * math.sqrt(fs.target_variance / 2000) + 0.3


@pytest.mark.slow
def test_double_spike_gap_matches_goe2():
    cfg = goe_cfg((1.5, 1.5), 2000, 1000, 32)
    recs = run_trials(cfg, threads=0)
    rep = cfg.prediction()
    fs = gamma_statistics(recs, rep)[0]
    assert fs.multiplicity == 2 and np.all(fs.gammas[:, 1] >= fs.gammas[:, 0])
    gap = np.mean(fs.gammas[:, 1] - fs.gammas[:, 0])
    oracle = goe2_gap_mean(rep.spikes[0].c_alpha, "real", np.random.default_rng(0))
    assert oracle == pytest.approx(0.7454 * math.sqrt(2 * math.pi), rel=0.01)
    assert gap == pytest.approx(oracle, rel=0.10)


def test_goe2_gap_oracle_complex():
    # GUE(2) gap = 2 sqrt(((a-d)/2)^2 + |b|^2), sampled directly
    rng = np.random.default_rng(1)
    a, d = rng.standard_normal(400_000), rng.standard_normal(400_000)
    b2 = (rng.standard_normal(400_000) ** 2 + rng.standard_normal(400_000) ** 2) / 2
    direct = np.mean(2 * np.sqrt(((a - d) / 2) ** 2 + b2))
    assert goe2_gap_mean(1.0, "complex", np.random.default_rng(2)) == pytest.approx(direct, rel=0.01)


def test_sticking_trivial_r0():
    cfg = goe_cfg((), 200, 5, 41)
    recs = run_trials(cfg)
    s = sticking_distances(recs, "high", 1, "window", 0.3)
    assert np.all(s.distances == 0)
    with pytest.raises(InsufficientTracking):
        sticking_distances(recs, "high", 50, "window", 0.3)


@pytest.mark.slow
def test_sticking_subcritical_and_matched():
    recs = run_trials(goe_cfg((0.5,), 2000, 300, 42), threads=0)
    s = sticking_distances(recs, "high", 1, "window", 0.3)
    assert s.fraction_within >= 0.95
    assert s.threshold == pytest.approx(2000 ** -0.7)


def test_quadform_examples():
    rng = np.random.default_rng(3)
    r = quadform_clt(lambda n: np.ones(n), "rademacher", 200, 500, rng)
    assert r.empirical_variance == pytest.approx(0.0, abs=1e-20) and r.predicted_variance == 0.0
    r = quadform_clt(lambda n: np.ones(n), "gaussian_real", 1000, 5000, rng)
    assert r.empirical_variance == pytest.approx(2.0, abs=0.15)
    r = quadform_clt(lambda n: np.linalg.inv(2 * np.eye(n) - np.zeros((n, n))), "gaussian_real", 300, 5000, rng)
    assert r.predicted_variance == pytest.approx(0.5)
    assert r.empirical_variance == pytest.approx(0.5, abs=0.05)


def test_quadform_general_matrix():
    rng = np.random.default_rng(4)
    A = np.linalg.inv(3 * np.eye(300) - sample_wigner(300, 1.0, "gaussian_real", rng).entries)
    r = quadform_clt(A, "uniform_sym", 300, 6000, rng)
    assert r.empirical_variance == pytest.approx(r.predicted_variance, rel=0.1)
    r = quadform_clt(A, "gaussian_complex", 300, 6000, rng)
    assert r.empirical_variance == pytest.approx(r.predicted_variance, rel=0.1)


def test_concentration_examples():
    rng = np.random.default_rng(5)
    t = concentration_check(np.zeros(100), "gaussian_real", 100, 200, [0.1, 1.0], rng)
    assert np.all(t.exceedance == 0)
    deltas = np.sqrt(500) * np.array([0.5, 1, 2, 3, 4])
    t = concentration_check(np.ones(500), "gaussian_real", 500, 4000, deltas, rng)
    assert np.all(np.diff(t.exceedance) <= 0)
    fits = [concentration_check(np.ones(n), "gaussian_real", n, 4000, np.sqrt(n) * np.array([0.5, 1, 2]),
                                rng).fitted_c for n in (250, 500, 1000)]
    assert all(f > 0 for f in fits)
    assert max(fits) / min(fits) <= 1.5 / 0.5


def test_gram_convergence_examples():
    rng = np.random.default_rng(6)
    out = gram_convergence("rademacher", [100], 1, 50, rng)
    assert np.all(out[100] == 0)
    out = gram_convergence("gaussian_real", [500, 2000], 3, 400, rng)
    q = [np.quantile(out[n], 0.99) for n in (500, 2000)]
    assert max(q) / min(q) <= 1.5
    q6 = np.quantile(gram_convergence("gaussian_real", [500], 6, 400, rng)[500], 0.99)
    assert q6 <= 2 * q[0]


def test_h2_examples():
    ns = (500, 1000, 2000, 4000)
    rep = check_h2({n: quantile_spectrum(SC, n) for n in ns}, SC, [2.5])
    assert rep.passes and all(abs(row[3]) <= 0.05 for row in rep.rows)
    rng = np.random.default_rng(7)
    u = laws.uniform(0, 1)
    rep = check_h2({n: [sample_iid_diagonal(u, n, rng) for _ in range(20)] for n in ns}, u, [2.0])
    assert not rep.passes
    wig = {n: symmetric_eigvalsh(sample_wigner(n, 1.0, "gaussian_real", rng)) for n in ns}
    assert check_h2(wig, SC, [2.5], tol=0.1).passes
    with pytest.raises(ValueError):
        check_h2(wig, SC, [2.05])


def test_h3a_examples():
    # sum1 tends to G(a) = -1 only like (m_n / n)^(1/3); compare with the continuum
    # integral over the retained part of the support instead
    lam = quantile_spectrum(SC, 2000)
    rep = check_h3a(lam, 1, 0.2, "a", SC)
    cont = quad(lambda x: SC.pdf(x) / (lam[0] - x), SC.quantile(rep.m_n / 2000), 2, limit=400)[0]
    assert rep.sum1 == pytest.approx(cont, abs=1e-3) and rep.all_pass
    big = check_h3a(quantile_spectrum(SC, 200_000), 1, 0.2, "a", SC)
    assert -1.0 < big.sum1 < rep.sum1
    # arithmetic progression 0, 1, 2, ...: sum2 = sum_{k >= m_n} k^-2 = O(1)
    toy = np.arange(1000, dtype=float)
    rep = check_h3a(toy, 1, 0.2, "a", laws.uniform(0, 1000))
    assert rep.sum2 == pytest.approx(sum(1 / k**2 for k in range(4, 1000)))
    assert rep.eta2_hat == pytest.approx(2.0, abs=0.25) and rep.passes["sum2"]
    # lambda_1 = 0 with multiplicity 3 > m_n = 2: one zero gap survives the exclusion
    dup = np.concatenate([np.zeros(3), np.linspace(0.1, 1, 200)])
    rep = check_h3a(dup, 1, 0.1, "a", laws.uniform(0, 1))
    assert rep.m_n == 2
    assert not rep.passes["sum2"] and not rep.all_pass
