import math

import numpy as np
import pytest
from scipy import special

from genhai import svi
from genhai.distributions import GaussianChol
from genhai.rng import make_rng
from genhai.subprograms import Prior, layout_for, registry_specs

SPECS = registry_specs()


def _fake_batch(spec, n, seed=0):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, spec.input_dim)) * 0.5
    if spec.family.value == "bernoulli_glm":
        y = rng.integers(0, 2, size=n)
    elif spec.family.value == "censored_negbinom_glm":
        y = rng.integers(0, spec.censor_bound + 1, size=n)
    else:
        y = np.exp(rng.standard_normal(n) * 0.6)
    return X, y


class TestElboEstimate:
    """Frozen closed-form oracle: with a point-mass-like posterior and eps=0,
    the ELBO is loglik(mean)*scale + prior(mean) - entropy-free log q(mean)."""

    def test_matches_closed_form(self):
        spec = SPECS["test_result"]
        d = layout_for(spec).total_dim
        mean = np.linspace(-0.5, 0.5, d)
        chol = np.eye(d) * 0.2
        posterior = GaussianChol(mean=mean, chol=chol)
        prior = Prior()
        X, y = _fake_batch(spec, 32, seed=1)
        eps = np.zeros(d)
        value, (gm, gc) = svi.elbo_estimate(
            make_rng(0), (X, y), posterior, spec, prior, scale=2.0, eps=eps
        )
        eta = X @ mean[:-1] + mean[-1]
        ll = float(np.sum(eta * y - np.logaddexp(0.0, eta)))
        log_prior = float(-0.5 * mean @ mean - 0.5 * d * math.log(2 * math.pi))
        log_q = -d * math.log(0.2) - 0.5 * d * math.log(2 * math.pi)
        assert value == pytest.approx(2.0 * ll + log_prior - log_q, rel=1e-10)

    def test_gradient_chol_diag_entropy(self):
        # with eps = 0 the chol gradient is purely the entropy term 1/L_ii
        spec = SPECS["test_result"]
        d = layout_for(spec).total_dim
        posterior = GaussianChol(mean=np.zeros(d), chol=np.eye(d) * 0.5)
        X, y = _fake_batch(spec, 16, seed=2)
        _, (gm, gc) = svi.elbo_estimate(
            make_rng(0), (X, y), posterior, spec, Prior(), eps=np.zeros(d)
        )
        np.testing.assert_allclose(np.diag(gc), 2.0)
        assert np.all(gc[np.triu_indices(d, 1)] == 0.0)

    def test_gradient_mean_matches_fd(self):
        for name in ("test_result", "icu_days", "delay_after_positive", "delay_after_negative"):
            spec = SPECS[name]
            d = layout_for(spec).total_dim
            rng = np.random.default_rng(7)
            mean = rng.standard_normal(d) * 0.2
            if name == "icu_days":
                # keep the censoring tail well away from underflow
                mean[layout_for(spec).slices["c"]] = 1.2
            chol = np.eye(d) * 0.3
            prior = Prior()
            X, y = _fake_batch(spec, 24, seed=3)
            eps = rng.standard_normal(d)

            def value_at(m):
                v, _ = svi.elbo_estimate(
                    make_rng(0), (X, y), GaussianChol(mean=m, chol=chol), spec, prior,
                    scale=1.5, eps=eps,
                )
                return v

            _, (gm, _) = svi.elbo_estimate(
                make_rng(0), (X, y), GaussianChol(mean=mean, chol=chol), spec, prior,
                scale=1.5, eps=eps,
            )
            h = 1e-6
            for i in range(0, d, max(d // 6, 1)):
                mp, mm = mean.copy(), mean.copy()
                mp[i] += h
                mm[i] -= h
                fd = (value_at(mp) - value_at(mm)) / (2 * h)
                assert gm[i] == pytest.approx(fd, rel=1e-4, abs=1e-5), (name, i)

    def test_gradient_chol_matches_fd(self):
        spec = SPECS["test_result"]
        d = layout_for(spec).total_dim
        rng = np.random.default_rng(9)
        mean = rng.standard_normal(d) * 0.2
        chol = np.tril(rng.standard_normal((d, d)) * 0.05)
        chol[np.diag_indices(d)] = 0.3
        prior = Prior()
        X, y = _fake_batch(spec, 24, seed=4)
        eps = rng.standard_normal(d)

        def value_at(L):
            v, _ = svi.elbo_estimate(
                make_rng(0), (X, y), GaussianChol(mean=mean, chol=L), spec, prior, eps=eps
            )
            return v

        _, (_, gc) = svi.elbo_estimate(
            make_rng(0), (X, y), GaussianChol(mean=mean, chol=chol), spec, prior, eps=eps
        )
        h = 1e-6
        checked = 0
        for i in range(d):
            for j in range(0, i + 1, max(d // 4, 1)):
                Lp, Lm = chol.copy(), chol.copy()
                Lp[i, j] += h
                Lm[i, j] -= h
                fd = (value_at(Lp) - value_at(Lm)) / (2 * h)
                assert gc[i, j] == pytest.approx(fd, rel=1e-4, abs=1e-5), (i, j)
                checked += 1
        assert checked > d

    def test_empty_batch_rejected(self):
        spec = SPECS["test_result"]
        d = layout_for(spec).total_dim
        posterior = GaussianChol(mean=np.zeros(d), chol=np.eye(d))
        with pytest.raises(ValueError):
            svi.elbo_estimate(
                make_rng(0),
                (np.zeros((0, spec.input_dim)), np.zeros(0)),
                posterior,
                spec,
                Prior(),
            )

    def test_nonfinite_diagnosed(self):
        spec = SPECS["delay_after_positive"]
        d = layout_for(spec).total_dim
        mean = np.zeros(d)
        mean[-1] = -800.0  # sigma underflows, 1/sigma^2 overflows to inf
        posterior = GaussianChol(mean=mean, chol=np.eye(d) * 1e-9)
        X, y = _fake_batch(spec, 8, seed=5)
        with pytest.raises(svi.NumericError, match="delay_after_positive"):
            svi.elbo_estimate(make_rng(0), (X, y), posterior, spec, Prior(), eps=np.zeros(d))


class TestAdam:
    def test_first_step_is_lr_sized(self):
        opt = svi._Adam((2,), lr=0.1)
        out = opt.step(np.zeros(2), np.array([1.0, -1.0]))
        np.testing.assert_allclose(out, [0.1, -0.1], atol=1e-8)

    def test_quadratic_convergence(self):
        # maximize -(x-3)^2 by ascent on its gradient
        opt = svi._Adam((1,), lr=0.1)
        x = np.zeros(1)
        for _ in range(500):
            x = opt.step(x, -2.0 * (x - 3.0))
        assert x[0] == pytest.approx(3.0, abs=1e-3)


class TestCholParameterization:
    def test_softplus_inverse_round_trip(self):
        for y in (0.01, 0.1, 1.0, 5.0):
            assert svi._softplus(svi._softplus_inv(y)) == pytest.approx(y)

    def test_build_chol_full(self):
        d = 3
        raw = np.arange(d * d, dtype=float) * 0.1
        L = svi._build_chol(raw, d, full_cov=True)
        assert np.all(np.triu(L, 1) == 0)
        assert np.all(np.diag(L) > 0)
        np.testing.assert_allclose(np.diag(L), svi._softplus(raw.reshape(d, d).diagonal()))

    def test_build_chol_diag(self):
        raw = np.array([-1.0, 0.0, 2.0])
        L = svi._build_chol(raw, 3, full_cov=False)
        np.testing.assert_allclose(L, np.diag(svi._softplus(raw)))


def _bernoulli_table(n, p, dim, seed=0):
    rng = np.random.default_rng(seed)
    X = np.zeros((n, dim))
    y = (rng.random(n) < p).astype(int)
    return X, y


class TestFit:
    def test_recovers_intercept(self):
        spec = SPECS["first_dialysis"]
        X, y = _bernoulli_table(4000, 0.3, spec.input_dim, seed=1)
        config = svi.TrainConfig(steps=1500, batch_size=256, seed=0)
        fitted, trace = svi.fit((X, y), spec, Prior(), config)
        c = fitted.posterior.mean[-1]
        assert special.expit(c) == pytest.approx(y.mean(), abs=0.03)
        assert len(trace.elbo) == 1500

    def test_deterministic(self):
        spec = SPECS["first_dialysis"]
        X, y = _bernoulli_table(500, 0.4, spec.input_dim, seed=2)
        config = svi.TrainConfig(steps=50, batch_size=128, seed=7)
        f1, t1 = svi.fit((X, y), spec, Prior(), config)
        f2, t2 = svi.fit((X, y), spec, Prior(), config)
        np.testing.assert_array_equal(f1.posterior.mean, f2.posterior.mean)
        np.testing.assert_array_equal(f1.posterior.chol, f2.posterior.chol)
        assert t1.elbo == t2.elbo

    def test_seed_changes_result(self):
        spec = SPECS["first_dialysis"]
        X, y = _bernoulli_table(500, 0.4, spec.input_dim, seed=2)
        f1, _ = svi.fit((X, y), spec, Prior(), svi.TrainConfig(steps=50, seed=1))
        f2, _ = svi.fit((X, y), spec, Prior(), svi.TrainConfig(steps=50, seed=2))
        assert not np.array_equal(f1.posterior.mean, f2.posterior.mean)

    def test_elbo_improves(self):
        spec = SPECS["first_dialysis"]
        X, y = _bernoulli_table(2000, 0.2, spec.input_dim, seed=3)
        _, trace = svi.fit((X, y), spec, Prior(), svi.TrainConfig(steps=800, seed=0))
        sm = trace.smoothed()
        assert sm[-1] > sm[0]

    def test_diag_cov(self):
        spec = SPECS["first_dialysis"]
        X, y = _bernoulli_table(500, 0.4, spec.input_dim, seed=2)
        config = svi.TrainConfig(steps=50, seed=0, full_cov=False)
        fitted, _ = svi.fit((X, y), spec, Prior(), config)
        L = fitted.posterior.chol
        assert np.all(L == np.diag(np.diag(L)))

    def test_empty_dataset(self):
        spec = SPECS["first_dialysis"]
        with pytest.raises(svi.TrainingError):
            svi.fit((np.zeros((0, spec.input_dim)), np.zeros(0)), spec, Prior(),
                    svi.TrainConfig(steps=5))

    def test_shape_mismatch(self):
        spec = SPECS["first_dialysis"]
        with pytest.raises(svi.TrainingError):
            svi.fit((np.zeros((10, 3)), np.zeros(10)), spec, Prior(), svi.TrainConfig(steps=5))

    def test_config_validation(self):
        with pytest.raises(ValueError):
            svi.TrainConfig(steps=0)
        with pytest.raises(ValueError):
            svi.TrainConfig(learning_rate=0.0)


class TestFitAll:
    def _tables(self, n=300):
        tables = {}
        for name, spec in SPECS.items():
            tables[name] = _fake_batch(spec, n, seed=hash(name) % 2**32)
        return tables

    def test_order_independent(self):
        tables = self._tables()
        config = svi.TrainConfig(steps=30, seed=0)
        names = list(SPECS)
        r1, _ = svi.fit_all(tables, config, only=names)
        r2, _ = svi.fit_all(tables, config, only=list(reversed(names)))
        for name in names:
            np.testing.assert_array_equal(
                r1[name].posterior.mean, r2[name].posterior.mean
            )

    def test_parallel_matches_serial(self):
        tables = self._tables(n=200)
        config = svi.TrainConfig(steps=20, seed=0)
        only = ["first_dialysis", "test_result", "delay_after_positive"]
        serial, _ = svi.fit_all(tables, config, workers=1, only=only)
        parallel, _ = svi.fit_all(tables, config, workers=3, only=only)
        for name in only:
            np.testing.assert_array_equal(
                serial[name].posterior.mean, parallel[name].posterior.mean
            )
            np.testing.assert_array_equal(
                serial[name].posterior.chol, parallel[name].posterior.chol
            )

    def test_missing_table(self):
        with pytest.raises(svi.TrainingError, match="test_result"):
            svi.fit_all({}, svi.TrainConfig(steps=5), only=["test_result"])


def test_trace_write_and_smooth(tmp_path):
    trace = svi.TrainTrace(elbo=[1.0, 2.0, 3.0, 4.0], grad_norm=[0.1, 0.2, 0.3, 0.4])
    sm = trace.smoothed(window=2)
    np.testing.assert_allclose(sm, [1.5, 2.5, 3.5])
    path = tmp_path / "trace.jsonl"
    trace.write(path)
    lines = path.read_text().strip().split("\n")
    assert len(lines) == 4
    import json

    doc = json.loads(lines[2])
    assert doc == {"step": 2, "elbo": 3.0, "grad_norm": 0.3}
