import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy import integrate, optimize, stats

from cascadenet.diffusion import (Cascade, CascadeFormatError, CascadeSet, Exponential, PowerLaw,
                                  Weibull, density, generate_cascade_set, parse_model,
                                  perturb_times, read_cascades, sample_delay, simulate_cascade,
                                  write_cascades)
from cascadenet.graph import (Network, assign_uniform_weights, generate_erdos_renyi,
                              generate_preferential_attachment)

MODELS = [Exponential(1.0), Exponential(2.0), PowerLaw(2.0, 1.0), PowerLaw(3.5, 0.5),
          Weibull(9.5, 2.3), Weibull(1.0, 0.8)]

# reference distributions from scipy, used as an independent check of our CDFs
SCIPY = {
    Exponential(1.0): stats.expon(scale=1.0),
    Exponential(2.0): stats.expon(scale=0.5),
    PowerLaw(2.0, 1.0): stats.pareto(b=1.0, scale=1.0),
    PowerLaw(3.5, 0.5): stats.pareto(b=2.5, scale=0.5),
    Weibull(9.5, 2.3): stats.weibull_min(c=2.3, scale=9.5),
    Weibull(1.0, 0.8): stats.weibull_min(c=0.8, scale=1.0),
}


class TestDensity:
    def test_exponential_at_zero(self):
        assert density(Exponential(1.0), 0.0) == 1.0

    def test_power_law_values(self):
        m = PowerLaw(2.0, 1.0)
        assert density(m, 1.0) == 1.0
        assert density(m, 0.5) == 0.0

    def test_weibull_mode(self):
        m = Weibull(9.5, 2.3)
        res = optimize.minimize_scalar(lambda t: -density(m, t), bounds=(0.1, 30), method="bounded",
                                       options={"xatol": 1e-8})
        assert res.x == pytest.approx(7.41, abs=5e-3)
        assert res.x == pytest.approx(9.5 * (1.3 / 2.3) ** (1 / 2.3), abs=1e-5)

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    def test_normalised(self, model):
        lo = getattr(model, "t_min", 0.0)
        total, _ = integrate.quad(lambda t: density(model, t), lo, np.inf, limit=200)
        assert total == pytest.approx(1.0, abs=1e-6)

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    def test_matches_scipy(self, model):
        t = np.linspace(0.01, 30, 300)
        np.testing.assert_allclose(model.pdf(t), SCIPY[model].pdf(t), rtol=1e-10, atol=1e-300)
        np.testing.assert_allclose(model.cdf(t), SCIPY[model].cdf(t), rtol=1e-10, atol=1e-14)

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    def test_negative_time_is_zero(self, model):
        assert density(model, -1.0) == 0.0

    def test_parse(self):
        assert parse_model("exp:1.0") == Exponential(1.0)
        assert parse_model("powerlaw:2.0") == PowerLaw(2.0, 1.0)
        assert parse_model("weibull:9.5,2.3") == Weibull(9.5, 2.3)
        with pytest.raises(ValueError):
            parse_model("gamma:1")
        with pytest.raises(ValueError):
            parse_model("powerlaw:1.0")


class TestSampling:
    def test_exponential_mean(self):
        d = sample_delay(Exponential(2.0), np.random.default_rng(0), size=100_000)
        se = 0.5 / math.sqrt(len(d))
        assert abs(d.mean() - 0.5) < 3 * se

    def test_power_law_support(self):
        d = sample_delay(PowerLaw(2.0, 1.0), np.random.default_rng(1), size=10_000)
        assert d.min() >= 1.0

    def test_weibull_mean(self):
        m = Weibull(9.5, 2.3)
        d = sample_delay(m, np.random.default_rng(2), size=100_000)
        mean = 9.5 * math.gamma(1 + 1 / 2.3)
        sd = 9.5 * math.sqrt(math.gamma(1 + 2 / 2.3) - math.gamma(1 + 1 / 2.3) ** 2)
        assert abs(d.mean() - mean) < 3 * sd / math.sqrt(len(d))

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    def test_strictly_positive(self, model):
        assert sample_delay(model, np.random.default_rng(3), size=5000).min() > 0
        assert sample_delay(model, 4) > 0

    @pytest.mark.parametrize("model", MODELS, ids=repr)
    def test_kolmogorov_smirnov(self, model):
        d = sample_delay(model, np.random.default_rng(5), size=10_000)
        assert stats.kstest(d, SCIPY[model].cdf).statistic < 0.02


def two_node(weight):
    return Network(2, {(0, 1): weight})


class TestSimulation:
    def test_certain_transmission(self):
        c = simulate_cascade(two_node(1.0), Exponential(1.0), 0, 0)
        assert set(c.times) == {0, 1} and c.times[0] == 0.0 and c.times[1] > 0

    def test_no_transmission(self):
        c = simulate_cascade(two_node(0.0), Exponential(1.0), 0, 0)
        assert c.times == {0: 0.0}

    def test_transmission_frequency(self):
        rng = np.random.default_rng(7)
        net, trials = two_node(0.3), 10_000
        hits = sum(1 in simulate_cascade(net, Exponential(1.0), 0, rng).times for _ in range(trials))
        assert abs(hits / trials - 0.3) <= 3 * math.sqrt(0.3 * 0.7 / trials)

    def test_delay_distribution_on_single_edge(self):
        rng = np.random.default_rng(8)
        m = Weibull(9.5, 2.3)
        d = [simulate_cascade(two_node(1.0), m, 0, rng).times[1] for _ in range(4000)]
        assert stats.kstest(d, SCIPY[m].cdf).pvalue > 1e-3

    def test_earliest_attempt_wins(self):
        # two certain routes to node 2; its time is the smaller arrival
        net = Network(3, {(0, 1): 1.0, (0, 2): 1.0, (1, 2): 1.0})
        seen = set()
        for seed in range(50):
            c = simulate_cascade(net, Exponential(1.0), 0, seed)
            src = c.infectors[2]
            assert c.times[src] < c.times[2]
            seen.add(src)
        assert seen == {0, 1}

    def test_bad_seed(self):
        with pytest.raises(ValueError):
            simulate_cascade(two_node(1.0), Exponential(1.0), 2, 0)

    @settings(max_examples=25, deadline=None)
    @given(seed=st.integers(0, 2**16), model=st.sampled_from(MODELS[::2]))
    def test_causal_structure(self, seed, model):
        net = assign_uniform_weights(generate_erdos_renyi(25, 80, seed), 0.2, 1.0, seed)
        rng = np.random.default_rng(seed)
        c = simulate_cascade(net, model, int(rng.integers(25)), rng)
        zeros = [v for v, t in c.times.items() if t == 0]
        assert zeros == [c.seed_node]
        for v, t in c.times.items():
            if v == c.seed_node:
                continue
            assert t > 0
            src = c.infectors[v]
            # infector is an in-neighbour infected strictly earlier
            assert net.weight(src, v) > 0 and c.times[src] < t
        # every infected node is reachable from the seed along infector links
        for v in c.times:
            hops = 0
            while v != c.seed_node:
                v = c.infectors[v]
                hops += 1
                assert hops <= 25


class TestCascadeGeneration:
    def test_single_edge_full_coverage(self):
        cs, rep = generate_cascade_set(two_node(1.0), Exponential(1.0), 1.0, 10, 0)
        assert rep.coverage == 1.0 and len(cs) == 1 and not rep.warning
        assert cs.cascades[0].seed_node == 0
        assert rep.discarded == rep.attempts - 1

    def test_shortfall_warns(self):
        net = Network(3, {(0, 1): 0.01, (1, 2): 1.0})
        cs, rep = generate_cascade_set(net, Exponential(1.0), 1.0, 10, 3)
        assert rep.coverage < 1.0 and rep.warning and "below target" in rep.message
        assert all(len(c) >= 2 for c in cs)

    def test_scale_free_512_coverage(self):
        net = assign_uniform_weights(generate_preferential_attachment(512, 2, 1), 0.05, 1.0, 2)
        cs, rep = generate_cascade_set(net, Exponential(1.0), 0.99, 50_000, 11)
        assert rep.coverage >= 0.99 and not rep.warning
        assert len(cs) == rep.n_cascades and rep.n_cascades > 512
        covered = {(c.infectors[v], v) for c in cs for v in c.infectors}
        assert len(covered) / net.n_edges == pytest.approx(rep.coverage)

    def test_deterministic(self):
        net = assign_uniform_weights(generate_erdos_renyi(40, 120, 0), 0.05, 1.0, 0)
        a, _ = generate_cascade_set(net, PowerLaw(2.0), 0.9, 500, 9)
        b, _ = generate_cascade_set(net, PowerLaw(2.0), 0.9, 500, 9)
        assert a == b

    def test_bad_arguments(self):
        with pytest.raises(ValueError):
            generate_cascade_set(two_node(1.0), Exponential(1.0), 0.0, 10, 0)
        with pytest.raises(ValueError):
            generate_cascade_set(two_node(1.0), Exponential(1.0), 0.5, 0, 0)


@pytest.fixture(scope="module")
def corpus():
    net = assign_uniform_weights(generate_erdos_renyi(60, 200, 4), 0.05, 1.0, 4)
    cs, _ = generate_cascade_set(net, Exponential(1.0), 0.95, 2000, 4)
    return cs


class TestPerturbation:
    def test_zero_sigma_is_identity(self, corpus):
        out, ratio = perturb_times(corpus, 0.0, 0)
        assert out == corpus and ratio == 0.0

    def test_large_sigma_clamped(self, corpus):
        out, ratio = perturb_times(corpus, 100.0, 1)
        for c in out:
            zeros = [v for v, t in c.times.items() if t == 0]
            assert len(zeros) == 1
            assert all(t > 0 for v, t in c.times.items() if v != zeros[0])
        assert ratio > 0

    def test_seed_untouched_and_ratio_formula(self, corpus):
        out, ratio = perturb_times(corpus, 0.3, np.random.RandomState(2))
        replay = np.random.RandomState(2)
        drawn, signal = [], []
        for before, after in zip(corpus, out):
            assert after.times[before.seed_node] == 0.0
            nodes = sorted(v for v in before.times if v != before.seed_node)
            e = replay.normal(0.0, 0.3, size=len(nodes))
            for v, ev in zip(nodes, e):
                assert after.times[v] == max(before.times[v] + ev, np.finfo(float).tiny)
            drawn += list(np.abs(e))
            signal.append(np.mean([before.times[v] - before.times[u]
                                   for v, u in before.infectors.items()]))
        assert ratio == pytest.approx(np.mean(drawn) / np.mean(signal), rel=1e-12)

    def test_ratio_scales_with_sigma(self, corpus):
        _, small = perturb_times(corpus, 0.05, 3)
        _, big = perturb_times(corpus, 0.2, 3)
        assert big == pytest.approx(4 * small, rel=0.05)

    def test_without_infector_record(self, corpus, tmp_path):
        write_cascades(corpus, tmp_path / "c.tsv")
        loaded = read_cascades(tmp_path / "c.tsv")
        _, ratio = perturb_times(loaded, 0.3, 2)
        gaps = np.mean([np.mean([t for t in c.times.values() if t > 0]) for c in loaded])
        assert ratio == pytest.approx(0.3 * math.sqrt(2 / math.pi) / gaps, rel=0.05)


class TestCascadeFiles:
    def test_round_trip(self, tmp_path):
        net = assign_uniform_weights(generate_erdos_renyi(100, 400, 1), 0.05, 1.0, 1)
        cs, rep = generate_cascade_set(net, Weibull(9.5, 2.3), 1.0, 1000, 1)
        assert len(cs) == 1000
        write_cascades(cs, tmp_path / "c.tsv")
        assert read_cascades(tmp_path / "c.tsv") == cs

    def test_empty(self, tmp_path):
        (tmp_path / "c.tsv").write_text("# cascades n=7\n")
        cs = read_cascades(tmp_path / "c.tsv")
        assert len(cs) == 0 and cs.n == 7

    @pytest.mark.parametrize("body, message", [
        ("0\t1\t0\n0\t2\t0\n", "second time-0"),
        ("0\t1\t0\n0\t1\t2.5\n", "duplicate"),
        ("0\t1\t0\n0\t2\t-1\n", "invalid infection time"),
        ("0\t1\t0.5\n0\t2\t1.5\n", "no time-0"),
        ("0\t11\t0\n", "out of range"),
    ])
    def test_parse_errors(self, tmp_path, body, message):
        (tmp_path / "c.tsv").write_text("# cascades n=10\n" + body)
        with pytest.raises(CascadeFormatError, match=message) as err:
            read_cascades(tmp_path / "c.tsv")
        assert ":2:" in str(err.value) or ":3:" in str(err.value)

    def test_cascade_set_validation(self):
        with pytest.raises(ValueError):
            CascadeSet([Cascade(0, {0: 0.0}), Cascade(0, {1: 0.0})], 2)
        with pytest.raises(ValueError):
            CascadeSet([Cascade(0, {5: 0.0})], 2)
