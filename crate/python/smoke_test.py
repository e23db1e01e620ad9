"""Smoke test for the calib_py extension module.

Build and install the module first, e.g.

    pip install --no-build-isolation -e crates/python

then run `python python/smoke_test.py`.
"""

import math
import os
import tempfile

import calib_py as cp


def check_distributions():
    normal = cp.ScalarDistribution.normal(1.0, 4.0)
    assert abs(normal.cdf(1.0) - 0.5) < 1e-15
    assert abs(normal.quantile(0.975) - (1.0 + 2.0 * 1.959963984540054)) < 1e-9
    assert normal.mean() == 1.0 and normal.variance() == 4.0
    draws = normal.sample(20_000, seed=3)
    assert draws == normal.sample(20_000, seed=3)
    assert abs(sum(draws) / len(draws) - 1.0) < 0.05

    mixture = cp.ScalarDistribution.normal_mixture(0.25, (0.0, 1.0), (5.0, 1.0))
    assert abs(mixture.mean() - 1.25) < 1e-12

    g = cp.GaussianVector([0.0, 1.0], [[2.0, 0.5], [0.5, 1.0]])
    assert g.dim == 2 and g.mean == [0.0, 1.0]
    assert abs(g.marginal(1).variance() - 1.0) < 1e-12
    assert len(g.sample(5, seed=1)[0]) == 2

    try:
        cp.ScalarDistribution.normal(0.0, -1.0)
    except ValueError:
        pass
    else:
        raise AssertionError("negative variance accepted")


def check_inference():
    prior = cp.ScalarDistribution.standard_normal()
    post = cp.Procedure.bayes(1.0).infer(prior, [2.0])
    law = post.scalar()
    assert law is not None and not post.is_empirical
    assert abs(law.mean() - 1.0) < 1e-12 and abs(law.variance() - 0.5) < 1e-12
    assert abs(post.pushforward_cdf(cp.TestFunction.identity(), 1.0) - 0.5) < 1e-12

    abc = cp.Procedure.gk_abc(10.0, ensemble_size=19)
    data = cp.Model.g_and_k().sample([0.3], seed=2)
    out = abc.infer(prior, data, seed=4)
    assert out.is_empirical and len(out.ensemble()) == 19


def check_calibration_tests():
    prior = cp.ScalarDistribution.standard_normal()
    model = cp.Model.gaussian_location(1.0, 1)

    good = cp.strong_test(cp.Procedure.bayes(1.0), prior, model, 20_000, seed=1)
    assert good.mode == "strong" and good.n_replicates == 20_000
    assert good.p_value > 1e-3, good
    assert sum(good.histogram) == 20_000 and len(good.bin_edges) == 21
    assert len(good.pits) == 20_000 and good.ranks is None

    bad = cp.strong_test(cp.Procedure.mirror_bayes(1.0), prior, model, 20_000, seed=1)
    assert bad.p_value < 1e-6, bad

    weak = cp.weak_test(cp.Procedure.mirror_bayes(1.0), prior, model, 20_000, seed=2)
    assert weak.mode == "weak" and weak.p_value > 1e-4, weak

    ranks = cp.strong_rank_test(
        cp.Procedure.bayes(1.0), prior, model, 2_000, ensemble_size=19, rank_bins=5, seed=3
    )
    assert ranks.mode == "strong-rank" and len(ranks.ranks) == 2_000

    a = [[2.0, 0.3], [0.3, 1.0]]
    gauss = cp.GaussianVector([0.0, 0.0], [[1.0, 0.0], [0.0, 1.0]])
    reports = cp.strong_test_multi(
        cp.Procedure.richardson(a, 0.3, 5),
        gauss,
        cp.Model.linear_system(a),
        [cp.TestFunction.coordinate(0), cp.TestFunction.coordinate(1)],
        5_000,
        seed=4,
        bonferroni=True,
    )
    assert len(reports) == 2 and all(r.p_value > 1e-4 for r in reports)

    try:
        cp.strong_rank_test(
            cp.Procedure.gk_abc(0.01, ensemble_size=19, max_proposals=19),
            prior,
            cp.Model.g_and_k(),
            200,
            ensemble_size=19,
            rank_bins=5,
        )
    except cp.CalibrationError:
        pass
    else:
        raise AssertionError("exhausted ABC budget did not raise")


def check_gof():
    assert cp.ks_statistic([0.5]) == 0.5
    res = cp.ks_uniform_test([(i + 0.5) / 100 for i in range(100)])
    assert res.test_name == "ks" and res.p_value > 0.99
    chi = cp.chi2_pit_test([0.5] * 10)
    assert chi.statistic == 0.0
    counts, res = cp.rank_uniformity_test(list(range(20)) * 10, 19, 4)
    assert counts == [50, 50, 50, 50] and res.statistic == 0.0
    x = [[v] for v in cp.ScalarDistribution.standard_normal().sample(200, seed=1)]
    y = [[v + 3.0] for v in cp.ScalarDistribution.standard_normal().sample(200, seed=2)]
    assert cp.mmd_permutation_test(x, y, n_perm=199, seed=5).p_value <= 0.01


def check_vignettes():
    rows = cp.run_vignette("robust", n=500, contam_range=[0.0, 0.2])
    assert len(rows) == 8
    assert rows[0].mode == "strong:bayes" and rows[0].param_name == "contamination"
    assert all(0.0 <= r.p_value <= 1.0 for r in rows)
    edges, counts = rows[0].histogram
    assert len(edges) == len(counts) + 1 and sum(counts) == 500
    again = cp.run_vignette("robust", n=500, contam_range=[0.0, 0.2])
    assert [r.statistic for r in rows] == [r.statistic for r in again]

    with tempfile.TemporaryDirectory() as tmp:
        for fmt in ("csv", "json"):
            path = os.path.join(tmp, "robust." + fmt)
            cp.write_report(rows, path, fmt)
            assert os.path.exists(path + ".hist.csv")
            back = cp.read_report(path, fmt)
            assert [(r.mode, r.p_value) for r in back] == [(r.mode, r.p_value) for r in rows]
            assert back[3].histogram == rows[3].histogram

    try:
        cp.run_vignette("robust", n=10)
    except ValueError:
        pass
    else:
        raise AssertionError("too few replicates accepted")

    gp = cp.run_vignette("gp-split", n=100, split_sizes=[20])
    assert [r.mode for r in gp] == ["x_star", "x_baseline", "x_star_vs_baseline"]
    assert all(math.isfinite(r.statistic) for r in gp)


def main():
    check_distributions()
    check_inference()
    check_calibration_tests()
    check_gof()
    check_vignettes()
    print("calib_py smoke test passed")


if __name__ == "__main__":
    main()
