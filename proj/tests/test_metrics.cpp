#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdp/metrics.hpp"
#include "pdp/rng.hpp"
#include "test_util.hpp"

#include <algorithm>
#include <cmath>

using namespace pdp;

namespace {

// O(n^2) pairwise-comparison AUC oracle over cell scores and positive flags.
double auc_pairwise(const std::vector<double>& scores, const std::vector<char>& pos) {
    double wins = 0.0;
    long pairs = 0;
    for (size_t i = 0; i < scores.size(); ++i) {
        if (!pos[i]) continue;
        for (size_t j = 0; j < scores.size(); ++j) {
            if (pos[j]) continue;
            ++pairs;
            if (scores[i] > scores[j]) wins += 1.0;
            else if (scores[i] == scores[j]) wins += 0.5;
        }
    }
    return wins / pairs;
}

std::vector<char> positives_for(const Grid& g, const std::vector<GazeAnnotation>& anns) {
    std::vector<char> pos(g.size(), 0);
    for (const auto& a : anns) {
        if (!a.in_frame) continue;
        const int r = std::clamp<int>(std::lround(a.y * (g.rows - 1)), 0, g.rows - 1);
        const int c = std::clamp<int>(std::lround(a.x * (g.cols - 1)), 0, g.cols - 1);
        pos[static_cast<size_t>(r) * g.cols + c] = 1;
    }
    return pos;
}

// Brute-force all-points AP over the explicit precision-recall curve.
double ap_oracle(std::vector<std::pair<double, bool>> scored) {
    std::stable_sort(scored.begin(), scored.end(),
                     [](const auto& a, const auto& b) { return a.first > b.first; });
    int npos = 0;
    for (const auto& s : scored) npos += s.second ? 1 : 0;
    double ap = 0.0;
    int tp = 0;
    double prev_recall = 0.0;
    for (size_t k = 0; k < scored.size(); ++k) {
        if (scored[k].second) ++tp;
        const double recall = static_cast<double>(tp) / npos;
        const double precision = static_cast<double>(tp) / static_cast<double>(k + 1);
        ap += (recall - prev_recall) * precision;
        prev_recall = recall;
    }
    return ap;
}

} // namespace

TEST_CASE("auc on clean rankings") {
    Grid g(4, 4, 0.0);
    g.at(1, 2) = 1.0;
    std::vector<GazeAnnotation> anns = {{2.0 / 3.0, 1.0 / 3.0, true}};
    CHECK(auc(g, anns) == doctest::Approx(1.0));

    Grid flat(4, 4, 0.7);
    CHECK(auc(flat, anns) == doctest::Approx(0.5));

    CHECK_THROWS_AS(auc(g, {GazeAnnotation{0, 0, false}}), std::invalid_argument);
}

TEST_CASE("auc matches the pairwise oracle on 100 random instances") {
    Rng rng(1);
    for (int iter = 0; iter < 100; ++iter) {
        Grid g(8, 8);
        for (double& v : g.v) v = rng.uniform_int(20) * 0.05; // plenty of ties
        std::vector<GazeAnnotation> anns;
        const int n = 1 + rng.uniform_int(6);
        for (int i = 0; i < n; ++i)
            anns.push_back({rng.uniform(), rng.uniform(), true});
        const double got = auc(g, anns);
        const double want = auc_pairwise(g.v, positives_for(g, anns));
        CHECK(std::abs(got - want) <= 1e-9);
    }
}

TEST_CASE("auc is invariant under strictly increasing transforms") {
    Rng rng(2);
    for (int iter = 0; iter < 20; ++iter) {
        Grid g(6, 6);
        for (double& v : g.v) v = rng.uniform(-2.0, 2.0);
        std::vector<GazeAnnotation> anns = {{rng.uniform(), rng.uniform(), true},
                                            {rng.uniform(), rng.uniform(), true}};
        const double base = auc(g, anns);
        Grid ge = g, ga = g;
        for (double& v : ge.v) v = std::exp(v);
        for (double& v : ga.v) v = 3.7 * v + 11.0;
        CHECK(std::abs(auc(ge, anns) - base) <= 1e-9);
        CHECK(std::abs(auc(ga, anns) - base) <= 1e-9);
    }
}

TEST_CASE("distances") {
    Grid g(5, 5, 0.0);
    g.at(2, 2) = 1.0;
    std::vector<GazeAnnotation> at_peak = {{0.5, 0.5, true}};
    auto d = distances(g, at_peak);
    CHECK(d.avg == doctest::Approx(0.0));
    CHECK(d.min == doctest::Approx(0.0));

    // min <= max per-annotation distance, oracle check on random sets
    Rng rng(3);
    for (int iter = 0; iter < 10; ++iter) {
        Grid h(8, 8);
        for (double& v : h.v) v = rng.uniform();
        std::vector<GazeAnnotation> anns;
        for (int i = 0; i < 10; ++i)
            anns.push_back({rng.uniform(), rng.uniform(), true});
        auto res = distances(h, anns);
        int best = 0;
        for (int i = 1; i < 64; ++i)
            if (h.v[i] > h.v[best]) best = i;
        const double px = (best % 8) / 7.0, py = (best / 8) / 7.0;
        double cx = 0, cy = 0, dmin = 1e9, dmax = 0;
        for (auto& a : anns) {
            cx += a.x;
            cy += a.y;
            const double dd = std::hypot(px - a.x, py - a.y);
            dmin = std::min(dmin, dd);
            dmax = std::max(dmax, dd);
        }
        CHECK(std::abs(res.avg - std::hypot(px - cx / 10, py - cy / 10)) <= 1e-12);
        CHECK(std::abs(res.min - dmin) <= 1e-12);
        CHECK(res.min <= dmax + 1e-12);
    }
}

TEST_CASE("average precision") {
    // perfectly separated: every out-of-frame sample scores above every in-frame one
    std::vector<std::pair<double, bool>> sep = {
        {0.1, false}, {0.2, false}, {0.8, true}, {0.9, true}};
    CHECK(ap_out_of_frame(sep) == doctest::Approx(1.0));

    // all samples positive: precision is 1 at every rank
    std::vector<std::pair<double, bool>> allpos = {{0.3, false}, {0.9, false}, {0.5, false}};
    CHECK(ap_out_of_frame(allpos) == doctest::Approx(1.0));

    CHECK_THROWS_AS(ap_out_of_frame({{0.5, true}}), std::invalid_argument);

    Rng rng(4);
    for (int iter = 0; iter < 100; ++iter) {
        std::vector<std::pair<double, bool>> scores;
        std::vector<std::pair<double, bool>> oracle_in;
        bool any_pos = false;
        for (int i = 0; i < 20; ++i) {
            const double pin = rng.uniform_int(10) * 0.1; // ties likely
            const bool in_frame = rng.uniform() < 0.5;
            any_pos |= !in_frame;
            scores.emplace_back(pin, in_frame);
            oracle_in.emplace_back(1.0 - pin, !in_frame);
        }
        if (!any_pos) {
            scores[0].second = false;
            oracle_in[0].second = true;
        }
        CHECK(std::abs(ap_out_of_frame(scores) - ap_oracle(oracle_in)) <= 1e-9);
    }
}

TEST_CASE("ap is invariant under strictly increasing transforms of the detection score") {
    Rng rng(5);
    std::vector<std::pair<double, bool>> scores;
    for (int i = 0; i < 30; ++i) scores.emplace_back(rng.uniform(), rng.uniform() < 0.6);
    scores[0].second = false;
    const double base = ap_out_of_frame(scores);
    // transform P_in monotonically while keeping 1-P_in order: p' = 1-exp(-(1-p))
    auto transformed = scores;
    for (auto& [p, y] : transformed) p = 1.0 - std::exp(-(1.0 - p)) * 0.5;
    CHECK(std::abs(ap_out_of_frame(transformed) - base) <= 1e-9);
}

TEST_CASE("quantile breakdown") {
    std::vector<std::pair<double, double>> same;
    for (int i = 0; i < 40; ++i) same.emplace_back(i * 0.01, 0.75);
    auto t = quantile_breakdown(same);
    REQUIRE(t.size() == 10);
    for (const auto& row : t) {
        CHECK(row.mean_auc == doctest::Approx(0.75));
        CHECK(row.count == 4);
    }

    // monotone auc in variance -> monotone table
    std::vector<std::pair<double, double>> mono;
    Rng rng(6);
    for (int i = 0; i < 53; ++i) {
        const double v = rng.uniform();
        mono.emplace_back(v, 0.5 + 0.4 * v);
    }
    auto tm = quantile_breakdown(mono);
    for (size_t i = 1; i < tm.size(); ++i) CHECK(tm[i].mean_auc > tm[i - 1].mean_auc);
    // equal-count within 1, remainder on the first bins
    CHECK(tm[0].count == 6);
    CHECK(tm[9].count == 5);

    CHECK_THROWS_AS(quantile_breakdown({{0.1, 0.5}}), std::invalid_argument);

    // direct sort-and-chunk oracle
    std::vector<std::pair<double, double>> rnd;
    for (int i = 0; i < 100; ++i) rnd.emplace_back(rng.uniform(), rng.uniform());
    auto tr = quantile_breakdown(rnd);
    auto sorted = rnd;
    std::sort(sorted.begin(), sorted.end());
    for (int b = 0; b < 10; ++b) {
        double sa = 0;
        for (int k = 0; k < 10; ++k) sa += sorted[b * 10 + k].second;
        CHECK(std::abs(tr[b].mean_auc - sa / 10) <= 1e-12);
        CHECK(tr[b].count == 10);
    }
}

TEST_CASE("pdph mirrors the ground-truth construction") {
    // on a ground-truth heatmap (all positive) pdph equals the gt procedure
    GazeAnnotation ann{0.62, 0.31, true};
    auto hm = render_gaussian_heatmap(ann, 16, 16, 2.0);
    auto from_gt = patch_distribution_from_heatmap(&hm, true, 4, 4, GtMode::maxpool);
    auto from_pred = pdph(hm.grid, 4, 4);
    for (size_t i = 0; i < from_gt.inside.size(); ++i)
        CHECK(std::abs(from_gt.inside[i] - from_pred.inside[i]) <= 1e-12);
    CHECK(from_pred.outside == 0.0);

    // constant heatmap -> uniform inside distribution
    Grid flat(8, 8, 3.3);
    auto uni = pdph(flat, 4, 4);
    for (double v : uni.inside) CHECK(v == doctest::Approx(1.0 / 16));

    // negative values are min-shifted before pooling
    Grid neg(4, 4, -1.0);
    neg.at(1, 1) = 2.0;
    auto pd = pdph(neg, 2, 2);
    CHECK(pd.inside[0] == doctest::Approx(1.0)); // only patch with positive shifted max
    for (double v : pd.inside) CHECK(v >= 0.0);

    // brute-force pooling oracle on random (possibly negative) grids
    Rng rng(7);
    for (int iter = 0; iter < 100; ++iter) {
        Grid g(8, 8);
        for (double& v : g.v) v = rng.uniform(-1.0, 1.0);
        double mn = *std::min_element(g.v.begin(), g.v.end());
        const double shift = mn < 0 ? -mn : 0.0;
        std::vector<double> maxes(16, -1e18);
        for (int r = 0; r < 8; ++r)
            for (int c = 0; c < 8; ++c) {
                auto& m = maxes[static_cast<size_t>(r / 2) * 4 + c / 2];
                m = std::max(m, g.at(r, c) + shift);
            }
        double total = 0;
        for (double m : maxes) total += m;
        auto pd2 = pdph(g, 4, 4);
        for (int i = 0; i < 16; ++i)
            CHECK(std::abs(pd2.inside[i] - maxes[i] / total) <= 1e-12);
    }
}

TEST_CASE("bhattacharyya and js divergence") {
    auto p = PatchDistribution::from_full(testutil::random_distribution(17, 8), 4, 4);
    CHECK(bhattacharyya(p, p) == doctest::Approx(1.0).epsilon(1e-12));
    CHECK(js_divergence(p, p) == 0.0);

    PatchDistribution a = PatchDistribution::from_full({1, 0, 0, 0, 0}, 2, 2);
    PatchDistribution b = PatchDistribution::from_full({0, 1, 0, 0, 0}, 2, 2);
    CHECK(bhattacharyya(a, b) == doctest::Approx(0.0));
    CHECK(js_divergence(a, b) == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    Rng rng(9);
    for (int iter = 0; iter < 100; ++iter) {
        auto u = PatchDistribution::from_full(testutil::random_distribution(17, 900 + iter), 4, 4);
        auto v = PatchDistribution::from_full(testutil::random_distribution(17, 1900 + iter), 4, 4);
        const double bc = bhattacharyya(u, v);
        const double js = js_divergence(u, v);
        CHECK(bc >= 0.0);
        CHECK(bc <= 1.0 + 1e-12);
        CHECK(js >= 0.0);
        CHECK(js <= std::log(2.0) + 1e-12);
        CHECK(std::abs(js - js_divergence(v, u)) <= 1e-12); // symmetry
    }
}
