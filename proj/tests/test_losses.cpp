#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include "pdp/adam.hpp"
#include "pdp/heads.hpp"
#include "pdp/losses.hpp"
#include "pdp/rng.hpp"
#include "test_util.hpp"

#include <cmath>

using namespace pdp;

namespace {

GazeHeatmap make_heatmap(int s, uint64_t seed) {
    GazeHeatmap hm;
    hm.grid = Grid(s, s);
    hm.grid.v = testutil::random_vec(s * s, seed, 0.0, 1.0);
    hm.sigma = 1.0;
    return hm;
}

} // namespace

TEST_CASE("heatmap mse") {
    auto gt = make_heatmap(8, 1);
    Tensor pred = Tensor::from_data({8, 8}, gt.grid.v);
    CHECK(heatmap_mse(pred, gt, true).value() == doctest::Approx(0.0));

    Tensor shifted = add_scalar(pred, 0.3);
    CHECK(heatmap_mse(shifted, gt, true).value() == doctest::Approx(0.09).epsilon(1e-12));

    // out-of-frame samples contribute no heatmap loss
    CHECK(heatmap_mse(shifted, gt, false).value() == 0.0);

    CHECK_THROWS_AS(heatmap_mse(Tensor::zeros({4, 4}), gt, true), std::invalid_argument);
}

TEST_CASE("patch kl closed forms") {
    auto gt = PatchDistribution::from_full({1.0, 0.0}, 1, 1);
    Tensor pred = Tensor::from_data({2}, {0.5, 0.5});
    CHECK(patch_kl(gt, pred).value() == doctest::Approx(std::log(2.0)).epsilon(1e-12));

    auto p = testutil::random_distribution(17, 2);
    auto pd = PatchDistribution::from_full(p, 4, 4);
    CHECK(patch_kl(pd, Tensor::from_data({17}, p)).value() == 0.0);

    CHECK_THROWS_AS(patch_kl(pd, Tensor::from_data({5}, {0.2, 0.2, 0.2, 0.2, 0.2})),
                    std::invalid_argument);
}

TEST_CASE("kl is nonnegative on 1000 random pairs") {
    for (uint64_t seed = 0; seed < 1000; ++seed) {
        auto p = testutil::random_distribution(9, 3000 + seed);
        auto q = testutil::random_distribution(9, 9000 + seed);
        auto pd = PatchDistribution::from_full(p, 2, 4);
        CHECK(patch_kl(pd, Tensor::from_data({9}, q)).value() >= -1e-12);
    }
}

TEST_CASE("kl direction flag matches the literal prediction-first form") {
    auto p = testutil::random_distribution(9, 11);
    auto q = testutil::random_distribution(9, 12);
    auto pd = PatchDistribution::from_full(p, 2, 4);
    Tensor pred = Tensor::from_data({9}, q);
    double want = 0.0;
    for (int i = 0; i < 9; ++i) want += q[i] * (std::log(q[i]) - std::log(p[i]));
    CHECK(patch_kl(pd, pred, KlDirection::pred_gt).value() ==
          doctest::Approx(want).epsilon(1e-12));
}

TEST_CASE("kl gradient vs finite differences") {
    auto gt = testutil::random_distribution(9, 13);
    auto pd = PatchDistribution::from_full(gt, 2, 4);
    for (KlDirection dir : {KlDirection::gt_pred, KlDirection::pred_gt}) {
        Tensor pred = Tensor::from_data({9}, testutil::random_distribution(9, 14), true);
        backward(patch_kl(pd, pred, dir));
        auto loss = [&] { return patch_kl(pd, pred, dir).value(); };
        CHECK(testutil::max_rel_grad_err(pred.grad(), testutil::fd_gradient(pred, loss)) <= 1e-5);
    }
}

TEST_CASE("combined loss weighting and linearity") {
    Tensor a = Tensor::scalar(0.7);
    Tensor b = Tensor::scalar(0.2);
    CHECK(combined_loss(a, b, {0.0, 2.0}).value() == doctest::Approx(0.4));
    CHECK(combined_loss(a, b, {3.0, 0.0}).value() == doctest::Approx(2.1));

    Rng rng(15);
    for (int i = 0; i < 20; ++i) {
        const double l1 = rng.uniform(0, 5), l2 = rng.uniform(0, 5);
        const double x = rng.uniform(), y = rng.uniform();
        const double got = combined_loss(Tensor::scalar(x), Tensor::scalar(y),
                                         {l1, l2}).value();
        CHECK(std::abs(got - (l1 * x + l2 * y)) <= 1e-12);
    }
    CHECK_THROWS_AS(combined_loss(a, b, {0.0, 0.0}), std::invalid_argument);
}

TEST_CASE("ablation patch losses run and differentiate") {
    auto gt = PatchDistribution::from_full(testutil::random_distribution(5, 16), 2, 2);
    for (PdLossKind kind : {PdLossKind::mse, PdLossKind::bce}) {
        Tensor pred = Tensor::from_data({5}, testutil::random_distribution(5, 17), true);
        Tensor l = patch_loss(gt, pred, kind);
        CHECK(l.value() >= 0.0);
        backward(l);
        auto loss = [&] { return patch_loss(gt, pred, kind).value(); };
        CHECK(testutil::max_rel_grad_err(pred.grad(), testutil::fd_gradient(pred, loss)) <= 1e-5);
    }
}

TEST_CASE("minimizing patch kl drives the head toward the target") {
    // 200 Adam steps on the head alone shrink the KL below 1% of its start.
    Rng rng(18);
    auto head = PdpHead::make(6, 3, rng);
    Tensor tokens = Tensor::from_data({9, 6}, testutil::random_vec(54, 19));
    auto gt = PatchDistribution::from_full(testutil::random_distribution(9, 20), 2, 4);

    std::vector<Parameter*> params;
    head.collect(params);
    AdamOptimizer opt(params);
    double initial = 0.0;
    double current = 0.0;
    for (int step = 0; step < 200; ++step) {
        for (Parameter* p : params) p->tensor.zero_grad();
        Tensor loss = patch_kl(gt, head.forward(tokens).dist);
        if (step == 0) initial = loss.value();
        current = loss.value();
        backward(loss);
        opt.step(0.05);
    }
    CHECK(current < 0.01 * initial);
}
