#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "greit/metrics.hpp"

using namespace greit;

namespace {

Annotation make_ann(std::int64_t image_id, std::int64_t instance_id,
                    std::vector<std::array<double, 3>> kps, double area, double score = 0) {
    Annotation a;
    a.image_id = image_id;
    a.instance_id = instance_id;
    a.keypoints = std::move(kps);
    a.area = area;
    a.score = score;
    return a;
}

const std::vector<double> k3{0.1, 0.2, 0.1};

}  // namespace

TEST_CASE("oks of identical annotations is exactly 1") {
    auto gt = make_ann(0, 0, {{10, 20, 2}, {30, 40, 1}, {50, 60, 2}}, 1000);
    CHECK(oks(gt, gt, k3) == 1.0);
}

TEST_CASE("oks matches the closed form for a single labeled keypoint") {
    auto gt = make_ann(0, 0, {{10, 20, 2}, {0, 0, 0}, {0, 0, 0}}, 400);
    auto pred = make_ann(0, 0, {{13, 24, 0.9}, {99, 99, 0.1}, {99, 99, 0.1}}, 0, 0.9);
    // d^2 = 9 + 16 = 25; denom = 2 * 400 * 0.1^2 = 8.
    CHECK(oks(pred, gt, k3) == doctest::Approx(std::exp(-25.0 / 8.0)).epsilon(1e-12));

    // Unlabeled keypoints are ignored no matter how wrong the prediction is.
    auto pred2 = pred;
    pred2.keypoints[1] = {1e6, 1e6, 0.1};
    CHECK(oks(pred2, gt, k3) == oks(pred, gt, k3));
}

TEST_CASE("oks input validation") {
    auto gt = make_ann(0, 0, {{1, 1, 2}, {2, 2, 2}, {3, 3, 2}}, 100);
    auto pred = gt;
    CHECK_THROWS_AS(oks(pred, gt, {0.1, 0.2}), ValueError);  // wrong table size
    auto short_pred = make_ann(0, 0, {{1, 1, 2}}, 100);
    CHECK_THROWS_AS(oks(short_pred, gt, k3), ValueError);  // count mismatch
    auto flat = gt;
    flat.area = 0;
    CHECK_THROWS_AS(oks(pred, flat, k3), ValueError);  // degenerate area
    auto unlabeled = make_ann(0, 0, {{1, 1, 0}, {2, 2, 0}, {3, 3, 0}}, 100);
    CHECK_THROWS_AS(oks(pred, unlabeled, k3), ValueError);  // nothing to score
}

TEST_CASE("oks invariances: translation and similarity scaling") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(0.0, 100.0);
    for (int i = 0; i < 20; ++i) {
        auto gt = make_ann(0, 0, {{u(rng), u(rng), 2}, {u(rng), u(rng), 2}, {u(rng), u(rng), 1}},
                           500);
        auto pred = make_ann(0, 0, {{u(rng), u(rng), 1}, {u(rng), u(rng), 1}, {u(rng), u(rng), 1}},
                             0, 1);
        const double base = oks(pred, gt, k3);

        auto gt_t = gt;
        auto pred_t = pred;
        for (auto* ann : {&gt_t, &pred_t}) {
            for (auto& kp : ann->keypoints) {
                kp[0] += 37.5;
                kp[1] -= 12.25;
            }
        }
        CHECK(oks(pred_t, gt_t, k3) == doctest::Approx(base).epsilon(1e-12));

        const double lam = 2.5;
        auto gt_s = gt;
        auto pred_s = pred;
        for (auto* ann : {&gt_s, &pred_s}) {
            for (auto& kp : ann->keypoints) {
                kp[0] *= lam;
                kp[1] *= lam;
            }
        }
        gt_s.area = gt.area * lam * lam;
        CHECK(oks(pred_s, gt_s, k3) == doctest::Approx(base).epsilon(1e-10));
    }
}

TEST_CASE("perfect predictions give ap = ap50 = ap75 = ar = 1") {
    std::vector<Annotation> gts{
        make_ann(0, 0, {{10, 10, 2}, {20, 20, 2}, {30, 30, 2}}, 900),
        make_ann(0, 1, {{50, 50, 2}, {60, 60, 2}, {70, 70, 1}}, 900),
        make_ann(1, 0, {{15, 15, 2}, {25, 25, 0}, {35, 35, 2}}, 400),
    };
    std::vector<Annotation> preds;
    for (const auto& g : gts) {
        auto p = g;
        p.score = 0.9;
        preds.push_back(p);
    }
    auto r = ap_ar(preds, gts, k3);
    CHECK(r.ap == doctest::Approx(1.0));
    CHECK(r.ap50 == doctest::Approx(1.0));
    CHECK(r.ap75 == doctest::Approx(1.0));
    CHECK(r.ar == doctest::Approx(1.0));
}

TEST_CASE("no predictions scores zero; no usable ground truth throws") {
    std::vector<Annotation> gts{make_ann(0, 0, {{10, 10, 2}, {20, 20, 2}, {30, 30, 2}}, 900)};
    auto r = ap_ar({}, gts, k3);
    CHECK(r.ap == 0.0);
    CHECK(r.ar == 0.0);

    std::vector<Annotation> empty_gts{make_ann(0, 0, {{1, 1, 0}, {2, 2, 0}, {3, 3, 0}}, 900)};
    CHECK_THROWS_AS(ap_ar({}, empty_gts, k3), ValueError);
}

TEST_CASE("toy two-instance fixture matches the hand enumeration") {
    // One image, two ground truths. Prediction A (score .9) sits exactly on
    // gt 0; prediction B (score .8) is hopeless. Per threshold: tp = (1, 0),
    // precision (1, 1/2), recall (1/2, 1/2). Monotonized precision at recall
    // levels 0.00..0.50 is 1; levels above 0.50 fall off the curve. So every
    // threshold contributes ap_t = 51/101 and recall 1/2.
    std::vector<Annotation> gts{
        make_ann(0, 0, {{10, 10, 2}, {20, 20, 2}, {30, 30, 2}}, 900),
        make_ann(0, 1, {{80, 80, 2}, {90, 90, 2}, {99, 99, 2}}, 900),
    };
    auto hit = gts[0];
    hit.instance_id = 100;
    hit.score = 0.9;
    auto miss = make_ann(0, 101, {{500, 0, 1}, {500, 10, 1}, {500, 20, 1}}, 0, 0.8);
    auto r = ap_ar({hit, miss}, gts, k3);
    CHECK(r.ap == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ap50 == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ap75 == doctest::Approx(51.0 / 101.0).epsilon(1e-12));
    CHECK(r.ar == doctest::Approx(0.5).epsilon(1e-12));
}

TEST_CASE("equal scores break ties by instance id, so order is stable") {
    std::vector<Annotation> gts{
        make_ann(0, 0, {{10, 10, 2}, {20, 20, 2}, {30, 30, 2}}, 900),
        make_ann(0, 1, {{80, 80, 2}, {90, 90, 2}, {99, 99, 2}}, 900),
    };
    auto a = gts[0];
    a.instance_id = 5;
    a.score = 0.7;
    auto b = gts[1];
    b.instance_id = 6;
    b.score = 0.7;
    auto r1 = ap_ar({a, b}, gts, k3);
    auto r2 = ap_ar({b, a}, gts, k3);  // same multiset of predictions
    CHECK(r1.ap == r2.ap);
    CHECK(r1.ar == r2.ar);
    CHECK(r1.ap == doctest::Approx(1.0));
}

TEST_CASE("greedy matching forbids double-counting a ground truth") {
    std::vector<Annotation> gts{make_ann(0, 0, {{10, 10, 2}, {20, 20, 2}, {30, 30, 2}}, 900)};
    auto p1 = gts[0];
    p1.instance_id = 1;
    p1.score = 0.9;
    auto p2 = gts[0];
    p2.instance_id = 2;
    p2.score = 0.8;  // duplicate detection: must count as a false positive
    auto r = ap_ar({p1, p2}, gts, k3);
    CHECK(r.ar == doctest::Approx(1.0));
    // Recall hits 1 at rank 1; the duplicate only pads the precision tail.
    CHECK(r.ap == doctest::Approx(1.0));
}

TEST_CASE("pckh on the mixed three-keypoint fixture is exactly 200/3 percent") {
    std::vector<Annotation> gts{make_ann(0, 0, {{0, 0, 2}, {100, 0, 2}, {0, 100, 1}}, 0)};
    std::vector<Annotation> preds{
        make_ann(0, 0, {{0, 0, 1}, {104, 0, 1}, {0, 108, 1}}, 0, 1)};
    // head 10, alpha 0.5 -> radius 5: distances 0, 4, 8 -> two of three inside.
    CHECK(pckh(preds, gts, {10.0}, 0.5) == doctest::Approx(200.0 / 3.0).epsilon(1e-12));
    // All inside / all outside bracket the score.
    CHECK(pckh(preds, gts, {10.0}, 1.0) == doctest::Approx(100.0));
    CHECK(pckh(preds, gts, {10.0}, 0.01) == doctest::Approx(100.0 / 3.0));  // only the exact hit
}

TEST_CASE("pckh is monotone in alpha and validates its inputs") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> u(0.0, 50.0);
    std::vector<Annotation> gts{
        make_ann(0, 0, {{u(rng), u(rng), 2}, {u(rng), u(rng), 2}, {u(rng), u(rng), 2}}, 0)};
    std::vector<Annotation> preds{
        make_ann(0, 0, {{u(rng), u(rng), 1}, {u(rng), u(rng), 1}, {u(rng), u(rng), 1}}, 0, 1)};
    double prev = 0;
    for (double alpha : {0.1, 0.3, 0.5, 1.0, 3.0, 10.0}) {
        const double v = pckh(preds, gts, {20.0}, alpha);
        CHECK(v >= prev);
        prev = v;
    }
    CHECK(prev == doctest::Approx(100.0));  // huge alpha catches everything

    CHECK_THROWS_AS(pckh(preds, gts, {20.0, 30.0}, 0.5), ValueError);  // size mismatch
    CHECK_THROWS_AS(pckh(preds, gts, {0.0}, 0.5), ValueError);         // bad head size
    std::vector<Annotation> unlabeled{make_ann(0, 0, {{1, 1, 0}}, 0)};
    CHECK_THROWS_AS(pckh({}, unlabeled, {10.0}, 0.5), ValueError);     // nothing labeled
}

TEST_CASE("missing predictions count the ground-truth keypoints as misses") {
    std::vector<Annotation> gts{
        make_ann(0, 0, {{0, 0, 2}, {10, 10, 2}}, 0),
        make_ann(1, 0, {{5, 5, 2}, {15, 15, 2}}, 0),
    };
    std::vector<Annotation> preds{gts[0]};  // image 1 has no prediction
    preds[0].score = 1;
    CHECK(pckh(preds, gts, {10.0, 10.0}, 0.5) == doctest::Approx(50.0));
}
