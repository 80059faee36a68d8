#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <random>

#include "greit/posedecode.hpp"

using namespace greit;

TEST_CASE("extend_box grows to the 4:3 aspect about the center") {
    // Too wide: height grows, width and center stay.
    auto b = extend_box({10, 20, 100, 100});
    CHECK(b.w == doctest::Approx(100));
    CHECK(b.h == doctest::Approx(100 * 4.0 / 3.0));
    CHECK(b.x == doctest::Approx(10));
    CHECK(b.y == doctest::Approx(20 + 50 - b.h / 2));

    // Too tall: width grows instead.
    auto t = extend_box({0, 0, 100, 300});
    CHECK(t.h == doctest::Approx(300));
    CHECK(t.w == doctest::Approx(225));
    CHECK(t.x == doctest::Approx(50 - 225.0 / 2));

    // Already 4:3 is a fixed point.
    auto f = extend_box({5, 6, 30, 40});
    CHECK(f.x == doctest::Approx(5));
    CHECK(f.y == doctest::Approx(6));
    CHECK(f.w == doctest::Approx(30));
    CHECK(f.h == doctest::Approx(40));

    CHECK_THROWS_AS(extend_box({0, 0, 0, 10}), ValueError);
    CHECK_THROWS_AS(extend_box({0, 0, 10, 10}, 0.0), ValueError);
}

TEST_CASE("extend_box: exact ratio, containment, never shrinks (random boxes)") {
    std::mt19937_64 rng(1);
    std::uniform_real_distribution<double> u(1.0, 300.0);
    for (int i = 0; i < 50; ++i) {
        Box in{u(rng), u(rng), u(rng), u(rng)};
        const double ratio = (i % 2) ? 4.0 / 3.0 : 1.5;
        auto out = extend_box(in, ratio);
        CHECK(out.h / out.w == doctest::Approx(ratio).epsilon(1e-9));
        CHECK(out.w >= in.w - 1e-9);
        CHECK(out.h >= in.h - 1e-9);
        CHECK(out.x <= in.x + 1e-9);
        CHECK(out.y <= in.y + 1e-9);
        CHECK(out.x + out.w >= in.x + in.w - 1e-9);
        CHECK(out.y + out.h >= in.y + in.h - 1e-9);
        // Center preserved.
        CHECK(out.x + out.w / 2 == doctest::Approx(in.x + in.w / 2));
        CHECK(out.y + out.h / 2 == doctest::Approx(in.y + in.h / 2));
    }
}

TEST_CASE("decode applies the quarter offset toward the larger neighbor") {
    Tensor<float> hm({1, 1, 5, 7});
    hm.at4(0, 0, 2, 3) = 1.0f;
    hm.at4(0, 0, 2, 4) = 0.5f;  // right neighbor larger than left (0)
    hm.at4(0, 0, 1, 3) = 0.3f;  // upper neighbor larger than lower (0)
    auto kps = decode_heatmaps(hm, true);
    REQUIRE(kps.size() == 1);
    REQUIRE(kps[0].size() == 1);
    CHECK(kps[0][0].x == doctest::Approx(3.25));
    CHECK(kps[0][0].y == doctest::Approx(1.75));
    CHECK(kps[0][0].score == doctest::Approx(1.0));

    // Without the refinement the raw argmax comes back.
    auto raw = decode_heatmaps(hm, false);
    CHECK(raw[0][0].x == 3.0);
    CHECK(raw[0][0].y == 2.0);
}

TEST_CASE("decode skips the offset on borders and breaks ties first-wins") {
    Tensor<float> corner({1, 1, 4, 4});
    corner.at4(0, 0, 0, 3) = 2.0f;
    corner.at4(0, 0, 0, 2) = 1.0f;
    auto kps = decode_heatmaps(corner, true);
    CHECK(kps[0][0].x == 3.0);  // border peak: no offset even with a gradient
    CHECK(kps[0][0].y == 0.0);

    Tensor<float> flat({1, 2, 3, 3});  // all zero: first position wins
    auto ties = decode_heatmaps(flat, true);
    for (int c = 0; c < 2; ++c) {
        CHECK(ties[0][c].x == 0.0);
        CHECK(ties[0][c].y == 0.0);
    }

    CHECK_THROWS_AS(decode_heatmaps(Tensor<float>({1, 1, 1, 5}), true), ShapeError);
}

TEST_CASE("decode recovers gaussian centers within a quarter pixel") {
    std::mt19937_64 rng(2);
    std::uniform_real_distribution<double> ux(2.0, 45.0), uy(2.0, 61.0);
    for (int i = 0; i < 40; ++i) {
        const double cx = ux(rng), cy = uy(rng);
        auto g = gaussian_target(cx, cy, 2.0, 64, 48);
        auto hm = reshape(g, {1, 1, 64, 48});
        auto kps = decode_heatmaps(hm, true);
        CHECK(std::fabs(kps[0][0].x - cx) <= 0.25 + 1e-9);
        CHECK(std::fabs(kps[0][0].y - cy) <= 0.25 + 1e-9);
    }
}

TEST_CASE("gaussian target peaks at 1 and sums to about 2*pi*sigma^2") {
    auto g = gaussian_target(24.0, 32.0, 2.0, 64, 48);
    double total = 0, peak = 0;
    for (std::int64_t i = 0; i < g.size(); ++i) {
        total += g[i];
        peak = std::max(peak, static_cast<double>(g[i]));
    }
    CHECK(peak == doctest::Approx(1.0));
    CHECK(total == doctest::Approx(2 * 3.14159265358979 * 4.0).epsilon(0.01));
}

TEST_CASE("flip_average matches an explicit loop oracle") {
    std::mt19937_64 rng(3);
    Tensor<float> a({2, 4, 3, 5}), b({2, 4, 3, 5});
    fill_uniform(a, rng, -1.0f, 1.0f);
    fill_uniform(b, rng, -1.0f, 1.0f);
    const std::vector<std::pair<int, int>> pairs{{1, 2}};
    auto got = flip_average(a, b, pairs);
    const int chan[4] = {0, 2, 1, 3};
    for (int n = 0; n < 2; ++n) {
        for (int c = 0; c < 4; ++c) {
            for (int y = 0; y < 3; ++y) {
                for (int x = 0; x < 5; ++x) {
                    const float want = 0.5f * (a.at4(n, c, y, x) + b.at4(n, chan[c], y, 4 - x));
                    CHECK(got.at4(n, c, y, x) == want);
                }
            }
        }
    }
    CHECK_THROWS_AS(flip_average(a, b, {{0, 9}}), ValueError);
    CHECK_THROWS_AS(flip_average(a, Tensor<float>({2, 4, 3, 4}), pairs), ShapeError);
}

TEST_CASE("flip_average of a map with its own mirror is the map itself") {
    // If the flipped pass returns exactly the mirrored, channel-swapped
    // original, averaging must reproduce the original bit for bit.
    std::mt19937_64 rng(4);
    Tensor<float> hm({1, 4, 4, 6});
    fill_uniform(hm, rng, 0.0f, 1.0f);
    const std::vector<std::pair<int, int>> pairs{{0, 1}, {2, 3}};
    Tensor<float> mirrored({1, 4, 4, 6});
    const int chan[4] = {1, 0, 3, 2};
    for (int c = 0; c < 4; ++c) {
        for (int y = 0; y < 4; ++y) {
            for (int x = 0; x < 6; ++x) {
                mirrored.at4(0, c, y, x) = hm.at4(0, chan[c], y, 5 - x);
            }
        }
    }
    auto avg = flip_average(hm, mirrored, pairs);
    for (std::int64_t i = 0; i < hm.size(); ++i) CHECK(avg[i] == hm[i]);
}

TEST_CASE("box transform round-trips and scales as expected") {
    auto bt = BoxTransform::from_box({100, 50, 96, 128}, 256, 192);
    double ix, iy, sx, sy;
    bt.to_input(100, 50, ix, iy);
    CHECK(ix == doctest::Approx(0));
    CHECK(iy == doctest::Approx(0));
    bt.to_input(196, 178, ix, iy);
    CHECK(ix == doctest::Approx(192));
    CHECK(iy == doctest::Approx(256));

    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-50.0, 400.0);
    for (int i = 0; i < 50; ++i) {
        const double x0 = u(rng), y0 = u(rng);
        bt.to_input(x0, y0, ix, iy);
        bt.to_source(ix, iy, sx, sy);
        CHECK(sx == doctest::Approx(x0).epsilon(1e-6));
        CHECK(sy == doctest::Approx(y0).epsilon(1e-6));
    }
    CHECK_THROWS_AS(BoxTransform::from_box({0, 0, 0, 10}, 256, 192), ValueError);
}

TEST_CASE("map_to_source: identity box and 4x heatmap stride") {
    // Box congruent to the input: only the heatmap stride applies.
    auto bt = BoxTransform::from_box({0, 0, 192, 256}, 256, 192);
    std::vector<Keypoint> kps{{10.0, 20.0, 0.7}};
    auto res = map_to_source(kps, 64, 48, bt);
    REQUIRE(res.keypoints.size() == 1);
    CHECK(res.keypoints[0].x == doctest::Approx(40.0));
    CHECK(res.keypoints[0].y == doctest::Approx(80.0));
    CHECK(res.keypoints[0].score == 0.7);

    // Shifted, scaled box.
    auto bt2 = BoxTransform::from_box({100, 200, 384, 512}, 256, 192);
    auto res2 = map_to_source(kps, 64, 48, bt2);
    CHECK(res2.keypoints[0].x == doctest::Approx(100 + 40.0 * 2));
    CHECK(res2.keypoints[0].y == doctest::Approx(200 + 80.0 * 2));
}

TEST_CASE("source -> input -> heatmap -> source round-trip stays within half a pixel") {
    std::mt19937_64 rng(6);
    auto ext = extend_box({37, 12, 150, 180});
    auto bt = BoxTransform::from_box(ext, 256, 192);
    std::uniform_real_distribution<double> ux(ext.x + 10, ext.x + ext.w - 10);
    std::uniform_real_distribution<double> uy(ext.y + 10, ext.y + ext.h - 10);
    const double sx_per_hm = ext.w / 48.0;  // source pixels per heatmap pixel
    for (int i = 0; i < 30; ++i) {
        const double sx = ux(rng), sy = uy(rng);
        double ix, iy;
        bt.to_input(sx, sy, ix, iy);
        // Quantize to the heatmap grid (stride 4) as decoding would.
        const double hx = std::round(ix / 4.0), hy = std::round(iy / 4.0);
        auto res = map_to_source({{hx, hy, 1.0}}, 64, 48, bt);
        CHECK(std::fabs(res.keypoints[0].x - sx) <= 0.5 * sx_per_hm + 1e-9);
        CHECK(std::fabs(res.keypoints[0].y - sy) <= 0.5 * sx_per_hm + 1e-9);
    }
}

TEST_CASE("crop_resize samples bilinearly with edge clamping") {
    // 1x1x2x2 image; box spanning it exactly, resampled to 4x4.
    Tensor<float> img({1, 1, 2, 2}, std::vector<float>{0, 1, 2, 3});
    auto bt = BoxTransform::from_box({0, 0, 2, 2}, 4, 4);
    auto out = crop_resize(img, bt);
    CHECK(out.shape() == Shape{1, 1, 4, 4});
    CHECK(out.at4(0, 0, 0, 0) == doctest::Approx(0.0f));
    CHECK(out.at4(0, 0, 0, 2) == doctest::Approx(1.0f));   // x=1.0 exactly on pixel 1
    CHECK(out.at4(0, 0, 0, 1) == doctest::Approx(0.5f));   // halfway between 0 and 1
    CHECK(out.at4(0, 0, 2, 0) == doctest::Approx(2.0f));
    CHECK(out.at4(0, 0, 3, 3) == doctest::Approx(3.0f));   // clamped bottom-right

    // Fully out-of-bounds box clamps to the nearest corner value.
    auto far = crop_resize(img, BoxTransform::from_box({100, 100, 10, 10}, 2, 2));
    for (std::int64_t i = 0; i < far.size(); ++i) CHECK(far[i] == 3.0f);

    CHECK_THROWS_AS(crop_resize(Tensor<float>({2, 1, 2, 2}), bt), ShapeError);
}

TEST_CASE("mirror_horizontal is an involution") {
    std::mt19937_64 rng(7);
    Tensor<float> x({2, 3, 4, 5});
    fill_uniform(x, rng, -1.0f, 1.0f);
    auto m = mirror_horizontal(x);
    CHECK(m.at4(0, 0, 0, 0) == x.at4(0, 0, 0, 4));
    auto back = mirror_horizontal(m);
    for (std::int64_t i = 0; i < x.size(); ++i) CHECK(back[i] == x[i]);
}
