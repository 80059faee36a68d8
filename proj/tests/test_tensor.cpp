#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <random>

#include "greit/tensor.hpp"

using namespace greit;

TEST_CASE("construction and indexing") {
    Tensor<float> t({2, 3, 4, 5});
    CHECK(t.size() == 120);
    CHECK(t.rank() == 4);
    t.at4(1, 2, 3, 4) = 7.0f;
    CHECK(t[119] == 7.0f);  // last element in row-major order
    CHECK(sum(t) == 7.0f);

    CHECK_THROWS_AS(Tensor<float>({2, 0, 3}), ShapeError);
    CHECK_THROWS_AS(Tensor<float>({2, 2}, std::vector<float>{1, 2, 3}), ShapeError);
}

TEST_CASE("reshape preserves data, rejects bad element counts") {
    Tensor<int> t({2, 3}, std::vector<int>{1, 2, 3, 4, 5, 6});
    auto r = reshape(t, {3, 2});
    CHECK(r.dim(0) == 3);
    for (int i = 0; i < 6; ++i) CHECK(r[i] == i + 1);
    CHECK_THROWS_AS(reshape(t, {4, 2}), ShapeError);
}

TEST_CASE("elementwise ops broadcast singleton dims") {
    Tensor<double> a({1, 2, 2, 2});
    Tensor<double> b({1, 2, 1, 1});
    for (int i = 0; i < 8; ++i) a[i] = i + 1;
    b[0] = 10;
    b[1] = 100;
    auto m = elem_mul(a, b);
    CHECK(m[0] == 10);
    CHECK(m[3] == 40);
    CHECK(m[4] == 500);
    CHECK(m[7] == 800);
    auto s = add(a, b);
    CHECK(s[0] == 11);
    CHECK(s[7] == 108);

    Tensor<double> bad({1, 3, 1, 1});
    CHECK_THROWS_AS(elem_mul(a, bad), ShapeError);
}

TEST_CASE("matmul against hand-computed product") {
    Tensor<double> a({1, 2, 3}, std::vector<double>{1, 2, 3, 4, 5, 6});
    Tensor<double> b({1, 3, 2}, std::vector<double>{7, 8, 9, 10, 11, 12});
    auto c = matmul(a, b);
    CHECK(c.shape() == Shape{1, 2, 2});
    CHECK(c[0] == doctest::Approx(58));
    CHECK(c[1] == doctest::Approx(64));
    CHECK(c[2] == doctest::Approx(139));
    CHECK(c[3] == doctest::Approx(154));
}

TEST_CASE("matmul broadcasts a batch of one") {
    std::mt19937_64 rng(7);
    Tensor<double> a({3, 2, 4});
    Tensor<double> b({1, 4, 5});
    fill_uniform(a, rng, -1.0, 1.0);
    fill_uniform(b, rng, -1.0, 1.0);
    auto c = matmul(a, b);
    CHECK(c.shape() == Shape{3, 2, 5});
    for (int bi = 0; bi < 3; ++bi) {
        for (int i = 0; i < 2; ++i) {
            for (int j = 0; j < 5; ++j) {
                double acc = 0;
                for (int k = 0; k < 4; ++k) {
                    acc += a[(bi * 2 + i) * 4 + k] * b[k * 5 + j];
                }
                CHECK(c[(bi * 2 + i) * 5 + j] == doctest::Approx(acc));
            }
        }
    }
    Tensor<double> bad({1, 3, 5});
    CHECK_THROWS_AS(matmul(a, bad), ShapeError);
}

TEST_CASE("concat then split round-trips") {
    std::mt19937_64 rng(11);
    Tensor<float> a({2, 3, 4, 4}), b({2, 5, 4, 4});
    fill_uniform(a, rng, -1.0f, 1.0f);
    fill_uniform(b, rng, -1.0f, 1.0f);
    auto cat = concat_channels(std::vector<Tensor<float>>{a, b});
    CHECK(cat.shape() == Shape{2, 8, 4, 4});
    auto parts = split_channels(cat, {3, 5});
    for (std::int64_t i = 0; i < a.size(); ++i) CHECK(parts[0][i] == a[i]);
    for (std::int64_t i = 0; i < b.size(); ++i) CHECK(parts[1][i] == b[i]);

    Tensor<float> wrong_hw({2, 3, 5, 4});
    CHECK_THROWS_AS(concat_channels(std::vector<Tensor<float>>{a, wrong_hw}), ShapeError);
    CHECK_THROWS_AS(split_channels(cat, {3, 4}), ShapeError);
}

TEST_CASE("shuffle_channels implements the group transpose") {
    // 6 channels, 2 groups: order (0,1,2,3,4,5) -> channel c lands at
    // (c % 2) * 3 + c / 2, i.e. output channel order (0,2,4,1,3,5).
    Tensor<int> x({1, 6, 1, 1}, std::vector<int>{0, 1, 2, 3, 4, 5});
    auto y = shuffle_channels(x, 2);
    const std::vector<int> want{0, 2, 4, 1, 3, 5};
    for (int i = 0; i < 6; ++i) CHECK(y[i] == want[i]);

    // Shuffling with g then C/g restores the original order.
    auto back = shuffle_channels(y, 3);
    for (int i = 0; i < 6; ++i) CHECK(back[i] == i);

    CHECK_THROWS_AS(shuffle_channels(x, 4), ShapeError);
}

TEST_CASE("shuffle is a permutation on random tensors") {
    std::mt19937_64 rng(3);
    for (int iter = 0; iter < 20; ++iter) {
        const int g = 2 + static_cast<int>(rng() % 3);
        const int c = g * (1 + static_cast<int>(rng() % 4));
        Tensor<double> x({1, c, 2, 2});
        fill_uniform(x, rng, -1.0, 1.0);
        auto y = shuffle_channels(x, g);
        CHECK(sum(y) == doctest::Approx(sum(x)));
        std::vector<double> xs(x.data(), x.data() + x.size());
        std::vector<double> ys(y.data(), y.data() + y.size());
        std::sort(xs.begin(), xs.end());
        std::sort(ys.begin(), ys.end());
        CHECK(xs == ys);
    }
}
