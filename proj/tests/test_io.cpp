#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <random>

#include "greit/io.hpp"

using namespace greit;

namespace {

namespace fs = std::filesystem;

struct TmpFile {
    fs::path path;
    explicit TmpFile(const std::string& name) {
        path = fs::temp_directory_path() / ("greit_test_" + name);
    }
    ~TmpFile() {
        std::error_code ec;
        fs::remove(path, ec);
    }
    std::string str() const { return path.string(); }
};

std::string slurp(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    REQUIRE(is);
    return std::string(std::istreambuf_iterator<char>(is), {});
}

void spit(const std::string& path, const std::string& data) {
    std::ofstream os(path, std::ios::binary);
    REQUIRE(os);
    os << data;
}

}  // namespace

TEST_CASE("save -> load -> save produces a byte-identical weight file") {
    auto net = Network::build(ArchConfig::for_variant("greit18"), InitKind::Random, 123);
    TmpFile f1("w1.grwt"), f2("w2.grwt");
    save_weights(net, f1.str());
    auto fresh = Network::build(ArchConfig::for_variant("greit18"), InitKind::Zero);
    load_weights(f1.str(), fresh);
    save_weights(fresh, f2.str());
    const auto a = slurp(f1.str()), b = slurp(f2.str());
    CHECK(a.size() > 1000);
    CHECK(a == b);

    // Loaded tensors match the source exactly.
    auto src = net.named_parameters();
    auto dst = fresh.named_parameters();
    REQUIRE(src.size() == dst.size());
    for (std::size_t i = 0; i < src.size(); ++i) {
        CHECK(src[i].first == dst[i].first);
        for (std::int64_t j = 0; j < src[i].second->size(); ++j) {
            CHECK((*src[i].second)[j] == (*dst[i].second)[j]);
        }
    }
}

TEST_CASE("cross-variant load fails and names the offending parameters") {
    auto g30 = Network::build(ArchConfig::for_variant("greit30"), InitKind::Zero);
    TmpFile f("w30.grwt");
    save_weights(g30, f.str());
    auto g18 = Network::build(ArchConfig::for_variant("greit18"), InitKind::Zero);
    try {
        load_weights(f.str(), g18);
        FAIL("cross-variant load must throw");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        // greit30's extra blocks (e.g. stage3.block3) only exist in the file.
        CHECK(msg.find("not in network") != std::string::npos);
        CHECK(msg.find("stage") != std::string::npos);
    }

    // lite18 <-> greit18 differ in both directions (gsw vs sw parameters).
    auto lite = Network::build(ArchConfig::for_variant("lite18"), InitKind::Zero);
    TmpFile fl("wl.grwt");
    save_weights(lite, fl.str());
    try {
        load_weights(fl.str(), g18);
        FAIL("lite weights must not load into greit18");
    } catch (const IoError& e) {
        const std::string msg = e.what();
        CHECK(msg.find("missing from file") != std::string::npos);
        CHECK(msg.find("not in network") != std::string::npos);
    }
}

TEST_CASE("corrupt weight files are rejected") {
    auto net = Network::build(ArchConfig::for_variant("lite18"), InitKind::Zero);
    TmpFile f("bad.grwt");

    spit(f.str(), "GRWX");
    CHECK_THROWS_AS(load_weights(f.str(), net), IoError);

    // Truncation inside the payload.
    TmpFile full("full.grwt");
    save_weights(net, full.str());
    auto bytes = slurp(full.str());
    spit(f.str(), bytes.substr(0, bytes.size() / 2));
    CHECK_THROWS_AS(load_weights(f.str(), net), IoError);

    // Unsupported version.
    bytes[4] = 9;
    spit(f.str(), bytes);
    CHECK_THROWS_AS(load_weights(f.str(), net), IoError);

    CHECK_THROWS_AS(load_weights("/no/such/dir/w.grwt", net), IoError);
}

TEST_CASE("grim raw images round-trip exactly") {
    std::mt19937_64 rng(1);
    Tensor<float> img({1, 3, 5, 7});
    fill_uniform(img, rng, -2.0f, 2.0f);
    TmpFile f("img.grim");
    save_raw_image(img, f.str());
    auto back = load_image(f.str());
    REQUIRE(back.shape() == img.shape());
    for (std::int64_t i = 0; i < img.size(); ++i) CHECK(back[i] == img[i]);

    CHECK_THROWS_AS(save_raw_image(Tensor<float>({2, 3, 4, 4}), f.str()), ShapeError);
}

TEST_CASE("ppm images are scaled and normalized per channel") {
    // 2x1 all-white pixels.
    std::string ppm = "P6\n2 1\n255\n";
    for (int i = 0; i < 6; ++i) ppm.push_back(static_cast<char>(0xff));
    TmpFile f("white.ppm");
    spit(f.str(), ppm);
    ImageNorm norm;
    auto img = load_image(f.str(), norm);
    REQUIRE(img.shape() == Shape{1, 3, 1, 2});
    for (int c = 0; c < 3; ++c) {
        const float want = static_cast<float>((1.0 - norm.mean[static_cast<std::size_t>(c)]) /
                                              norm.std[static_cast<std::size_t>(c)]);
        CHECK(img.at4(0, c, 0, 0) == doctest::Approx(want));
        CHECK(img.at4(0, c, 0, 1) == doctest::Approx(want));
    }

    // Hand-decoded 1x2 gradient with a comment in the header.
    std::string grad = "P6\n# test\n1 2\n255\n";
    const unsigned char px[6] = {0, 128, 255, 64, 0, 32};
    for (unsigned char b : px) grad.push_back(static_cast<char>(b));
    TmpFile g("grad.ppm");
    spit(g.str(), grad);
    auto gi = load_image(g.str(), norm);
    REQUIRE(gi.shape() == Shape{1, 3, 2, 1});
    CHECK(gi.at4(0, 0, 0, 0) ==
          doctest::Approx((0.0 / 255 - norm.mean[0]) / norm.std[0]));
    CHECK(gi.at4(0, 1, 0, 0) ==
          doctest::Approx((128.0 / 255 - norm.mean[1]) / norm.std[1]));
    CHECK(gi.at4(0, 2, 1, 0) ==
          doctest::Approx((32.0 / 255 - norm.mean[2]) / norm.std[2]));

    // Wrong maxval and truncated pixel data fail.
    TmpFile bad("bad.ppm");
    spit(bad.str(), "P6\n2 2\n65535\n");
    CHECK_THROWS_AS(load_image(bad.str()), IoError);
    spit(bad.str(), "P6\n2 2\n255\nxy");
    CHECK_THROWS_AS(load_image(bad.str()), IoError);
    spit(bad.str(), "BM??????");
    CHECK_THROWS_AS(load_image(bad.str()), IoError);
}

TEST_CASE("config loading honors overrides and rejects unknown keys") {
    TmpFile f("conf.json");
    spit(f.str(), R"({"arch": "greit30", "input_size": [384, 288], "se_ratio": 4,
                      "mean": [0.5, 0.5, 0.5], "std": [1, 1, 1]})");
    auto cfg = load_config(f.str());
    CHECK(cfg.arch.variant == "greit30");
    CHECK(cfg.input_h == 384);
    CHECK(cfg.input_w == 288);
    CHECK(cfg.arch.se_ratio == 4);
    CHECK(cfg.norm.mean[0] == 0.5);
    CHECK(cfg.norm.std[2] == 1.0);

    spit(f.str(), R"({"arch": "greit18", "dropout": 0.5})");
    CHECK_THROWS_AS(load_config(f.str()), IoError);
    spit(f.str(), R"({"input_size": [256, 192]})");
    CHECK_THROWS_AS(load_config(f.str()), IoError);  // arch is mandatory
    spit(f.str(), R"({"arch": "greit18", "widths": [40, 80, 160]})");
    CHECK_THROWS_AS(load_config(f.str()), IoError);  // fails arch validation
    spit(f.str(), R"([1, 2, 3])");
    CHECK_THROWS_AS(load_config(f.str()), IoError);  // not an object
    spit(f.str(), "{nonsense");
    CHECK_THROWS_AS(load_config(f.str()), IoError);  // parse error
}

TEST_CASE("annotations load with optional fields and head sizes") {
    TmpFile f("ann.json");
    spit(f.str(), R"({"annotations": [
      {"image_id": 3, "instance_id": 1, "area": 900.0, "head_size": 12.5,
       "keypoints": [[1, 2, 2], [3, 4, 0]]},
      {"image_id": 4, "score": 0.75,
       "keypoints": [[5, 6, 1], [7, 8, 2]]}
    ]})");
    auto ds = load_annotations(f.str());
    REQUIRE(ds.annotations.size() == 2);
    CHECK(ds.annotations[0].image_id == 3);
    CHECK(ds.annotations[0].instance_id == 1);
    CHECK(ds.annotations[0].area == 900.0);
    CHECK(ds.annotations[0].keypoints[1][2] == 0.0);
    CHECK(ds.annotations[1].score == 0.75);
    CHECK(ds.annotations[1].instance_id == 0);  // default
    REQUIRE(ds.head_sizes.size() == 2);
    CHECK(ds.head_sizes[0] == 12.5);
    CHECK(ds.head_sizes[1] == 0.0);  // absent entries stay zero

    // No head sizes anywhere: the parallel vector collapses to empty.
    spit(f.str(), R"({"annotations": [{"image_id": 1, "keypoints": [[1, 2, 2]]}]})");
    CHECK(load_annotations(f.str()).head_sizes.empty());

    spit(f.str(), R"({"images": []})");
    CHECK_THROWS_AS(load_annotations(f.str()), IoError);
    spit(f.str(), R"({"annotations": [{"image_id": 1, "keypoints": [[1, 2]]}]})");
    CHECK_THROWS_AS(load_annotations(f.str()), IoError);
}

TEST_CASE("pose results round-trip through the annotation loader") {
    PoseResult r;
    r.image_id = 42;
    r.keypoints = {{10.5, 20.25, 0.8}, {30.0, 40.0, 0.6}};
    r.box = {5, 6, 100, 133};
    TmpFile f("pose.json");
    save_pose_results({r}, f.str());
    auto ds = load_annotations(f.str());
    REQUIRE(ds.annotations.size() == 1);
    const auto& a = ds.annotations[0];
    CHECK(a.image_id == 42);
    CHECK(a.instance_id == 0);
    CHECK(a.score == doctest::Approx(0.7));  // mean keypoint score
    REQUIRE(a.keypoints.size() == 2);
    CHECK(a.keypoints[0][0] == 10.5);
    CHECK(a.keypoints[0][1] == 20.25);
    CHECK(a.keypoints[0][2] == 0.8);
    CHECK(a.keypoints[1][0] == 30.0);
}

TEST_CASE("random-init weights survive a round trip bit for bit") {
    for (std::uint64_t seed : {1ull, 99ull}) {
        auto net = Network::build(ArchConfig::for_variant("lite18"), InitKind::Random, seed);
        TmpFile f("rt.grwt");
        save_weights(net, f.str());
        auto other = Network::build(ArchConfig::for_variant("lite18"), InitKind::Random, seed + 1);
        load_weights(f.str(), other);
        std::mt19937_64 rng(0);
        Tensor<float> x({1, 3, 64, 64});
        fill_uniform(x, rng, -1.0f, 1.0f);
        auto ya = net.forward(x);
        auto yb = other.forward(x);
        for (std::int64_t i = 0; i < ya.size(); ++i) CHECK(ya[i] == yb[i]);
    }
}
