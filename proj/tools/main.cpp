#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "json.hpp"

#include "greit/accounting.hpp"
#include "greit/gradcheck.hpp"
#include "greit/io.hpp"
#include "greit/metrics.hpp"
#include "greit/network.hpp"
#include "greit/posedecode.hpp"

namespace {

constexpr int kExitOk = 0;
constexpr int kExitUsage = 1;
constexpr int kExitData = 2;

void emit(const std::string& text, const std::string& out_path) {
    if (out_path.empty()) {
        std::cout << text;
        return;
    }
    std::ofstream os(out_path);
    if (!os) throw greit::IoError("cannot open for writing: " + out_path);
    os << text;
}

bool parse_hw(const std::string& s, int& h, int& w) {
    const auto x = s.find('x');
    if (x == std::string::npos) return false;
    try {
        h = std::stoi(s.substr(0, x));
        w = std::stoi(s.substr(x + 1));
    } catch (const std::exception&) {
        return false;
    }
    return h > 0 && w > 0;
}

bool parse_box(const std::string& s, greit::Box& box) {
    std::istringstream is(s);
    char c1, c2, c3;
    if (!(is >> box.x >> c1 >> box.y >> c2 >> box.w >> c3 >> box.h)) return false;
    if (c1 != ',' || c2 != ',' || c3 != ',') return false;
    is >> std::ws;
    return is.eof();
}

int cmd_count(const std::string& arch, const std::string& input, bool per_layer,
              const std::string& format, const std::string& out_path) {
    int h = 0, w = 0;
    if (!input.empty() && !parse_hw(input, h, w)) {
        std::cerr << "error: --input wants HxW, got '" << input << "'\n";
        return kExitUsage;
    }
    auto net = greit::Network::build(greit::ArchConfig::for_variant(arch), greit::InitKind::Zero);
    greit::CostReport rep = input.empty() ? greit::count_params(net) : greit::count_flops(net, h, w);
    emit(format == "json" ? rep.to_json(per_layer) : rep.to_text(per_layer), out_path);
    return kExitOk;
}

int cmd_growth(const std::string& method, const std::string& arch, const std::string& format,
               const std::string& out_path) {
    const auto rows = greit::channel_growth_report(method, greit::ArchConfig::for_variant(arch));
    if (format == "json") {
        nlohmann::json j = nlohmann::json::array();
        for (const auto& r : rows) {
            j.push_back({{"stage", r.stage}, {"method", r.method}, {"channels", r.channels}});
        }
        emit(j.dump(2) + "\n", out_path);
    } else {
        std::string text;
        for (const auto& r : rows) {
            text += "stage" + std::to_string(r.stage) + " " + r.method + " channels " +
                    std::to_string(r.channels) + "\n";
        }
        emit(text, out_path);
    }
    return kExitOk;
}

int cmd_infer(const std::string& arch, const std::string& weights, const std::string& image,
              const std::string& box_str, bool flip, const std::string& config_path,
              std::int64_t image_id, const std::string& out_path) {
    greit::RunConfig cfg;
    if (!config_path.empty()) {
        cfg = greit::load_config(config_path);
    } else {
        cfg.arch = greit::ArchConfig::for_variant(arch);
    }
    greit::Box box;
    if (!parse_box(box_str, box)) {
        std::cerr << "error: --box wants x,y,w,h\n";
        return kExitUsage;
    }

    auto net = greit::Network::build(cfg.arch, greit::InitKind::Zero);
    greit::load_weights(weights, net);

    const greit::Tensor<float> img = greit::load_image(image, cfg.norm);
    const greit::Box ext = greit::extend_box(box, static_cast<double>(cfg.input_h) / cfg.input_w);
    const auto bt = greit::BoxTransform::from_box(ext, cfg.input_h, cfg.input_w);
    const greit::Tensor<float> input = greit::crop_resize(img, bt);

    greit::Tensor<float> hm = net.forward(input);
    if (flip) {
        const greit::Tensor<float> hm_f = net.forward(greit::mirror_horizontal(input));
        hm = greit::flip_average(hm, hm_f, cfg.arch.flip_pairs);
    }
    const auto kps = greit::decode_heatmaps(hm, /*quarter_offset=*/true);
    greit::PoseResult res = greit::map_to_source(kps[0], hm.dim(2), hm.dim(3), bt);
    res.image_id = image_id;
    res.flipped = flip;

    if (out_path.empty()) {
        const std::string tmp = "/dev/stdout";
        greit::save_pose_results({res}, tmp);
    } else {
        greit::save_pose_results({res}, out_path);
    }
    return kExitOk;
}

int cmd_gradcheck(const std::string& block, std::uint64_t seed, const std::string& out_path) {
    const auto rows = greit::run_block_gradchecks(block, seed);
    std::string text;
    bool all_pass = true;
    for (const auto& r : rows) {
        char buf[256];
        std::snprintf(buf, sizeof(buf), "%-6s case %d  %-4s  max_rel_err=%.3e\n", r.block.c_str(),
                      r.case_index, r.report.pass ? "PASS" : "FAIL", r.report.max_rel_err);
        text += buf;
        all_pass = all_pass && r.report.pass;
    }
    emit(text, out_path);
    if (!all_pass) {
        std::cerr << "error: gradient check failed\n";
        return kExitData;
    }
    return kExitOk;
}

int cmd_eval(const std::string& preds_path, const std::string& gt_path, const std::string& metric,
             const std::string& out_path) {
    const auto preds = greit::load_annotations(preds_path);
    const auto gts = greit::load_annotations(gt_path);
    std::string text;
    if (metric == "oks") {
        const auto r = greit::ap_ar(preds.annotations, gts.annotations,
                                    greit::ArchConfig::default_oks_k());
        char buf[160];
        std::snprintf(buf, sizeof(buf), "AP %.4f\nAP50 %.4f\nAP75 %.4f\nAR %.4f\n", r.ap, r.ap50,
                      r.ap75, r.ar);
        text = buf;
    } else {
        if (gts.head_sizes.empty()) {
            throw greit::IoError("pckh needs head_size fields in the ground-truth file");
        }
        const double p = greit::pckh(preds.annotations, gts.annotations, gts.head_sizes);
        char buf[64];
        std::snprintf(buf, sizeof(buf), "PCKh@0.5 %.2f\n", p);
        text = buf;
    }
    emit(text, out_path);
    return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"Greit-HRNet pose toolkit"};
    app.require_subcommand(1);

    std::string arch = "greit18", input, format = "text", out_path;
    bool per_layer = false;
    auto* count = app.add_subcommand("count", "Parameter and FLOP report");
    count->add_option("--arch", arch, "Network variant");
    count->add_option("--input", input, "Input size HxW (omit for params only)");
    count->add_flag("--per-layer", per_layer, "Include per-module rows");
    count->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    count->add_option("--out", out_path, "Write to file instead of stdout");

    std::string method = "ccw";
    auto* growth = app.add_subcommand("growth", "Channel-growth trajectory");
    growth->add_option("--method", method)->required()->check(CLI::IsMember({"ccw", "gcw"}));
    growth->add_option("--arch", arch);
    growth->add_option("--format", format)->check(CLI::IsMember({"text", "json"}));
    growth->add_option("--out", out_path);

    std::string weights, image, box_str, config_path;
    bool flip = false;
    std::int64_t image_id = 0;
    auto* infer = app.add_subcommand("infer", "Single-instance pose inference");
    infer->add_option("--arch", arch);
    infer->add_option("--weights", weights)->required();
    infer->add_option("--image", image)->required();
    infer->add_option("--box", box_str, "Detection box x,y,w,h")->required();
    infer->add_flag("--flip", flip, "Flip-test averaging");
    infer->add_option("--config", config_path, "JSON run config");
    infer->add_option("--image-id", image_id);
    infer->add_option("--out", out_path);

    std::string block = "all";
    std::uint64_t seed = 1;
    auto* gradcheck = app.add_subcommand("gradcheck", "Finite-difference gradient checks");
    gradcheck->add_option("--block", block)
        ->check(CLI::IsMember({"se", "ccw", "gcw", "gsw", "lka", "lks", "greit", "fuse", "head", "all"}));
    gradcheck->add_option("--seed", seed);
    gradcheck->add_option("--out", out_path);

    std::string preds_path, gt_path, metric = "oks";
    auto* eval = app.add_subcommand("eval", "Score predictions against ground truth");
    eval->add_option("--preds", preds_path)->required();
    eval->add_option("--gt", gt_path)->required();
    eval->add_option("--metric", metric)->check(CLI::IsMember({"oks", "pckh"}));
    eval->add_option("--out", out_path);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        return app.exit(e) == 0 ? kExitOk : kExitUsage;
    }

    try {
        if (count->parsed()) return cmd_count(arch, input, per_layer, format, out_path);
        if (growth->parsed()) return cmd_growth(method, arch, format, out_path);
        if (infer->parsed())
            return cmd_infer(arch, weights, image, box_str, flip, config_path, image_id, out_path);
        if (gradcheck->parsed()) return cmd_gradcheck(block, seed, out_path);
        if (eval->parsed()) return cmd_eval(preds_path, gt_path, metric, out_path);
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << '\n';
        return kExitData;
    }
    return kExitUsage;
}
