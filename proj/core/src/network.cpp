#include "greit/network.hpp"

#include <algorithm>
#include <random>

namespace greit {

namespace {

using TT = Tensor<float>;

Conv2dParams<TT> conv_p(int out_ch, int in_ch, int k, int stride, int pad, int dil, int groups,
                        bool bias) {
    Conv2dParams<TT> p;
    p.weight = TT({out_ch, in_ch / groups, k, k});
    if (bias) p.bias = TT({out_ch});
    p.stride_h = p.stride_w = stride;
    p.pad_h = p.pad_w = pad;
    p.dil_h = p.dil_w = dil;
    p.groups = groups;
    return p;
}

BatchNormParams<TT> bn_p(int c) {
    BatchNormParams<TT> p;
    p.gamma = TT({c});
    p.beta = TT({c});
    p.running_mean = TT({c});
    p.running_var = TT({c});
    p.epsilon = 1e-5;
    return p;
}

ConvBn<TT> cb_p(int out_ch, int in_ch, int k, int stride, int pad, int groups) {
    return ConvBn<TT>{conv_p(out_ch, in_ch, k, stride, pad, 1, groups, /*bias=*/false), bn_p(out_ch)};
}

SEParams<TT> se_p(int c, int ratio) {
    const int hidden = std::max(c / ratio, 1);
    SEParams<TT> p;
    p.reduce = conv_p(hidden, c, 1, 1, 0, 1, 1, /*bias=*/true);
    p.expand = conv_p(c, hidden, 1, 1, 0, 1, 1, /*bias=*/true);
    return p;
}

GSWParams<TT> gsw_p(int c, const ArchConfig& cfg) {
    const int cprime = std::max(c / cfg.gsw_cprime_div, cfg.gsw_cprime_min);
    GSWParams<TT> p;
    p.to_cprime = conv_p(cprime, c, 1, 1, 0, 1, 1, /*bias=*/true);
    p.to_one = conv_p(1, cprime, 1, 1, 0, 1, 1, /*bias=*/true);
    p.se = se_p(c, cfg.se_ratio);
    return p;
}

LKAParams<TT> lka_p(int c, const ArchConfig& cfg) {
    LKAParams<TT> p;
    p.dw = conv_p(c, c, cfg.lka_dw_kernel, 1, (cfg.lka_dw_kernel - 1) / 2, 1, c, /*bias=*/true);
    p.dwd = conv_p(c, c, cfg.lka_dwd_kernel, 1, cfg.lka_dwd_dilation * (cfg.lka_dwd_kernel - 1) / 2,
                   cfg.lka_dwd_dilation, c, /*bias=*/true);
    p.pw = conv_p(c, c, 1, 1, 0, 1, 1, /*bias=*/true);
    return p;
}

FuseParams<TT> fuse_p(const std::vector<int>& w, bool is_last) {
    const int n = static_cast<int>(w.size());
    FuseParams<TT> p;
    p.is_last = is_last;
    p.path.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        p.path[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            FusePath<TT> path;
            if (i < j) {
                for (int t = 0; t < j - i; ++t) {
                    const bool last = (t == j - i - 1);
                    FuseDownStep<TT> step;
                    step.dw = cb_p(w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)], 3, 2, 1,
                                   w[static_cast<std::size_t>(i)]);
                    step.pw = cb_p(last ? w[static_cast<std::size_t>(j)] : w[static_cast<std::size_t>(i)],
                                   w[static_cast<std::size_t>(i)], 1, 1, 0, 1);
                    path.down.push_back(std::move(step));
                }
            } else {
                path.up_pw = cb_p(w[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(i)], 1, 1, 0, 1);
                path.up_scale = 1 << (i - j);
            }
            p.path[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = std::move(path);
        }
    }
    if (is_last) {
        for (int j = 0; j < n; ++j) {
            p.post.push_back(cb_p(w[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(j)], 3, 1, 1,
                                  w[static_cast<std::size_t>(j)]));
        }
    }
    return p;
}

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 1469598103934665603ull;
    for (unsigned char c : s) {
        h ^= c;
        h *= 1099511628211ull;
    }
    return h;
}

}  // namespace

const std::vector<std::pair<int, int>>& ArchConfig::default_flip_pairs() {
    static const std::vector<std::pair<int, int>> pairs{{1, 2},   {3, 4},   {5, 6},   {7, 8},
                                                        {9, 10},  {11, 12}, {13, 14}, {15, 16}};
    return pairs;
}

const std::vector<double>& ArchConfig::default_oks_k() {
    // Falloff constants for the 17-keypoint COCO skeleton (twice the
    // per-keypoint sigma convention).
    static const std::vector<double> k{0.052, 0.050, 0.050, 0.070, 0.070, 0.158, 0.158, 0.144, 0.144,
                                       0.124, 0.124, 0.214, 0.214, 0.174, 0.174, 0.178, 0.178};
    return k;
}

ArchConfig ArchConfig::for_variant(const std::string& name) {
    ArchConfig cfg;
    cfg.variant = name;
    if (name == "greit18" || name == "lite18") {
        cfg.stage_repetitions = {1, 2, 4, 2};
    } else if (name == "greit30") {
        cfg.stage_repetitions = {1, 3, 8, 3};
    } else {
        throw ValueError("unknown network variant: " + name);
    }
    if (name == "lite18") {
        // The lite baseline's per-branch gating is plain pooled SE, which it
        // runs with a stronger reduction than the spatially-weighted variant.
        cfg.se_ratio = 8;
    }
    cfg.flip_pairs = default_flip_pairs();
    cfg.oks_k = default_oks_k();
    cfg.validate();
    return cfg;
}

void ArchConfig::validate() const {
    if (widths.size() != 4) throw ValueError("config: expected 4 branch widths");
    for (std::size_t i = 0; i + 1 < widths.size(); ++i) {
        if (widths[i + 1] != 2 * widths[i]) throw ValueError("config: widths must double per branch");
    }
    if (widths[0] % 2 != 0 || stem_width % 2 != 0) throw ValueError("config: widths must be even");
    if (stage_repetitions.size() != 4) throw ValueError("config: expected 4 stage repetitions");
    for (int r : stage_repetitions) {
        if (r < 1) throw ValueError("config: stage repetitions must be positive");
    }
    if (blocks_per_basic < 1) throw ValueError("config: blocks_per_basic must be positive");
    if (num_keypoints < 1) throw ValueError("config: num_keypoints must be positive");
    if (se_ratio < 1 || ccw_ratio < 1 || gsw_cprime_div < 1 || gsw_cprime_min < 1 || lks_expansion < 1) {
        throw ValueError("config: ratios must be positive");
    }
    if (variant == "greit18" || variant == "lite18") {
        if (stage_repetitions != std::vector<int>{1, 2, 4, 2}) {
            throw ValueError("config: 18-layer variants use repetitions (1,2,4,2)");
        }
    } else if (variant == "greit30") {
        if (stage_repetitions != std::vector<int>{1, 3, 8, 3}) {
            throw ValueError("config: greit30 uses repetitions (1,3,8,3)");
        }
    }
    if (!oks_k.empty() && static_cast<int>(oks_k.size()) != num_keypoints) {
        throw ValueError("config: oks_k length must equal num_keypoints");
    }
}

Network Network::build(const ArchConfig& cfg, InitKind init, std::uint64_t seed) {
    cfg.validate();
    Network net;
    net.cfg_ = cfg;
    if (net.cfg_.flip_pairs.empty()) net.cfg_.flip_pairs = ArchConfig::default_flip_pairs();
    if (net.cfg_.oks_k.empty() && cfg.num_keypoints == 17) net.cfg_.oks_k = ArchConfig::default_oks_k();

    const int w0 = cfg.widths[0];
    const int sw = cfg.stem_width;
    const int half = sw / 2;

    // Stem: 3x3 s2 conv, split, two subdivisions, each ending at w0/2 channels.
    net.stem_.in = cb_p(sw, 3, 3, 2, 1, 1);
    if (!cfg.is_lite()) net.stem_.lka = lka_p(half, cfg);
    net.stem_.a_dw = cb_p(half, half, 3, 2, 1, half);
    net.stem_.a_pw = cb_p(w0 / 2, half, 1, 1, 0, 1);
    const int expanded = half * cfg.lks_expansion;
    net.stem_.b_expand = cb_p(expanded, half, 1, 1, 0, 1);
    net.stem_.b_dw = cb_p(expanded, expanded, 3, 2, 1, expanded);
    net.stem_.b_restore = cb_p(w0 / 2, expanded, 1, 1, 0, 1);

    for (int s = 0; s < 3; ++s) {
        const int from = cfg.widths[static_cast<std::size_t>(s)];
        const int to = cfg.widths[static_cast<std::size_t>(s + 1)];
        net.trans_[static_cast<std::size_t>(s)].dw = cb_p(from, from, 3, 2, 1, from);
        net.trans_[static_cast<std::size_t>(s)].pw = cb_p(to, from, 1, 1, 0, 1);
    }

    net.stages_.resize(3);
    for (int s = 0; s < 3; ++s) {
        const int n_branches = s + 2;
        std::vector<int> w(cfg.widths.begin(), cfg.widths.begin() + n_branches);
        const auto ga = cfg.is_lite() ? GroupAssignment::single_group(n_branches)
                                      : GroupAssignment::two_groups(n_branches);
        std::vector<std::vector<int>> parts;
        if (!ga.high.empty()) parts.push_back(ga.high);
        if (!ga.low.empty()) parts.push_back(ga.low);

        auto& stage = net.stages_[static_cast<std::size_t>(s)];
        const int n_basic = cfg.stage_repetitions[static_cast<std::size_t>(s + 1)];
        stage.blocks.resize(static_cast<std::size_t>(n_basic));
        for (int b = 0; b < n_basic; ++b) {
            auto& block = stage.blocks[static_cast<std::size_t>(b)];
            block.layers.resize(static_cast<std::size_t>(cfg.blocks_per_basic));
            for (auto& layer : block.layers) {
                for (const auto& idx : parts) {
                    GreitBlockParams<TT> gp;
                    int concat_half = 0;
                    for (int i : idx) concat_half += w[static_cast<std::size_t>(i)] / 2;
                    gp.gcw_se = se_p(concat_half, cfg.ccw_ratio);
                    for (int i : idx) {
                        const int c = w[static_cast<std::size_t>(i)] / 2;
                        GreitBranchParams<TT> bp;
                        bp.dw = cb_p(c, c, 3, 1, 1, c);
                        if (cfg.is_lite()) {
                            bp.gap_se = se_p(c, cfg.se_ratio);
                        } else {
                            bp.gsw = gsw_p(c, cfg);
                        }
                        gp.branch.push_back(std::move(bp));
                    }
                    layer.groups.push_back(std::move(gp));
                }
            }
            const bool is_last_fuse = (s == 2 && b == n_basic - 1);
            block.fuse = fuse_p(w, is_last_fuse);
        }
    }

    net.head_ = conv_p(cfg.num_keypoints, w0, 1, 1, 0, 1, 1, /*bias=*/true);

    if (init == InitKind::Random) {
        net.visit_params([seed](const std::string& name, TT& t, bool) {
            std::mt19937_64 rng(seed ^ fnv1a(name));
            const auto ends_with = [&](const char* suf) {
                const std::size_t n = std::char_traits<char>::length(suf);
                return name.size() >= n && name.compare(name.size() - n, n, suf) == 0;
            };
            if (ends_with(".weight")) {
                // Centered uniform with fan-in scaling.
                std::int64_t fan_in = 1;
                for (int d = 1; d < t.rank(); ++d) fan_in *= t.dim(d);
                const float bound = static_cast<float>(1.0 / std::sqrt(static_cast<double>(fan_in)));
                fill_uniform(t, rng, -bound, bound);
            } else if (ends_with(".gamma") || ends_with(".running_var")) {
                for (std::int64_t i = 0; i < t.size(); ++i) t[i] = 1.0f;
            }
            // biases, betas and running means stay zero
        });
    }
    return net;
}

std::vector<std::pair<std::string, const Tensor<float>*>> Network::named_parameters() const {
    std::vector<std::pair<std::string, const Tensor<float>*>> out;
    visit_params([&out](const std::string& name, const Tensor<float>& t, bool) {
        out.emplace_back(name, &t);
    });
    std::sort(out.begin(), out.end(),
              [](const auto& a, const auto& b) { return a.first < b.first; });
    return out;
}

}  // namespace greit
