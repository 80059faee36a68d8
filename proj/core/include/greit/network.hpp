#pragma once

#include <array>
#include <cstdint>
#include <string>
#include <utility>
#include <vector>

#include "greit/blocks.hpp"

namespace greit {

enum class InitKind { Zero, Random };

// Declarative description of a network variant. Widths are full branch
// widths; blocks operate on their active halves.
struct ArchConfig {
    std::string variant = "greit18";
    std::vector<int> stage_repetitions{1, 2, 4, 2};  // basic blocks per stage 1..4
    int blocks_per_basic = 2;                        // Greit blocks per basic block
    std::vector<int> widths{40, 80, 160, 320};
    int stem_width = 32;
    int num_keypoints = 17;
    int lka_dw_kernel = 5;
    int lka_dwd_kernel = 7;
    int lka_dwd_dilation = 3;
    int se_ratio = 4;
    int ccw_ratio = 4;  // reduction inside the (grouped) cross-branch weighting
    int gsw_cprime_div = 8;  // C' = max(C / div, min)
    int gsw_cprime_min = 4;
    int lks_expansion = 2;
    std::vector<std::pair<int, int>> flip_pairs;  // left/right keypoint channel pairs
    std::vector<double> oks_k;                    // per-keypoint falloff constants

    static ArchConfig for_variant(const std::string& name);
    static const std::vector<std::pair<int, int>>& default_flip_pairs();
    static const std::vector<double>& default_oks_k();

    bool is_lite() const { return variant == "lite18"; }
    void validate() const;
};

// Immutable after build; forward is reentrant.
class Network {
public:
    using TT = Tensor<float>;

    static Network build(const ArchConfig& cfg, InitKind init, std::uint64_t seed = 0);

    const ArchConfig& config() const { return cfg_; }

    Tensor<float> forward(const Tensor<float>& x) const { return forward_t(x); }

    // Shape-only forward accumulating MAC counts into `sink`.
    void forward_cost(int batch_n, int in_h, int in_w, CostSink& sink) const {
        ShapeTensor x{{batch_n, 3, in_h, in_w}, &sink};
        (void)forward_t(x);
    }

    // f(name, tensor, learned). Traversal order is fixed by the topology.
    template <class F>
    void visit_params(F&& f) {
        visit_impl(*this, std::forward<F>(f));
    }
    template <class F>
    void visit_params(F&& f) const {
        visit_impl(*this, std::forward<F>(f));
    }

    // Lexicographically ordered (name, tensor) listing, all tensors.
    std::vector<std::pair<std::string, const Tensor<float>*>> named_parameters() const;

    template <class X>
    X forward_t(const X& x) const;

private:
    struct GreitLayer {
        std::vector<GreitBlockParams<TT>> groups;  // high group first, then low
    };
    struct BasicBlock {
        std::vector<GreitLayer> layers;
        FuseParams<TT> fuse;
    };
    struct Stage {
        std::vector<BasicBlock> blocks;
    };

    GroupAssignment group_assignment(int n_branches) const {
        return cfg_.is_lite() ? GroupAssignment::single_group(n_branches)
                              : GroupAssignment::two_groups(n_branches);
    }

    template <class X>
    std::vector<X> apply_layer(const std::vector<X>& bs, const GreitLayer& layer) const;

    template <class Self, class F>
    static void visit_impl(Self& net, F&& f);

    ArchConfig cfg_;
    LKSParams<TT> stem_;
    std::array<TransitionParams<TT>, 3> trans_;
    std::vector<Stage> stages_;  // stages 2..4
    Conv2dParams<TT> head_;
};

// Spec-facing free functions.
inline Network build_network(const ArchConfig& cfg, InitKind init, std::uint64_t seed = 0) {
    return Network::build(cfg, init, seed);
}
inline std::vector<std::pair<std::string, const Tensor<float>*>> named_parameters(const Network& net) {
    return net.named_parameters();
}

// ---------------------------------------------------------------------------
// Template definitions
// ---------------------------------------------------------------------------

template <class X>
std::vector<X> Network::apply_layer(const std::vector<X>& bs, const GreitLayer& layer) const {
    const auto ga = group_assignment(static_cast<int>(bs.size()));
    std::vector<std::vector<int>> parts;
    if (!ga.high.empty()) parts.push_back(ga.high);
    if (!ga.low.empty()) parts.push_back(ga.low);
    if (parts.size() != layer.groups.size()) throw ShapeError("layer group count mismatch");
    std::vector<X> out(bs.begin(), bs.end());
    for (std::size_t g = 0; g < parts.size(); ++g) {
        std::vector<X> grp;
        for (int i : parts[g]) grp.push_back(bs[static_cast<std::size_t>(i)]);
        auto res = greit_block_forward(grp, layer.groups[g]);
        for (std::size_t k = 0; k < parts[g].size(); ++k) {
            out[static_cast<std::size_t>(parts[g][k])] = res[k];
        }
    }
    return out;
}

template <class X>
X Network::forward_t(const X& x) const {
    if (x.rank() != 4 || x.dim(1) != 3) {
        throw ShapeError("forward expects a (N,3,H,W) input, got " + shape_str(x.shape()));
    }
    if (x.dim(2) % 32 != 0 || x.dim(3) % 32 != 0) {
        throw ShapeError("input spatial dims must be divisible by 32, got " + shape_str(x.shape()));
    }
    std::vector<X> bs;
    {
        auto g = cost_scope(x, "stem");
        bs.push_back(lks_forward(x, stem_));
    }
    for (std::size_t s = 0; s < stages_.size(); ++s) {
        {
            auto g = cost_scope(bs[0], "transition" + std::to_string(s + 1));
            bs = make_transition(bs, trans_[s]);
        }
        const std::string sname = "stage" + std::to_string(s + 2);
        const auto& stage = stages_[s];
        for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
            const std::string bname = sname + ".block" + std::to_string(b);
            for (std::size_t l = 0; l < stage.blocks[b].layers.size(); ++l) {
                auto g = cost_scope(bs[0], bname + ".layer" + std::to_string(l));
                bs = apply_layer(bs, stage.blocks[b].layers[l]);
            }
            auto g = cost_scope(bs[0], bname + ".fuse");
            bs = fuse_branches(bs, stage.blocks[b].fuse);
        }
    }
    auto g = cost_scope(bs[0], "head");
    return conv2d(bs[0], head_);
}

namespace detail {

template <class P, class F>
void visit_conv(P& p, const std::string& prefix, F&& f) {
    f(prefix + ".weight", p.weight, true);
    if (p.bias) f(prefix + ".bias", *p.bias, true);
}

template <class P, class F>
void visit_bn(P& p, const std::string& prefix, F&& f) {
    f(prefix + ".gamma", p.gamma, true);
    f(prefix + ".beta", p.beta, true);
    f(prefix + ".running_mean", p.running_mean, false);
    f(prefix + ".running_var", p.running_var, false);
}

template <class P, class F>
void visit_convbn(P& p, const std::string& prefix, F&& f) {
    visit_conv(p.conv, prefix + ".conv", f);
    visit_bn(p.bn, prefix + ".bn", f);
}

template <class P, class F>
void visit_se(P& p, const std::string& prefix, F&& f) {
    visit_conv(p.reduce, prefix + ".reduce", f);
    visit_conv(p.expand, prefix + ".expand", f);
}

template <class P, class F>
void visit_gsw(P& p, const std::string& prefix, F&& f) {
    visit_conv(p.to_cprime, prefix + ".to_cprime", f);
    visit_conv(p.to_one, prefix + ".to_one", f);
    visit_se(p.se, prefix + ".se", f);
}

template <class P, class F>
void visit_lka(P& p, const std::string& prefix, F&& f) {
    visit_conv(p.dw, prefix + ".dw", f);
    visit_conv(p.dwd, prefix + ".dwd", f);
    visit_conv(p.pw, prefix + ".pw", f);
}

}  // namespace detail

template <class Self, class F>
void Network::visit_impl(Self& net, F&& f) {
    using detail::visit_conv;
    using detail::visit_convbn;
    using detail::visit_gsw;
    using detail::visit_lka;
    using detail::visit_se;

    auto& stem = net.stem_;
    visit_convbn(stem.in, "stem.in", f);
    if (stem.lka) visit_lka(*stem.lka, "stem.lka", f);
    visit_convbn(stem.a_dw, "stem.a.dw", f);
    visit_convbn(stem.a_pw, "stem.a.pw", f);
    visit_convbn(stem.b_expand, "stem.b.expand", f);
    visit_convbn(stem.b_dw, "stem.b.dw", f);
    visit_convbn(stem.b_restore, "stem.b.restore", f);

    for (std::size_t s = 0; s < net.stages_.size(); ++s) {
        const std::string tname = "transition" + std::to_string(s + 1);
        visit_convbn(net.trans_[s].dw, tname + ".dw", f);
        visit_convbn(net.trans_[s].pw, tname + ".pw", f);

        const std::string sname = "stage" + std::to_string(s + 2);
        auto& stage = net.stages_[s];
        for (std::size_t b = 0; b < stage.blocks.size(); ++b) {
            const std::string bname = sname + ".block" + std::to_string(b);
            for (std::size_t l = 0; l < stage.blocks[b].layers.size(); ++l) {
                const std::string lname = bname + ".layer" + std::to_string(l);
                auto& layer = stage.blocks[b].layers[l];
                for (std::size_t g = 0; g < layer.groups.size(); ++g) {
                    const std::string gname = lname + ".group" + std::to_string(g);
                    visit_se(layer.groups[g].gcw_se, gname + ".gcw", f);
                    for (std::size_t i = 0; i < layer.groups[g].branch.size(); ++i) {
                        const std::string brname = gname + ".branch" + std::to_string(i);
                        auto& br = layer.groups[g].branch[i];
                        visit_convbn(br.dw, brname + ".dw", f);
                        if (br.gsw) visit_gsw(*br.gsw, brname + ".gsw", f);
                        if (br.gap_se) visit_se(*br.gap_se, brname + ".sw", f);
                    }
                }
            }
            auto& fuse = stage.blocks[b].fuse;
            const std::string fname = bname + ".fuse";
            for (std::size_t j = 0; j < fuse.path.size(); ++j) {
                for (std::size_t i = 0; i < fuse.path[j].size(); ++i) {
                    if (!fuse.path[j][i]) continue;
                    const std::string pname =
                        fname + ".to" + std::to_string(j) + ".from" + std::to_string(i);
                    auto& path = *fuse.path[j][i];
                    for (std::size_t t = 0; t < path.down.size(); ++t) {
                        const std::string st = pname + ".step" + std::to_string(t);
                        visit_convbn(path.down[t].dw, st + ".dw", f);
                        visit_convbn(path.down[t].pw, st + ".pw", f);
                    }
                    if (path.up_pw) visit_convbn(*path.up_pw, pname + ".up", f);
                }
            }
            for (std::size_t j = 0; j < fuse.post.size(); ++j) {
                visit_convbn(fuse.post[j], fname + ".post" + std::to_string(j), f);
            }
        }
    }
    visit_conv(net.head_, "head", f);
}

}  // namespace greit
