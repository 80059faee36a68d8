#include "greit/gradcheck.hpp"

#include <numeric>
#include <random>

#include "greit/blocks.hpp"

namespace greit {

namespace {

enum class PKind { Input, Weight, Bias, Gamma, Beta, RMean, RVar };

// The same builder code runs in two phases: PackSource materializes random
// double tensors (the finite-difference inputs), TapeSource replays them as
// tape leaves in the identical order.
struct PackSource {
    using T = Tensor<double>;
    std::vector<Tensor<double>> tensors;
    std::mt19937_64 rng;

    explicit PackSource(std::uint64_t seed) : rng(seed) {}

    Tensor<double> next(Shape shape, PKind kind) {
        Tensor<double> t(shape);
        switch (kind) {
            case PKind::Input:
                fill_uniform(t, rng, -1.0, 1.0);
                break;
            case PKind::Weight: {
                std::int64_t fan_in = 1;
                for (std::size_t d = 1; d < shape.size(); ++d) fan_in *= shape[d];
                const double b = 1.0 / std::sqrt(static_cast<double>(fan_in));
                fill_uniform(t, rng, -b, b);
                break;
            }
            case PKind::Bias:
            case PKind::Beta:
            case PKind::RMean:
                fill_uniform(t, rng, -0.1, 0.1);
                break;
            case PKind::Gamma:
            case PKind::RVar:
                fill_uniform(t, rng, 0.5, 1.5);
                break;
        }
        tensors.push_back(t);
        return t;
    }
};

struct TapeSource {
    using T = Var;
    const std::vector<Var>* leaves;
    std::size_t next_i = 0;

    Var next(const Shape&, PKind) { return (*leaves)[next_i++]; }
};

template <class S>
Conv2dParams<typename S::T> mk_conv(S& s, int out, int in, int k, int stride, int pad, int dil,
                                    int groups, bool bias) {
    Conv2dParams<typename S::T> p;
    p.weight = s.next({out, in / groups, k, k}, PKind::Weight);
    if (bias) p.bias = s.next({out}, PKind::Bias);
    p.stride_h = p.stride_w = stride;
    p.pad_h = p.pad_w = pad;
    p.dil_h = p.dil_w = dil;
    p.groups = groups;
    return p;
}

template <class S>
BatchNormParams<typename S::T> mk_bn(S& s, int c) {
    BatchNormParams<typename S::T> p;
    p.gamma = s.next({c}, PKind::Gamma);
    p.beta = s.next({c}, PKind::Beta);
    p.running_mean = s.next({c}, PKind::RMean);
    p.running_var = s.next({c}, PKind::RVar);
    p.epsilon = 1e-5;
    return p;
}

template <class S>
ConvBn<typename S::T> mk_cb(S& s, int out, int in, int k, int stride, int pad, int groups) {
    return {mk_conv(s, out, in, k, stride, pad, 1, groups, false), mk_bn(s, out)};
}

template <class S>
SEParams<typename S::T> mk_se(S& s, int c, int ratio) {
    const int hidden = std::max(c / ratio, 1);
    return {mk_conv(s, hidden, c, 1, 1, 0, 1, 1, true), mk_conv(s, c, hidden, 1, 1, 0, 1, 1, true)};
}

template <class S>
GSWParams<typename S::T> mk_gsw(S& s, int c) {
    const int cp = std::max(c / 8, 4);
    GSWParams<typename S::T> p;
    p.to_cprime = mk_conv(s, cp, c, 1, 1, 0, 1, 1, true);
    p.to_one = mk_conv(s, 1, cp, 1, 1, 0, 1, 1, true);
    p.se = mk_se(s, c, 4);
    return p;
}

template <class S>
LKAParams<typename S::T> mk_lka(S& s, int c) {
    LKAParams<typename S::T> p;
    p.dw = mk_conv(s, c, c, 5, 1, 2, 1, c, true);
    p.dwd = mk_conv(s, c, c, 7, 1, 9, 3, c, true);
    p.pw = mk_conv(s, c, c, 1, 1, 0, 1, 1, true);
    return p;
}

// Each case: build inputs/params through the source, run the block, return a
// list of outputs (summed into one Var by the caller).
template <class S>
std::vector<typename S::T> case_se(S& s, int variant) {
    const int c = 4 + 2 * variant;
    const int h = 2 + variant, w = 3;
    auto x = s.next({1 + variant % 2, c, h, w}, PKind::Input);
    auto p = mk_se(s, c, 2);
    return {se_weighting(x, p)};
}

template <class S>
std::vector<typename S::T> case_ccw(S& s, int variant) {
    using T = typename S::T;
    std::vector<T> bs;
    std::vector<int> chans;
    if (variant == 0) {
        chans = {4, 6};
    } else if (variant == 1) {
        chans = {2, 4, 6};
    } else {
        chans = {4, 4};
    }
    int hw = 1 << (chans.size());
    for (std::size_t i = 0; i < chans.size(); ++i) {
        bs.push_back(s.next({1, chans[i], hw, hw}, PKind::Input));
        hw /= 2;
    }
    auto p = mk_se(s, std::accumulate(chans.begin(), chans.end(), 0), 2);
    return ccw_forward(bs, p);
}

template <class S>
std::vector<typename S::T> case_gcw(S& s, int variant) {
    using T = typename S::T;
    const int n = 2 + variant % 3;  // 2..4 branches
    std::vector<T> bs;
    int hw = 1 << n, c = 2;
    std::vector<int> chans;
    for (int i = 0; i < n; ++i) {
        bs.push_back(s.next({1, c, hw, hw}, PKind::Input));
        chans.push_back(c);
        hw /= 2;
        c += 2;
    }
    const auto ga = GroupAssignment::two_groups(n);
    int ch = 0, cl = 0;
    for (int i : ga.high) ch += chans[static_cast<std::size_t>(i)];
    for (int i : ga.low) cl += chans[static_cast<std::size_t>(i)];
    auto ph = mk_se(s, ch, 2);
    auto pl = mk_se(s, std::max(cl, 1), 2);
    return gcw_forward(bs, ga, ph, pl);
}

template <class S>
std::vector<typename S::T> case_gsw(S& s, int variant) {
    const int c = 8 * (1 + variant % 2);
    auto x = s.next({1 + variant / 2, c, 2 + variant, 3}, PKind::Input);
    auto p = mk_gsw(s, c);
    return {gsw_forward(x, p)};
}

template <class S>
std::vector<typename S::T> case_lka(S& s, int variant) {
    const int c = 2 + variant;
    auto x = s.next({1, c, 4 + variant, 5}, PKind::Input);
    auto p = mk_lka(s, c);
    return {lka_forward(x, p)};
}

template <class S>
std::vector<typename S::T> case_lks(S& s, int variant) {
    const int sw = 4 + 2 * variant;  // stem width
    const int half = sw / 2;
    const int w0 = 4;
    auto x = s.next({1, 3, 8, 8 + 4 * variant}, PKind::Input);
    LKSParams<typename S::T> p;
    p.in = mk_cb(s, sw, 3, 3, 2, 1, 1);
    if (variant != 2) p.lka = mk_lka(s, half);  // variant 2: lite stem, no LKA
    p.a_dw = mk_cb(s, half, half, 3, 2, 1, half);
    p.a_pw = mk_cb(s, w0 / 2, half, 1, 1, 0, 1);
    p.b_expand = mk_cb(s, 2 * half, half, 1, 1, 0, 1);
    p.b_dw = mk_cb(s, 2 * half, 2 * half, 3, 2, 1, 2 * half);
    p.b_restore = mk_cb(s, w0 / 2, 2 * half, 1, 1, 0, 1);
    return {lks_forward(x, p)};
}

template <class S>
std::vector<typename S::T> case_greit(S& s, int variant) {
    using T = typename S::T;
    std::vector<T> bs;
    std::vector<int> chans = variant == 2 ? std::vector<int>{6} : std::vector<int>{4, 8};
    int hw = 4;
    for (int c : chans) {
        bs.push_back(s.next({1, c, hw, hw}, PKind::Input));
        hw /= 2;
    }
    GreitBlockParams<T> p;
    int concat_half = 0;
    for (int c : chans) concat_half += c / 2;
    p.gcw_se = mk_se(s, concat_half, 2);
    for (int c : chans) {
        GreitBranchParams<T> bp;
        bp.dw = mk_cb(s, c / 2, c / 2, 3, 1, 1, c / 2);
        if (variant == 1) {
            bp.gap_se = mk_se(s, c / 2, 2);
        } else {
            bp.gsw = mk_gsw(s, c / 2);
        }
        p.branch.push_back(std::move(bp));
    }
    return greit_block_forward(bs, p);
}

template <class S>
std::vector<typename S::T> case_fuse(S& s, int variant) {
    using T = typename S::T;
    const int n = 2 + variant % 2;
    const bool is_last = variant == 2;
    std::vector<int> w;
    std::vector<T> bs;
    int hw = 1 << n, c = 2;
    for (int i = 0; i < n; ++i) {
        bs.push_back(s.next({1, c, hw, hw}, PKind::Input));
        w.push_back(c);
        hw /= 2;
        c *= 2;
    }
    FuseParams<T> p;
    p.is_last = is_last;
    p.path.resize(static_cast<std::size_t>(n));
    for (int j = 0; j < n; ++j) {
        p.path[static_cast<std::size_t>(j)].resize(static_cast<std::size_t>(n));
        for (int i = 0; i < n; ++i) {
            if (i == j) continue;
            FusePath<T> path;
            if (i < j) {
                for (int t = 0; t < j - i; ++t) {
                    const bool last = (t == j - i - 1);
                    FuseDownStep<T> step;
                    step.dw = mk_cb(s, w[static_cast<std::size_t>(i)], w[static_cast<std::size_t>(i)], 3,
                                    2, 1, w[static_cast<std::size_t>(i)]);
                    step.pw = mk_cb(s, last ? w[static_cast<std::size_t>(j)] : w[static_cast<std::size_t>(i)],
                                    w[static_cast<std::size_t>(i)], 1, 1, 0, 1);
                    path.down.push_back(std::move(step));
                }
            } else {
                path.up_pw = mk_cb(s, w[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(i)], 1, 1, 0, 1);
                path.up_scale = 1 << (i - j);
            }
            p.path[static_cast<std::size_t>(j)][static_cast<std::size_t>(i)] = std::move(path);
        }
    }
    if (is_last) {
        for (int j = 0; j < n; ++j) {
            p.post.push_back(mk_cb(s, w[static_cast<std::size_t>(j)], w[static_cast<std::size_t>(j)], 3, 1,
                                   1, w[static_cast<std::size_t>(j)]));
        }
    }
    return fuse_branches(bs, p);
}

template <class S>
std::vector<typename S::T> case_head(S& s, int variant) {
    const int c = 4 + 2 * variant, k = 3 + variant;
    auto x = s.next({1, c, 3, 3}, PKind::Input);
    auto p = mk_conv(s, k, c, 1, 1, 0, 1, 1, true);
    return {conv2d(x, p)};
}

using CaseFn = std::vector<Var> (*)(TapeSource&, int);
using PackFn = std::vector<Tensor<double>> (*)(PackSource&, int);

struct BlockCase {
    const char* name;
    PackFn pack;
    CaseFn run;
};

const BlockCase kCases[] = {
    {"se", &case_se<PackSource>, &case_se<TapeSource>},
    {"ccw", &case_ccw<PackSource>, &case_ccw<TapeSource>},
    {"gcw", &case_gcw<PackSource>, &case_gcw<TapeSource>},
    {"gsw", &case_gsw<PackSource>, &case_gsw<TapeSource>},
    {"lka", &case_lka<PackSource>, &case_lka<TapeSource>},
    {"lks", &case_lks<PackSource>, &case_lks<TapeSource>},
    {"greit", &case_greit<PackSource>, &case_greit<TapeSource>},
    {"fuse", &case_fuse<PackSource>, &case_fuse<TapeSource>},
    {"head", &case_head<PackSource>, &case_head<TapeSource>},
};

}  // namespace

std::vector<GradcheckRow> run_block_gradchecks(const std::string& block, std::uint64_t seed,
                                               double tol) {
    bool known = block == "all";
    for (const auto& c : kCases) known = known || block == c.name;
    if (!known) throw ValueError("gradcheck: unknown block '" + block + "'");

    std::vector<GradcheckRow> rows;
    for (const auto& c : kCases) {
        if (block != "all" && block != c.name) continue;
        for (int variant = 0; variant < 3; ++variant) {
            GradcheckRow row;
            row.block = c.name;
            row.case_index = variant;
            // Central differences break down when a ReLU pre-activation lands
            // within eps of zero, which random draws occasionally hit. A real
            // gradient bug fails for every draw, so redraw inputs a bounded
            // number of times before reporting a failure.
            for (int attempt = 0; attempt < 3; ++attempt) {
                PackSource pack(seed * 1000003u + static_cast<std::uint64_t>(variant) * 97u +
                                static_cast<std::uint64_t>(attempt) * 7919u +
                                std::hash<std::string>{}(c.name));
                (void)c.pack(pack, variant);  // materializes inputs in call order

                const auto fn = [&](Tape&, const std::vector<Var>& leaves) -> Var {
                    TapeSource src{&leaves};
                    auto outs = c.run(src, variant);
                    Var total = sum(outs[0]);
                    for (std::size_t i = 1; i < outs.size(); ++i) total = add(total, sum(outs[i]));
                    return total;
                };
                row.report = finite_diff_check(fn, pack.tensors, 1e-5, tol,
                                               seed ^ (0x9e3779b97f4a7c15ull + variant));
                if (row.report.pass) break;
            }
            rows.push_back(std::move(row));
        }
    }
    return rows;
}

}  // namespace greit
