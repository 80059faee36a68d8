#pragma once

#include <map>
#include <string>

#include "greit/tensor.hpp"

namespace greit::probe {

// Records the range of multiplicative weight maps produced inside attention
// blocks. Off by default; the zero-parameter closure checks flip it on to
// verify that every gate sits at exactly 0.5. Not thread-safe while enabled.
struct Stats {
    double min = 0, max = 0;
    std::int64_t count = 0;
};

namespace detail {
struct State {
    bool enabled = false;
    std::map<std::string, Stats> stats;
};
inline State& state() {
    static State s;
    return s;
}
}  // namespace detail

inline void enable() {
    detail::state().enabled = true;
    detail::state().stats.clear();
}
inline void disable() { detail::state().enabled = false; }
inline bool enabled() { return detail::state().enabled; }
inline std::map<std::string, Stats> take() {
    auto out = detail::state().stats;
    detail::state().stats.clear();
    return out;
}

template <typename T>
inline void record(const char* tag, const Tensor<T>& w) {
    auto& st = detail::state();
    if (!st.enabled) return;
    auto& s = st.stats[tag];
    for (std::int64_t i = 0; i < w.size(); ++i) {
        const double v = static_cast<double>(w[i]);
        if (s.count == 0) {
            s.min = s.max = v;
        } else {
            if (v < s.min) s.min = v;
            if (v > s.max) s.max = v;
        }
        ++s.count;
    }
}

// Fallback for non-tensor backends (tape vars, shape propagation): no-op.
template <typename X>
inline void record(const char*, const X&) {}

}  // namespace greit::probe
