#pragma once

#include <functional>
#include <random>
#include <string>

#include "greit/autodiff.hpp"

namespace greit {

struct FdReport {
    double max_rel_err = 0.0;
    bool pass = false;
    std::string location;  // worst element, or where a non-finite value appeared
};

// A differentiable function under test: builds its output from tape variables.
// The leaves handed in correspond 1:1 to the `inputs` tensors.
using DiffFn = std::function<Var(Tape&, const std::vector<Var>&)>;

// Compares reverse-mode gradients against central finite differences.
// The (possibly tensor-valued) output is contracted to a scalar with a fixed
// random projection so a single backward pass covers every output element.
inline FdReport finite_diff_check(const DiffFn& f, const std::vector<Tensor<double>>& inputs,
                                  double eps = 1e-5, double tol = 1e-4,
                                  std::uint64_t proj_seed = 0x5eed) {
    if (eps <= 0) throw ValueError("finite_diff_check: eps must be positive");
    FdReport rep;

    const auto scalar_eval = [&](const std::vector<Tensor<double>>& ins,
                                 const Tensor<double>* proj_out) -> std::pair<double, Tensor<double>> {
        Tape tape;
        std::vector<Var> leaves;
        leaves.reserve(ins.size());
        for (const auto& t : ins) leaves.push_back(tape.leaf(t));
        Var out = f(tape, leaves);
        (void)proj_out;
        return {0.0, out.value()};
    };

    // First pass: get the output shape to build the projection.
    Tensor<double> out0 = scalar_eval(inputs, nullptr).second;
    Tensor<double> proj(out0.shape());
    {
        std::mt19937_64 rng(proj_seed);
        fill_uniform(proj, rng, 0.25, 1.0);
    }

    const auto scalar_of = [&](const std::vector<Tensor<double>>& ins) -> double {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& t : ins) leaves.push_back(tape.leaf(t));
        Var out = f(tape, leaves);
        double s = 0;
        const auto& v = out.value();
        for (std::int64_t i = 0; i < v.size(); ++i) s += v[i] * proj[i];
        return s;
    };

    // Analytic gradients.
    std::vector<Tensor<double>> analytic;
    {
        Tape tape;
        std::vector<Var> leaves;
        for (const auto& t : inputs) leaves.push_back(tape.leaf(t));
        Var out = f(tape, leaves);
        for (std::int64_t i = 0; i < out.value().size(); ++i) {
            if (!std::isfinite(out.value()[i])) {
                rep.location = "non-finite forward output at element " + std::to_string(i);
                return rep;
            }
        }
        tape.backward(out.id, proj);
        for (const auto& leaf : leaves) analytic.push_back(tape.grad(leaf.id));
    }

    // Central differences per input element.
    std::vector<Tensor<double>> work = inputs;
    for (std::size_t t = 0; t < work.size(); ++t) {
        for (std::int64_t i = 0; i < work[t].size(); ++i) {
            const double orig = work[t][i];
            work[t][i] = orig + eps;
            const double fp = scalar_of(work);
            work[t][i] = orig - eps;
            const double fm = scalar_of(work);
            work[t][i] = orig;
            if (!std::isfinite(fp) || !std::isfinite(fm)) {
                rep.location = "non-finite intermediate at input " + std::to_string(t) + " elem " + std::to_string(i);
                rep.pass = false;
                return rep;
            }
            const double fd = (fp - fm) / (2 * eps);
            const double an = analytic[t][i];
            const double denom = std::max({std::fabs(an), std::fabs(fd), 1e-8});
            const double rel = std::fabs(an - fd) / denom;
            if (rel > rep.max_rel_err) {
                rep.max_rel_err = rel;
                rep.location = "input " + std::to_string(t) + " elem " + std::to_string(i);
            }
        }
    }
    rep.pass = rep.max_rel_err < tol;
    return rep;
}

}  // namespace greit
