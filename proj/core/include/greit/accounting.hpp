#pragma once

#include <string>
#include <vector>

#include "greit/network.hpp"

namespace greit {

struct CostRow {
    std::string name;
    std::int64_t params = 0;
    std::int64_t flops = 0;
};

struct GrowthRow {
    int stage = 0;           // 2..4
    std::string method;      // "ccw" or "gcw"
    int channels = 0;        // concat width of the weighting tensor (max over groups)
};

struct CostReport {
    std::vector<CostRow> rows;  // per-module, in topological order
    std::int64_t total_params = 0;
    std::int64_t total_flops = 0;
    int input_h = 0, input_w = 0;  // 0 when no FLOP pass was run
    std::vector<GrowthRow> growth;

    std::string to_text(bool per_layer) const;
    std::string to_json(bool per_layer) const;
};

// Learned parameters only (conv weights/biases, BN gamma/beta); BN running
// statistics are storage, not parameters.
CostReport count_params(const Network& net);

// Params plus exact MAC counts for a (1,3,h,w) forward pass.
CostReport count_flops(const Network& net, int input_h, int input_w);

// Fig.-3 style trajectory of the concatenated weighting-tensor width per
// stage; method is "ccw" or "gcw".
std::vector<GrowthRow> channel_growth_report(const std::string& method, const ArchConfig& cfg);

}  // namespace greit
