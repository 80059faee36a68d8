#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "greit/finite_diff.hpp"

namespace greit {

struct GradcheckRow {
    std::string block;
    int case_index = 0;
    FdReport report;
};

// Runs finite-difference checks for one block kind (se, ccw, gcw, gsw, lka,
// lks, greit, fuse, head) or "all"; three random tiny shapes per kind.
std::vector<GradcheckRow> run_block_gradchecks(const std::string& block, std::uint64_t seed,
                                               double tol = 1e-4);

}  // namespace greit
