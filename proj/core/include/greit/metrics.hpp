#pragma once

#include <array>
#include <cstdint>
#include <vector>

#include "greit/error.hpp"

namespace greit {

// One instance: ground truth uses v in {0,1,2} (0 = unlabeled); predictions
// carry per-keypoint scores in the same slot and an instance-level score.
struct Annotation {
    std::int64_t image_id = 0;
    std::int64_t instance_id = 0;
    std::vector<std::array<double, 3>> keypoints;  // (x, y, v-or-score)
    double area = 0;
    double score = 0;  // prediction confidence; unused for ground truth
};

// Mean over labeled ground-truth keypoints of exp(-d^2 / (2 * area * k_i^2)).
double oks(const Annotation& pred, const Annotation& gt, const std::vector<double>& k_consts);

struct ApArResult {
    double ap = 0, ap50 = 0, ap75 = 0, ar = 0;
};

// OKS-thresholded AP/AR over thresholds 0.50:0.05:0.95 with greedy per-image
// matching and 101-point interpolated precision.
ApArResult ap_ar(const std::vector<Annotation>& preds, const std::vector<Annotation>& gts,
                 const std::vector<double>& k_consts);

// PCKh: percentage of labeled keypoints within alpha * head_size of ground
// truth. head_sizes is indexed parallel to gts; preds pair with gts by
// (image_id, instance_id).
double pckh(const std::vector<Annotation>& preds, const std::vector<Annotation>& gts,
            const std::vector<double>& head_sizes, double alpha = 0.5);

}  // namespace greit
