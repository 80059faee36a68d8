#pragma once

#include <cstdint>
#include <vector>

#include "greit/tensor.hpp"

namespace greit {

struct Box {
    double x = 0, y = 0, w = 0, h = 0;  // top-left corner + size, source pixels
};

struct Keypoint {
    double x = 0, y = 0;
    double score = 0;  // raw peak value (logit); no sigmoid applied
};

struct PoseResult {
    std::int64_t image_id = 0;
    std::vector<Keypoint> keypoints;  // source-image pixels
    Box box;                          // extended source box
    int input_h = 0, input_w = 0;
    bool flipped = false;
};

// Maps the extended source box onto the network input rectangle (and back).
struct BoxTransform {
    Box box;                   // extended box in source pixels
    int input_h = 0, input_w = 0;

    static BoxTransform from_box(const Box& extended, int input_h, int input_w);

    void to_input(double sx, double sy, double& ix, double& iy) const;
    void to_source(double ix, double iy, double& sx, double& sy) const;
};

// Grows the box symmetrically about its center until h/w == ratio (4:3 by
// default); never shrinks either side.
Box extend_box(const Box& box, double ratio = 4.0 / 3.0);

// Argmax + optional quarter offset per keypoint; coordinates in heatmap
// pixels. Peaks on any border skip the offset. Returns [batch][keypoint].
std::vector<std::vector<Keypoint>> decode_heatmaps(const Tensor<float>& hm, bool quarter_offset);

// Un-mirrors hm_flipped horizontally, swaps paired channels, averages with hm.
Tensor<float> flip_average(const Tensor<float>& hm, const Tensor<float>& hm_flipped,
                           const std::vector<std::pair<int, int>>& flip_pairs);

// Unnormalized 2D Gaussian with peak 1 at (cx, cy), shape (h, w).
Tensor<float> gaussian_target(double cx, double cy, double sigma, int h, int w);

// Heatmap coordinates -> input (times the stride implied by hm size) ->
// source pixels via the inverse box transform. Scores pass through.
PoseResult map_to_source(const std::vector<Keypoint>& kps_heatmap, int hm_h, int hm_w,
                         const BoxTransform& bt);

// Bilinear crop of the transform's box resampled to the network input size.
// img is (1,3,H,W); out of bounds samples clamp to the edge.
Tensor<float> crop_resize(const Tensor<float>& img, const BoxTransform& bt);

// Mirrors an input tensor left-right (for flip-test inference).
Tensor<float> mirror_horizontal(const Tensor<float>& x);

}  // namespace greit
