#pragma once

#include <array>
#include <string>
#include <vector>

#include "greit/metrics.hpp"
#include "greit/network.hpp"
#include "greit/posedecode.hpp"

namespace greit {

// GRWT container: "GRWT" magic, u16 version, u32 entry count, then per entry
// {u16 name length, name bytes, u8 dtype (0 = f32), u8 rank, u32 dims,
// little-endian f32 payload}. Entries are written in sorted name order.
void save_weights(const Network& net, const std::string& path);

// Fails with the symmetric name-set difference when the file does not match
// the network's parameters exactly.
void load_weights(const std::string& path, Network& net);

struct ImageNorm {
    std::array<double, 3> mean{0.485, 0.456, 0.406};
    std::array<double, 3> std{0.229, 0.224, 0.225};
};

// PPM (P6, maxval 255) scaled to [0,1] then mean/std-normalized, or a GRIM
// raw-float container ("GRIM", u32 C,H,W, f32 payload) loaded as-is.
Tensor<float> load_image(const std::string& path, const ImageNorm& norm = {});
void save_raw_image(const Tensor<float>& img, const std::string& path);  // GRIM

struct RunConfig {
    ArchConfig arch;
    int input_h = 256, input_w = 192;
    ImageNorm norm;
};

// JSON config; unknown keys are rejected.
RunConfig load_config(const std::string& path);

struct Dataset {
    std::vector<Annotation> annotations;
    std::vector<double> head_sizes;  // parallel to annotations; empty if absent
};

// Keypoint JSON: {"annotations": [{image_id, instance_id, keypoints:
// [[x,y,v-or-score],...], area?, score?, head_size?, box?}]}.
Dataset load_annotations(const std::string& path);
void save_pose_results(const std::vector<PoseResult>& results, const std::string& path);

}  // namespace greit
