#include "greit/posedecode.hpp"

#include <cmath>

namespace greit {

Box extend_box(const Box& box, double ratio) {
    if (!(box.w > 0) || !(box.h > 0)) throw ValueError("extend_box: degenerate box");
    if (!(ratio > 0)) throw ValueError("extend_box: ratio must be positive");
    Box out = box;
    const double cx = box.x + box.w / 2, cy = box.y + box.h / 2;
    if (box.h < box.w * ratio) {
        out.h = box.w * ratio;
    } else if (box.h > box.w * ratio) {
        out.w = box.h / ratio;
    }
    out.x = cx - out.w / 2;
    out.y = cy - out.h / 2;
    return out;
}

BoxTransform BoxTransform::from_box(const Box& extended, int input_h, int input_w) {
    if (!(extended.w > 0) || !(extended.h > 0)) throw ValueError("BoxTransform: degenerate box");
    if (input_h < 1 || input_w < 1) throw ValueError("BoxTransform: invalid input size");
    return BoxTransform{extended, input_h, input_w};
}

void BoxTransform::to_input(double sx, double sy, double& ix, double& iy) const {
    ix = (sx - box.x) * input_w / box.w;
    iy = (sy - box.y) * input_h / box.h;
}

void BoxTransform::to_source(double ix, double iy, double& sx, double& sy) const {
    sx = box.x + ix * box.w / input_w;
    sy = box.y + iy * box.h / input_h;
}

std::vector<std::vector<Keypoint>> decode_heatmaps(const Tensor<float>& hm, bool quarter_offset) {
    if (hm.rank() != 4) throw ShapeError("decode_heatmaps: expected (N,K,h,w)");
    const int n = hm.dim(0), k = hm.dim(1), h = hm.dim(2), w = hm.dim(3);
    if (h < 2 || w < 2) throw ShapeError("decode_heatmaps: heatmap must be at least 2x2");
    std::vector<std::vector<Keypoint>> out(static_cast<std::size_t>(n));
    for (int b = 0; b < n; ++b) {
        auto& kps = out[static_cast<std::size_t>(b)];
        kps.resize(static_cast<std::size_t>(k));
        for (int c = 0; c < k; ++c) {
            int py = 0, px = 0;
            float best = hm.at4(b, c, 0, 0);
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const float v = hm.at4(b, c, y, x);
                    if (v > best) {
                        best = v;
                        py = y;
                        px = x;
                    }
                }
            }
            double fx = px, fy = py;
            const bool interior = px > 0 && px < w - 1 && py > 0 && py < h - 1;
            if (quarter_offset && interior) {
                const float dx = hm.at4(b, c, py, px + 1) - hm.at4(b, c, py, px - 1);
                const float dy = hm.at4(b, c, py + 1, px) - hm.at4(b, c, py - 1, px);
                if (dx > 0) fx += 0.25;
                if (dx < 0) fx -= 0.25;
                if (dy > 0) fy += 0.25;
                if (dy < 0) fy -= 0.25;
            }
            kps[static_cast<std::size_t>(c)] = {fx, fy, static_cast<double>(best)};
        }
    }
    return out;
}

Tensor<float> flip_average(const Tensor<float>& hm, const Tensor<float>& hm_flipped,
                           const std::vector<std::pair<int, int>>& flip_pairs) {
    if (hm.shape() != hm_flipped.shape()) throw ShapeError("flip_average: shape mismatch");
    if (hm.rank() != 4) throw ShapeError("flip_average: expected (N,K,h,w)");
    const int n = hm.dim(0), k = hm.dim(1), h = hm.dim(2), w = hm.dim(3);

    std::vector<int> chan(static_cast<std::size_t>(k));
    for (int c = 0; c < k; ++c) chan[static_cast<std::size_t>(c)] = c;
    for (const auto& [a, b] : flip_pairs) {
        if (a < 0 || b < 0 || a >= k || b >= k || a == b) {
            throw ValueError("flip_average: invalid flip pair");
        }
        std::swap(chan[static_cast<std::size_t>(a)], chan[static_cast<std::size_t>(b)]);
    }

    Tensor<float> out(hm.shape());
    for (int b = 0; b < n; ++b) {
        for (int c = 0; c < k; ++c) {
            const int src_c = chan[static_cast<std::size_t>(c)];
            for (int y = 0; y < h; ++y) {
                for (int x = 0; x < w; ++x) {
                    const float mirrored = hm_flipped.at4(b, src_c, y, w - 1 - x);
                    out.at4(b, c, y, x) = 0.5f * (hm.at4(b, c, y, x) + mirrored);
                }
            }
        }
    }
    return out;
}

Tensor<float> gaussian_target(double cx, double cy, double sigma, int h, int w) {
    if (!(sigma > 0)) throw ValueError("gaussian_target: sigma must be positive");
    if (h < 1 || w < 1) throw ShapeError("gaussian_target: invalid size");
    Tensor<float> out({h, w});
    const double inv = 1.0 / (2.0 * sigma * sigma);
    for (int y = 0; y < h; ++y) {
        for (int x = 0; x < w; ++x) {
            const double d2 = (x - cx) * (x - cx) + (y - cy) * (y - cy);
            out[static_cast<std::int64_t>(y) * w + x] = static_cast<float>(std::exp(-d2 * inv));
        }
    }
    return out;
}

PoseResult map_to_source(const std::vector<Keypoint>& kps_heatmap, int hm_h, int hm_w,
                         const BoxTransform& bt) {
    if (hm_h < 1 || hm_w < 1) throw ShapeError("map_to_source: invalid heatmap size");
    const double sx = static_cast<double>(bt.input_w) / hm_w;
    const double sy = static_cast<double>(bt.input_h) / hm_h;
    PoseResult res;
    res.box = bt.box;
    res.input_h = bt.input_h;
    res.input_w = bt.input_w;
    for (const auto& kp : kps_heatmap) {
        double px, py;
        bt.to_source(kp.x * sx, kp.y * sy, px, py);
        res.keypoints.push_back({px, py, kp.score});
    }
    return res;
}

namespace {
float sample_clamped(const Tensor<float>& img, int c, int y, int x) {
    const int h = img.dim(2), w = img.dim(3);
    y = std::min(std::max(y, 0), h - 1);
    x = std::min(std::max(x, 0), w - 1);
    return img.at4(0, c, y, x);
}
}  // namespace

Tensor<float> crop_resize(const Tensor<float>& img, const BoxTransform& bt) {
    if (img.rank() != 4 || img.dim(0) != 1) throw ShapeError("crop_resize: expected (1,C,H,W)");
    const int c = img.dim(1);
    Tensor<float> out({1, c, bt.input_h, bt.input_w});
    for (int iy = 0; iy < bt.input_h; ++iy) {
        for (int ix = 0; ix < bt.input_w; ++ix) {
            double sx, sy;
            bt.to_source(ix, iy, sx, sy);
            const int x0 = static_cast<int>(std::floor(sx));
            const int y0 = static_cast<int>(std::floor(sy));
            const float ax = static_cast<float>(sx - x0);
            const float ay = static_cast<float>(sy - y0);
            for (int ch = 0; ch < c; ++ch) {
                const float v00 = sample_clamped(img, ch, y0, x0);
                const float v01 = sample_clamped(img, ch, y0, x0 + 1);
                const float v10 = sample_clamped(img, ch, y0 + 1, x0);
                const float v11 = sample_clamped(img, ch, y0 + 1, x0 + 1);
                out.at4(0, ch, iy, ix) = (1 - ay) * ((1 - ax) * v00 + ax * v01) +
                                         ay * ((1 - ax) * v10 + ax * v11);
            }
        }
    }
    return out;
}

Tensor<float> mirror_horizontal(const Tensor<float>& x) {
    if (x.rank() != 4) throw ShapeError("mirror_horizontal: expected rank-4 tensor");
    Tensor<float> out(x.shape());
    const int n = x.dim(0), c = x.dim(1), h = x.dim(2), w = x.dim(3);
    for (int b = 0; b < n; ++b)
        for (int ch = 0; ch < c; ++ch)
            for (int y = 0; y < h; ++y)
                for (int xx = 0; xx < w; ++xx)
                    out.at4(b, ch, y, xx) = x.at4(b, ch, y, w - 1 - xx);
    return out;
}

}  // namespace greit
