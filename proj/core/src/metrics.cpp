#include "greit/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <map>

namespace greit {

namespace {

int labeled_count(const Annotation& gt) {
    int n = 0;
    for (const auto& kp : gt.keypoints) {
        if (kp[2] > 0) ++n;
    }
    return n;
}

}  // namespace

double oks(const Annotation& pred, const Annotation& gt, const std::vector<double>& k_consts) {
    if (gt.keypoints.size() != pred.keypoints.size()) {
        throw ValueError("oks: keypoint count mismatch");
    }
    if (gt.keypoints.size() != k_consts.size()) {
        throw ValueError("oks: falloff table size does not match keypoint count");
    }
    if (!(gt.area > 0)) throw ValueError("oks: ground-truth area must be positive");
    double acc = 0;
    int n = 0;
    for (std::size_t i = 0; i < gt.keypoints.size(); ++i) {
        if (gt.keypoints[i][2] <= 0) continue;
        const double dx = pred.keypoints[i][0] - gt.keypoints[i][0];
        const double dy = pred.keypoints[i][1] - gt.keypoints[i][1];
        const double denom = 2.0 * gt.area * k_consts[i] * k_consts[i];
        acc += std::exp(-(dx * dx + dy * dy) / denom);
        ++n;
    }
    if (n == 0) throw ValueError("oks: ground truth has no labeled keypoints");
    return acc / n;
}

ApArResult ap_ar(const std::vector<Annotation>& preds, const std::vector<Annotation>& gts,
                 const std::vector<double>& k_consts) {
    std::map<std::int64_t, std::vector<const Annotation*>> gt_by_img;
    int total_gt = 0;
    for (const auto& g : gts) {
        if (labeled_count(g) == 0) continue;  // undefined OKS: excluded
        gt_by_img[g.image_id].push_back(&g);
        ++total_gt;
    }
    if (total_gt == 0) throw ValueError("ap_ar: no usable ground-truth instances");

    // Deterministic global order: score descending, then instance id ascending.
    std::vector<const Annotation*> order;
    for (const auto& p : preds) order.push_back(&p);
    std::sort(order.begin(), order.end(), [](const Annotation* a, const Annotation* b) {
        if (a->score != b->score) return a->score > b->score;
        return a->instance_id < b->instance_id;
    });

    ApArResult res;
    double ap_sum = 0, ar_sum = 0;
    for (int ti = 0; ti < 10; ++ti) {
        const double thr = 0.50 + 0.05 * ti;
        std::map<std::int64_t, std::vector<bool>> used;
        for (const auto& [img, v] : gt_by_img) used[img].assign(v.size(), false);

        std::vector<int> tp;  // per prediction, in score order
        for (const Annotation* p : order) {
            int hit = 0;
            auto it = gt_by_img.find(p->image_id);
            if (it != gt_by_img.end()) {
                double best = -1;
                std::size_t best_i = 0;
                auto& flags = used[p->image_id];
                for (std::size_t i = 0; i < it->second.size(); ++i) {
                    if (flags[i]) continue;
                    const double s = oks(*p, *it->second[i], k_consts);
                    if (s > best) {
                        best = s;
                        best_i = i;
                    }
                }
                if (best >= thr) {
                    flags[best_i] = true;
                    hit = 1;
                }
            }
            tp.push_back(hit);
        }

        // Precision at each prediction rank, then 101-point interpolation.
        std::vector<double> prec, rec;
        int cum = 0;
        for (std::size_t i = 0; i < tp.size(); ++i) {
            cum += tp[i];
            prec.push_back(static_cast<double>(cum) / static_cast<double>(i + 1));
            rec.push_back(static_cast<double>(cum) / total_gt);
        }
        for (std::size_t i = prec.size(); i-- > 1;) {
            prec[i - 1] = std::max(prec[i - 1], prec[i]);
        }
        double ap_t = 0;
        for (int r = 0; r <= 100; ++r) {
            const double level = r / 100.0;
            auto it = std::lower_bound(rec.begin(), rec.end(), level);
            if (it != rec.end()) ap_t += prec[static_cast<std::size_t>(it - rec.begin())];
        }
        ap_t /= 101.0;
        const double ar_t = static_cast<double>(cum) / total_gt;

        ap_sum += ap_t;
        ar_sum += ar_t;
        if (ti == 0) res.ap50 = ap_t;
        if (ti == 5) res.ap75 = ap_t;
    }
    res.ap = ap_sum / 10.0;
    res.ar = ar_sum / 10.0;
    return res;
}

double pckh(const std::vector<Annotation>& preds, const std::vector<Annotation>& gts,
            const std::vector<double>& head_sizes, double alpha) {
    if (gts.size() != head_sizes.size()) throw ValueError("pckh: head_sizes must parallel gts");
    std::map<std::pair<std::int64_t, std::int64_t>, const Annotation*> pred_by_key;
    for (const auto& p : preds) pred_by_key[{p.image_id, p.instance_id}] = &p;

    int correct = 0, total = 0;
    for (std::size_t g = 0; g < gts.size(); ++g) {
        if (!(head_sizes[g] > 0)) throw ValueError("pckh: head sizes must be positive");
        auto it = pred_by_key.find({gts[g].image_id, gts[g].instance_id});
        for (std::size_t i = 0; i < gts[g].keypoints.size(); ++i) {
            if (gts[g].keypoints[i][2] <= 0) continue;
            ++total;
            if (it == pred_by_key.end()) continue;
            const auto& p = it->second->keypoints;
            if (i >= p.size()) continue;
            const double dx = p[i][0] - gts[g].keypoints[i][0];
            const double dy = p[i][1] - gts[g].keypoints[i][1];
            if (std::sqrt(dx * dx + dy * dy) <= alpha * head_sizes[g]) ++correct;
        }
    }
    if (total == 0) throw ValueError("pckh: no labeled keypoints in ground truth");
    return 100.0 * correct / total;
}

}  // namespace greit
