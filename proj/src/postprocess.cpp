#include "attnpipe/postprocess.hpp"

#include <algorithm>
#include <cstdlib>
#include <numeric>
#include <set>
#include <stdexcept>
#include <tuple>

namespace attnpipe {

void validate(const MergePolicy& policy) {
    if (!(policy.nms_iou > 0.0 && policy.nms_iou < 1.0)) {
        throw std::invalid_argument("nms_iou must be in (0, 1)");
    }
    if (policy.vertical_gap_px < 0 || policy.horizontal_alignment_tolerance_px < 0) {
        throw std::invalid_argument("merge gaps must be >= 0");
    }
}

std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold) {
    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

    std::vector<Detection> kept;
    for (const auto idx : order) {
        const auto& cand = dets[idx];
        const bool suppressed = std::any_of(kept.begin(), kept.end(), [&](const Detection& k) {
            return k.label == cand.label && iou(k.rect, cand.rect) >= iou_threshold;
        });
        if (!suppressed) {
            kept.push_back(cand);
        }
    }
    return kept;
}

namespace {

struct Fragment {
    Detection det;
    std::set<int> crops;
};

// a sits in crop `first`, b in the next crop along the axis
bool stitchable(const Rect& a, const Rect& b, const Rect& first, const Rect& second, MergeAxis axis,
                const MergePolicy& policy) {
    const int gap = policy.vertical_gap_px;
    const int tol = policy.horizontal_alignment_tolerance_px;
    if (axis == MergeAxis::vertical) {
        return a.bottom() >= second.y() - gap && b.y() <= first.bottom() + gap && b.y() - a.bottom() <= gap &&
               std::abs(a.x() - b.x()) <= tol && std::abs(a.right() - b.right()) <= tol;
    }
    return a.right() >= second.x() - gap && b.x() <= first.right() + gap && b.x() - a.right() <= gap &&
           std::abs(a.y() - b.y()) <= tol && std::abs(a.bottom() - b.bottom()) <= tol;
}

bool axis_allowed(MergeAxis rule, MergeAxis axis) { return rule == MergeAxis::both || rule == axis; }

bool mergeable(const Fragment& a, const Fragment& b, const GridSpec& grid, const MergePolicy& policy) {
    if (a.det.label != b.det.label) {
        return false;
    }
    const auto rule = policy.mergeable_classes.find(a.det.label);
    if (rule == policy.mergeable_classes.end()) {
        return false;
    }
    const auto n = static_cast<int>(grid.crops.size());
    for (const int ca : a.crops) {
        for (const int cb : b.crops) {
            if (ca < 0 || cb < 0 || ca >= n || cb >= n) {
                continue;
            }
            const auto& cropA = grid.crops[static_cast<std::size_t>(ca)];
            const auto& cropB = grid.crops[static_cast<std::size_t>(cb)];
            for (const auto axis : {MergeAxis::vertical, MergeAxis::horizontal}) {
                if (!axis_allowed(rule->second, axis)) {
                    continue;
                }
                const bool vertical = axis == MergeAxis::vertical;
                const int dr = cropB.row - cropA.row;
                const int dc = cropB.col - cropA.col;
                const bool forward = vertical ? (dr == 1 && dc == 0) : (dr == 0 && dc == 1);
                const bool backward = vertical ? (dr == -1 && dc == 0) : (dr == 0 && dc == -1);
                if (forward && stitchable(a.det.rect, b.det.rect, cropA.global_rect, cropB.global_rect, axis, policy)) {
                    return true;
                }
                if (backward &&
                    stitchable(b.det.rect, a.det.rect, cropB.global_rect, cropA.global_rect, axis, policy)) {
                    return true;
                }
            }
        }
    }
    return false;
}

}  // namespace

std::vector<Detection> merge_split(std::span<const Detection> dets, const GridSpec& grid, const MergePolicy& policy) {
    std::vector<Fragment> frags;
    frags.reserve(dets.size());
    for (const auto& d : dets) {
        frags.push_back(Fragment{d, {d.crop_id}});
    }

    bool changed = true;
    while (changed) {
        changed = false;
        for (std::size_t i = 0; i < frags.size() && !changed; ++i) {
            for (std::size_t j = i + 1; j < frags.size(); ++j) {
                if (!mergeable(frags[i], frags[j], grid, policy)) {
                    continue;
                }
                auto& keep = frags[i];
                const auto& other = frags[j];
                keep.det.rect = union_rect(keep.det.rect, other.det.rect);
                keep.det.confidence = std::max(keep.det.confidence, other.det.confidence);
                keep.crops.insert(other.crops.begin(), other.crops.end());
                keep.det.crop_id = -1;
                frags.erase(frags.begin() + static_cast<std::ptrdiff_t>(j));
                changed = true;
                break;
            }
        }
    }

    std::vector<Detection> out;
    out.reserve(frags.size());
    for (auto& f : frags) {
        out.push_back(std::move(f.det));
    }
    return out;
}

void sort_canonical(std::vector<Detection>& dets) {
    std::stable_sort(dets.begin(), dets.end(), [](const Detection& a, const Detection& b) {
        if (a.confidence != b.confidence) {
            return a.confidence > b.confidence;
        }
        return std::tuple(a.rect.y(), a.rect.x(), a.rect.h(), a.rect.w(), a.label) <
               std::tuple(b.rect.y(), b.rect.x(), b.rect.h(), b.rect.w(), b.label);
    });
}

namespace {

std::vector<Detection> run_nms(std::span<const Detection> dets, const MergePolicy& policy) {
    if (!policy.nms_per_crop) {
        return nms(dets, policy.nms_iou);
    }
    std::map<int, std::vector<Detection>> by_crop;
    for (const auto& d : dets) {
        by_crop[d.crop_id].push_back(d);
    }
    std::vector<Detection> out;
    for (const auto& [crop, group] : by_crop) {
        auto kept = nms(group, policy.nms_iou);
        out.insert(out.end(), kept.begin(), kept.end());
    }
    return out;
}

}  // namespace

std::vector<Detection> postprocess(std::span<const Detection> dets, const GridSpec& grid, const MergePolicy& policy) {
    validate(policy);
    std::vector<Detection> out;
    if (policy.merge_before_nms) {
        const auto merged = merge_split(dets, grid, policy);
        out = run_nms(merged, policy);
    } else {
        const auto kept = run_nms(dets, policy);
        out = merge_split(kept, grid, policy);
    }
    sort_canonical(out);
    return out;
}

}  // namespace attnpipe
