#pragma once

#include <map>
#include <span>
#include <string>
#include <vector>

#include "attnpipe/detector.hpp"
#include "attnpipe/geometry.hpp"

namespace attnpipe {

/// Which crop borders a class may be stitched across.
enum class MergeAxis { vertical, horizontal, both };

struct MergePolicy {
    double nms_iou = 0.45;
    /// Maximum gap, global px, between fragments across a shared border.
    int vertical_gap_px = 40;
    /// Maximum difference, global px, of the fragments' aligned edges.
    int horizontal_alignment_tolerance_px = 30;
    std::map<std::string, MergeAxis> mergeable_classes{{"person", MergeAxis::vertical}};
    /// Run NMS separately inside each crop instead of once over the frame.
    bool nms_per_crop = false;
    /// Stitch fragments before running NMS.
    bool merge_before_nms = false;
};

/// Throws std::invalid_argument when thresholds are out of range.
void validate(const MergePolicy& policy);

/// Greedy per-class NMS. Output ordered by confidence, ties by input order.
std::vector<Detection> nms(std::span<const Detection> dets, double iou_threshold);

/// Stitches same-class fragments detected on both sides of a crop border.
/// Inputs must carry the crop_id of the grid they came from.
std::vector<Detection> merge_split(std::span<const Detection> dets, const GridSpec& grid, const MergePolicy& policy);

/// NMS and border merging in the configured order, then canonical ordering
/// (confidence desc, then y, x, h, w, label).
std::vector<Detection> postprocess(std::span<const Detection> dets, const GridSpec& grid, const MergePolicy& policy);

/// Canonical order used for every emitted detection list.
void sort_canonical(std::vector<Detection>& dets);

}  // namespace attnpipe
