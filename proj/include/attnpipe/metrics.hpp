#pragma once

#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "attnpipe/detector.hpp"

namespace attnpipe {

/// Detections keyed by frame id.
using DetectionSet = std::map<long, std::vector<Detection>>;

struct MatchPair {
    std::size_t detection = 0;
    std::size_t ground_truth = 0;
    double iou = 0.0;
};

struct MatchResult {
    int true_positives = 0;
    int false_positives = 0;
    int false_negatives = 0;
    std::vector<MatchPair> assignment;
    /// Indexed like the input detections.
    std::vector<bool> is_true_positive;
};

/// Greedy VOC matching within one frame. Detections are visited by
/// descending confidence and claim the unmatched same-class ground truth
/// with the highest IoU, provided it reaches the threshold.
MatchResult match(std::span<const Detection> dets, std::span<const GroundTruthObject> gts, double iou_threshold);

enum class ApMethod { continuous, eleven_point };

/// Area under the interpolated precision envelope for one class (or all
/// detections when label is empty), ranked across all frames. nullopt when
/// there is no ground truth to recall.
std::optional<double> average_precision(const DetectionSet& dets, const GroundTruthSet& gts, double iou_threshold,
                                        const std::string& label = {}, ApMethod method = ApMethod::continuous);

/// AP of a confidence-ranked list of TP flags against npos positives.
double ap_from_ranking(const std::vector<bool>& ranked_tp, std::size_t npos, ApMethod method = ApMethod::continuous);

/// "ap25", "ap50", "ap75" style key for a threshold.
std::string ap_key(double iou_threshold);

struct APReport {
    /// Mean over classes with ground truth, keyed by ap_key.
    std::map<std::string, std::optional<double>> overall;
    std::map<std::string, std::map<std::string, std::optional<double>>> per_class;
    int ground_truth_count = 0;
    int detection_count = 0;

    std::optional<double> at(double iou_threshold) const;
};

APReport ap_report(const DetectionSet& dets, const GroundTruthSet& gts, std::span<const double> thresholds,
                   ApMethod method = ApMethod::continuous);

struct CountRow {
    long frame_id = 0;
    int detected = 0;
    int ground_truth = 0;

    friend bool operator==(const CountRow&, const CountRow&) = default;
};

/// One row per frame present in either input, ascending frame id.
std::vector<CountRow> count_report(const DetectionSet& dets, const GroundTruthSet& gts);

}  // namespace attnpipe
