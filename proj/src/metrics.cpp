#include "attnpipe/metrics.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>

namespace attnpipe {

MatchResult match(std::span<const Detection> dets, std::span<const GroundTruthObject> gts, double iou_threshold) {
    MatchResult result;
    result.is_true_positive.assign(dets.size(), false);

    std::vector<std::size_t> order(dets.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return dets[a].confidence > dets[b].confidence; });

    std::vector<bool> taken(gts.size(), false);
    for (const auto di : order) {
        double best = -1.0;
        std::size_t best_gt = gts.size();
        for (std::size_t gi = 0; gi < gts.size(); ++gi) {
            if (taken[gi] || gts[gi].label != dets[di].label) {
                continue;
            }
            const double v = iou(dets[di].rect, gts[gi].rect);
            if (v > best) {
                best = v;
                best_gt = gi;
            }
        }
        if (best_gt < gts.size() && best >= iou_threshold) {
            taken[best_gt] = true;
            result.is_true_positive[di] = true;
            result.assignment.push_back(MatchPair{di, best_gt, best});
            ++result.true_positives;
        } else {
            ++result.false_positives;
        }
    }
    result.false_negatives = static_cast<int>(gts.size()) - result.true_positives;
    return result;
}

double ap_from_ranking(const std::vector<bool>& ranked_tp, std::size_t npos, ApMethod method) {
    if (npos == 0) {
        return 0.0;
    }
    std::vector<double> recall;
    std::vector<double> precision;
    std::size_t tp = 0;
    for (std::size_t i = 0; i < ranked_tp.size(); ++i) {
        tp += ranked_tp[i] ? 1 : 0;
        recall.push_back(static_cast<double>(tp) / static_cast<double>(npos));
        precision.push_back(static_cast<double>(tp) / static_cast<double>(i + 1));
    }

    if (method == ApMethod::eleven_point) {
        double sum = 0.0;
        for (int k = 0; k <= 10; ++k) {
            const double t = k / 10.0;
            double best = 0.0;
            for (std::size_t i = 0; i < recall.size(); ++i) {
                if (recall[i] >= t - 1e-12) {
                    best = std::max(best, precision[i]);
                }
            }
            sum += best;
        }
        return sum / 11.0;
    }

    // monotone envelope, then exact area under the step curve
    std::vector<double> mrec{0.0};
    std::vector<double> mpre{0.0};
    mrec.insert(mrec.end(), recall.begin(), recall.end());
    mpre.insert(mpre.end(), precision.begin(), precision.end());
    mrec.push_back(1.0);
    mpre.push_back(0.0);
    for (std::size_t i = mpre.size() - 1; i > 0; --i) {
        mpre[i - 1] = std::max(mpre[i - 1], mpre[i]);
    }
    double ap = 0.0;
    for (std::size_t i = 1; i < mrec.size(); ++i) {
        if (mrec[i] != mrec[i - 1]) {
            ap += (mrec[i] - mrec[i - 1]) * mpre[i];
        }
    }
    return ap;
}

std::optional<double> average_precision(const DetectionSet& dets, const GroundTruthSet& gts, double iou_threshold,
                                        const std::string& label, ApMethod method) {
    const auto keep = [&](const std::string& l) { return label.empty() || l == label; };

    std::size_t npos = 0;
    for (const auto& [frame, objects] : gts) {
        npos += static_cast<std::size_t>(std::count_if(objects.begin(), objects.end(),
                                                       [&](const GroundTruthObject& o) { return keep(o.label); }));
    }
    if (npos == 0) {
        return std::nullopt;
    }

    struct Ranked {
        double confidence;
        bool tp;
    };
    std::vector<Ranked> ranked;
    for (const auto& [frame, frame_dets] : dets) {
        std::vector<Detection> d;
        std::copy_if(frame_dets.begin(), frame_dets.end(), std::back_inserter(d),
                     [&](const Detection& x) { return keep(x.label); });
        const auto it = gts.find(frame);
        std::vector<GroundTruthObject> g;
        if (it != gts.end()) {
            std::copy_if(it->second.begin(), it->second.end(), std::back_inserter(g),
                         [&](const GroundTruthObject& o) { return keep(o.label); });
        }
        const auto m = match(d, g, iou_threshold);
        for (std::size_t i = 0; i < d.size(); ++i) {
            ranked.push_back(Ranked{d[i].confidence, m.is_true_positive[i]});
        }
    }
    std::stable_sort(ranked.begin(), ranked.end(),
                     [](const Ranked& a, const Ranked& b) { return a.confidence > b.confidence; });
    std::vector<bool> flags;
    flags.reserve(ranked.size());
    for (const auto& r : ranked) {
        flags.push_back(r.tp);
    }
    return ap_from_ranking(flags, npos, method);
}

std::string ap_key(double iou_threshold) {
    return "ap" + std::to_string(static_cast<int>(std::lround(iou_threshold * 100.0)));
}

std::optional<double> APReport::at(double iou_threshold) const {
    const auto it = overall.find(ap_key(iou_threshold));
    return it == overall.end() ? std::nullopt : it->second;
}

APReport ap_report(const DetectionSet& dets, const GroundTruthSet& gts, std::span<const double> thresholds,
                   ApMethod method) {
    APReport report;
    std::set<std::string> classes;
    for (const auto& [frame, objects] : gts) {
        report.ground_truth_count += static_cast<int>(objects.size());
        for (const auto& o : objects) {
            classes.insert(o.label);
        }
    }
    for (const auto& [frame, frame_dets] : dets) {
        report.detection_count += static_cast<int>(frame_dets.size());
    }

    for (const double t : thresholds) {
        const auto key = ap_key(t);
        double sum = 0.0;
        int n = 0;
        for (const auto& label : classes) {
            const auto ap = average_precision(dets, gts, t, label, method);
            report.per_class[label][key] = ap;
            if (ap) {
                sum += *ap;
                ++n;
            }
        }
        report.overall[key] = n > 0 ? std::optional<double>(sum / n) : std::nullopt;
    }
    return report;
}

std::vector<CountRow> count_report(const DetectionSet& dets, const GroundTruthSet& gts) {
    std::map<long, CountRow> rows;
    for (const auto& [frame, d] : dets) {
        rows[frame].frame_id = frame;
        rows[frame].detected = static_cast<int>(d.size());
    }
    for (const auto& [frame, g] : gts) {
        rows[frame].frame_id = frame;
        rows[frame].ground_truth = static_cast<int>(g.size());
    }
    std::vector<CountRow> out;
    out.reserve(rows.size());
    for (const auto& [frame, row] : rows) {
        out.push_back(row);
    }
    return out;
}

}  // namespace attnpipe
