#include "attnpipe/detector.hpp"

#include <algorithm>
#include <set>
#include <stdexcept>

namespace attnpipe {

GroundTruthSet index_by_frame(std::span<const GroundTruthObject> objects) {
    GroundTruthSet out;
    for (const auto& o : objects) {
        out[o.frame_id].push_back(o);
    }
    return out;
}

std::vector<CropDetection> Detector::detect(const Tile& tile) const {
    const int side = profile().input_side;
    if (tile.pixels.width != side || tile.pixels.height != side ||
        tile.pixels.rgb.size() != static_cast<std::size_t>(side) * side * 3) {
        throw std::invalid_argument("detect: tile must be " + std::to_string(side) + "x" + std::to_string(side) +
                                    ", got " + std::to_string(tile.pixels.width) + "x" +
                                    std::to_string(tile.pixels.height));
    }
    auto dets = do_detect(tile);
    std::stable_sort(dets.begin(), dets.end(),
                     [](const CropDetection& a, const CropDetection& b) { return a.confidence > b.confidence; });
    return dets;
}

std::vector<CropDetection> mock_detect(const CropSpec& crop, std::span<const GroundTruthObject> gt,
                                       const OracleOptions& options) {
    if (!(options.visibility_threshold > 0.0 && options.visibility_threshold <= 1.0)) {
        throw std::invalid_argument("visibility threshold must be in (0, 1]");
    }
    std::vector<CropDetection> out;
    for (const auto& object : gt) {
        const auto visible = intersection_area(object.rect, crop.global_rect);
        if (visible == 0) {
            continue;
        }
        const double fraction = static_cast<double>(visible) / static_cast<double>(object.rect.area());
        if (fraction < options.visibility_threshold) {
            continue;
        }
        const BoxF local = to_local(object.rect, crop);
        if (local.w < options.min_tile_px || local.h < options.min_tile_px) {
            continue;
        }
        out.push_back(CropDetection{local, object.label, fraction});
    }
    std::stable_sort(out.begin(), out.end(),
                     [](const CropDetection& a, const CropDetection& b) { return a.confidence > b.confidence; });
    return out;
}

OracleDetector::OracleDetector(GroundTruthSet gt, OracleOptions options)
    : gt_(std::move(gt)), options_(options) {
    std::set<std::string> classes;
    for (const auto& [frame, objects] : gt_) {
        for (const auto& o : objects) {
            classes.insert(o.label);
        }
    }
    profile_.input_side = kModelSide;
    profile_.min_confidence = options_.visibility_threshold;
    profile_.supported_classes.assign(classes.begin(), classes.end());
}

std::span<const GroundTruthObject> OracleDetector::objects_for(long frame_id) const {
    const auto it = gt_.find(frame_id);
    if (it == gt_.end()) {
        return {};
    }
    return it->second;
}

std::vector<CropDetection> OracleDetector::do_detect(const Tile& tile) const {
    return mock_detect(tile.crop, objects_for(tile.frame_id), options_);
}

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
    x += 0x9e3779b97f4a7c15ULL;
    x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
    x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
    return x ^ (x >> 31);
}

}  // namespace

StochasticOracleDetector::StochasticOracleDetector(GroundTruthSet gt, double miss_rate, std::uint64_t seed,
                                                   OracleOptions options)
    : OracleDetector(std::move(gt), options), miss_rate_(miss_rate), seed_(seed) {
    if (miss_rate < 0.0 || miss_rate > 1.0) {
        throw std::invalid_argument("miss rate must be in [0, 1]");
    }
}

std::vector<CropDetection> StochasticOracleDetector::do_detect(const Tile& tile) const {
    std::vector<GroundTruthObject> kept;
    for (const auto& o : objects_for(tile.frame_id)) {
        std::uint64_t h = splitmix64(seed_);
        h = splitmix64(h ^ static_cast<std::uint64_t>(tile.frame_id));
        h = splitmix64(h ^ static_cast<std::uint64_t>(tile.crop.crop_id));
        h = splitmix64(h ^ static_cast<std::uint64_t>(o.object_id));
        const double u = static_cast<double>(h >> 11) * 0x1.0p-53;
        if (u >= miss_rate_) {
            kept.push_back(o);
        }
    }
    return mock_detect(tile.crop, kept, options());
}

}  // namespace attnpipe
