#pragma once

#include <cstdint>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "attnpipe/geometry.hpp"
#include "attnpipe/raster.hpp"

namespace attnpipe {

/// Detection in global frame pixels.
struct Detection {
    Rect rect;
    std::string label;
    double confidence = 0.0;
    /// Final-grid crop that produced it; -1 when unknown or after merging.
    int crop_id = -1;

    friend bool operator==(const Detection&, const Detection&) = default;
};

/// Detection as returned by a detector, in crop-local 608 space.
struct CropDetection {
    BoxF rect;
    std::string label;
    double confidence = 0.0;

    friend bool operator==(const CropDetection&, const CropDetection&) = default;
};

struct GroundTruthObject {
    long frame_id = 0;
    Rect rect;
    std::string label;
    long object_id = 0;

    friend bool operator==(const GroundTruthObject&, const GroundTruthObject&) = default;
};

/// Ground truth keyed by frame id.
using GroundTruthSet = std::map<long, std::vector<GroundTruthObject>>;

GroundTruthSet index_by_frame(std::span<const GroundTruthObject> objects);

struct DetectorProfile {
    int input_side = kModelSide;
    double min_confidence = 0.0;
    std::vector<std::string> supported_classes;
};

/// A resampled crop ready for evaluation, with the geometry it was cut from.
struct Tile {
    long frame_id = 0;
    CropSpec crop;
    Raster pixels;
};

/// Fixed-resolution square detector. Implementations must be safe to call
/// concurrently from several threads.
class Detector {
public:
    virtual ~Detector() = default;

    virtual const DetectorProfile& profile() const = 0;

    /// Detections sorted by descending confidence, rects inside [0,608]^2.
    /// Throws std::invalid_argument when the tile is not input_side square.
    std::vector<CropDetection> detect(const Tile& tile) const;

protected:
    virtual std::vector<CropDetection> do_detect(const Tile& tile) const = 0;
};

struct OracleOptions {
    /// Fraction of an object's area that must fall inside the crop.
    double visibility_threshold = 0.3;
    /// Visible part smaller than this on the tile, in either dimension, is missed.
    double min_tile_px = 8.0;
};

/// Ground-truth oracle: every object with enough visible area inside the
/// crop comes back as its clipped, projected rect with confidence equal to
/// the visible-area fraction.
std::vector<CropDetection> mock_detect(const CropSpec& crop, std::span<const GroundTruthObject> gt,
                                       const OracleOptions& options = {});

class OracleDetector : public Detector {
public:
    explicit OracleDetector(GroundTruthSet gt, OracleOptions options = {});

    const DetectorProfile& profile() const override { return profile_; }
    const OracleOptions& options() const noexcept { return options_; }

protected:
    std::vector<CropDetection> do_detect(const Tile& tile) const override;

    std::span<const GroundTruthObject> objects_for(long frame_id) const;

private:
    GroundTruthSet gt_;
    OracleOptions options_;
    DetectorProfile profile_;
};

/// Oracle that additionally drops each (frame, crop, object) detection with a
/// fixed probability. Seeded and stateless, so repeatable and thread-safe.
class StochasticOracleDetector : public OracleDetector {
public:
    StochasticOracleDetector(GroundTruthSet gt, double miss_rate, std::uint64_t seed, OracleOptions options = {});

protected:
    std::vector<CropDetection> do_detect(const Tile& tile) const override;

private:
    double miss_rate_;
    std::uint64_t seed_;
};

}  // namespace attnpipe
