#pragma once

#include <deque>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "attnpipe/detector.hpp"
#include "attnpipe/geometry.hpp"
#include "attnpipe/postprocess.hpp"
#include "attnpipe/raster.hpp"
#include "attnpipe/timing.hpp"

namespace attnpipe {

struct PipelineSettings {
    CropSettings attention{1, 20};
    CropSettings final{2, 20};
    /// Dilation of attention boxes before intersecting with the final grid.
    int attention_margin_px = 20;
    /// Number of most recent attention models unioned per frame.
    int temporal_window = 2;
    double min_confidence = 0.3;
    MergePolicy merge;

    /// Name in the "1 att, 2 fin, 20 over" form. Uses the final overlap.
    std::string name() const;
};

void validate(const PipelineSettings& settings);

/// Parses names like "2 att, 4 fin, 20 over" into settings with defaults
/// for everything else. Throws ConfigError on anything else.
PipelineSettings settings_from_preset(std::string_view name);

/// Preset names shipped with the tool.
std::vector<std::string> preset_names();

struct AttentionModel {
    long frame_id = 0;
    std::vector<Rect> boxes;
    std::vector<long> source_window;

    friend bool operator==(const AttentionModel&, const AttentionModel&) = default;
};

struct ActiveSet {
    GridSpec grid;
    std::vector<int> active_ids;
};

struct FrameResult {
    long frame_id = 0;
    std::vector<Detection> detections;
    int active_count = 0;
    int total_count = 0;
    TimingProfile timing;
};

struct CropResult {
    int crop_id = 0;
    std::vector<CropDetection> detections;

    friend bool operator==(const CropResult&, const CropResult&) = default;
};

/// Runs a detector over a batch of tiles, locally or on remote workers.
class CropEvaluator {
public:
    virtual ~CropEvaluator() = default;
    /// One result per tile, in tile order.
    virtual std::vector<CropResult> evaluate(long frame_id, std::span<const Tile> tiles, StageTiming& timing) = 0;
};

/// Evaluates tiles in-process, one after the other.
class LocalEvaluator : public CropEvaluator {
public:
    explicit LocalEvaluator(const Detector& detector) : detector_(detector) {}

    std::vector<CropResult> evaluate(long frame_id, std::span<const Tile> tiles, StageTiming& timing) override;

private:
    const Detector& detector_;
};

/// Cuts tiles for the given crops, evaluates them and projects the
/// detections to global pixels tagged with their crop id. Detections below
/// min_confidence are dropped.
std::vector<Detection> evaluate_crops(const Raster& frame, long frame_id, std::span<const CropSpec> crops,
                                      CropEvaluator& evaluator, double min_confidence, StageTiming& timing);

AttentionModel attention_pass(const Raster& frame, long frame_id, const PipelineSettings& settings,
                              CropEvaluator& evaluator, StageTiming& timing);

/// Union of the boxes of the most recent `window` models (history ordered
/// oldest first). The result carries the newest frame id.
AttentionModel merge_temporal(std::span<const AttentionModel> history, int window);

/// A crop is active when it overlaps some attention box grown by margin.
ActiveSet select_active(const GridSpec& final_grid, const AttentionModel& attention, int margin);

std::vector<Detection> final_pass(const Raster& frame, long frame_id, const ActiveSet& active,
                                  CropEvaluator& evaluator, double min_confidence, StageTiming& timing);

/// Keeps the last `capacity` attention models.
class AttentionHistory {
public:
    explicit AttentionHistory(int capacity) : capacity_(capacity < 1 ? 1 : capacity) {}

    void push(AttentionModel model);
    AttentionModel merged() const;
    std::size_t size() const noexcept { return models_.size(); }

private:
    int capacity_;
    std::deque<AttentionModel> models_;
};

/// Active-crop selection, final pass and postprocessing given an attention
/// model already merged over the temporal window.
FrameResult complete_frame(const Raster& frame, long frame_id, const PipelineSettings& settings,
                           const AttentionModel& attention, CropEvaluator& final_evaluator);

/// Full two-stage evaluation of one frame. Pushes this frame's attention
/// into history before merging.
FrameResult run_frame(const Raster& frame, long frame_id, const PipelineSettings& settings,
                      CropEvaluator& attention_evaluator, CropEvaluator& final_evaluator, AttentionHistory& history);

/// Whole frame letterboxed into one model-sized square.
FrameResult run_downscale_baseline(const Raster& frame, long frame_id, const PipelineSettings& settings,
                                   CropEvaluator& evaluator);

/// Every crop of the final grid evaluated.
FrameResult run_allcrops_baseline(const Raster& frame, long frame_id, const PipelineSettings& settings,
                                  CropEvaluator& evaluator);

/// Square crop used by the downscale baseline.
CropSpec downscale_crop(int frame_w, int frame_h);

}  // namespace attnpipe
