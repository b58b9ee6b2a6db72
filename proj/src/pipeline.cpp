#include "attnpipe/pipeline.hpp"

#include <algorithm>
#include <regex>
#include <set>
#include <stdexcept>

#include "attnpipe/error.hpp"

namespace attnpipe {

std::string PipelineSettings::name() const {
    return std::to_string(attention.rows) + " att, " + std::to_string(final.rows) + " fin, " +
           std::to_string(final.overlap_px) + " over";
}

void validate(const PipelineSettings& settings) {
    validate(settings.attention);
    validate(settings.final);
    validate(settings.merge);
    if (settings.final.rows < settings.attention.rows) {
        throw std::invalid_argument("final grid must have at least as many rows as the attention grid");
    }
    if (settings.temporal_window < 1) {
        throw std::invalid_argument("temporal window must be >= 1");
    }
    if (settings.attention_margin_px < 0) {
        throw std::invalid_argument("attention margin must be >= 0");
    }
    if (settings.min_confidence < 0.0 || settings.min_confidence > 1.0) {
        throw std::invalid_argument("min_confidence must be in [0, 1]");
    }
}

PipelineSettings settings_from_preset(std::string_view name) {
    static const std::regex pattern(R"(^\s*(\d+)\s*att\s*,\s*(\d+)\s*fin\s*,\s*(\d+)\s*over\s*$)");
    std::match_results<std::string_view::const_iterator> m;
    if (!std::regex_match(name.begin(), name.end(), m, pattern)) {
        throw ConfigError("unknown preset '" + std::string(name) + "', expected e.g. \"1 att, 2 fin, 20 over\"");
    }
    PipelineSettings s;
    s.attention.rows = std::stoi(m[1].str());
    s.final.rows = std::stoi(m[2].str());
    s.attention.overlap_px = s.final.overlap_px = std::stoi(m[3].str());
    try {
        validate(s);
    } catch (const std::invalid_argument& e) {
        throw ConfigError("preset '" + std::string(name) + "': " + e.what());
    }
    return s;
}

std::vector<std::string> preset_names() {
    return {"1 att, 2 fin, 50 over", "1 att, 3 fin, 50 over", "1 att, 2 fin, 20 over",
            "1 att, 3 fin, 20 over", "2 att, 4 fin, 20 over", "2 att, 6 fin, 20 over"};
}

std::vector<CropResult> LocalEvaluator::evaluate(long /*frame_id*/, std::span<const Tile> tiles, StageTiming& timing) {
    Stopwatch watch;
    std::vector<CropResult> out;
    out.reserve(tiles.size());
    for (const auto& tile : tiles) {
        out.push_back(CropResult{tile.crop.crop_id, detector_.detect(tile)});
    }
    timing.eval_ms = watch.elapsed_ms();
    timing.transfer_ms = 0.0;
    timing.per_worker = {WorkerBusy{"local", timing.eval_ms}};
    return out;
}

std::vector<Detection> evaluate_crops(const Raster& frame, long frame_id, std::span<const CropSpec> crops,
                                      CropEvaluator& evaluator, double min_confidence, StageTiming& timing) {
    Stopwatch cut;
    std::vector<Tile> tiles;
    tiles.reserve(crops.size());
    for (const auto& crop : crops) {
        tiles.push_back(Tile{frame_id, crop, cut_tile(frame, crop.global_rect)});
    }
    const double cut_ms = cut.elapsed_ms();

    const auto results = evaluator.evaluate(frame_id, tiles, timing);
    timing.client_processing_ms += cut_ms;
    if (results.size() != crops.size()) {
        throw ProtocolError("evaluator returned " + std::to_string(results.size()) + " results for " +
                            std::to_string(crops.size()) + " crops");
    }

    std::vector<Detection> out;
    for (std::size_t i = 0; i < crops.size(); ++i) {
        if (results[i].crop_id != crops[i].crop_id) {
            throw ProtocolError("result order does not match crop order");
        }
        for (const auto& d : results[i].detections) {
            if (d.confidence < min_confidence) {
                continue;
            }
            out.push_back(Detection{to_global(d.rect, crops[i]), d.label, d.confidence, crops[i].crop_id});
        }
    }
    return out;
}

AttentionModel attention_pass(const Raster& frame, long frame_id, const PipelineSettings& settings,
                              CropEvaluator& evaluator, StageTiming& timing) {
    const auto grid = build_grid(frame.width, frame.height, settings.attention);
    const auto dets = evaluate_crops(frame, frame_id, grid.crops, evaluator, settings.min_confidence, timing);
    AttentionModel model;
    model.frame_id = frame_id;
    model.source_window = {frame_id};
    model.boxes.reserve(dets.size());
    for (const auto& d : dets) {
        model.boxes.push_back(d.rect);
    }
    return model;
}

AttentionModel merge_temporal(std::span<const AttentionModel> history, int window) {
    if (history.empty()) {
        throw std::invalid_argument("merge_temporal: empty history");
    }
    if (window < 1) {
        throw std::invalid_argument("merge_temporal: window must be >= 1");
    }
    const auto take = std::min<std::size_t>(static_cast<std::size_t>(window), history.size());
    const auto recent = history.subspan(history.size() - take);

    AttentionModel out;
    out.frame_id = recent.back().frame_id;
    std::set<Rect> seen;
    for (const auto& model : recent) {
        out.source_window.push_back(model.frame_id);
        for (const auto& box : model.boxes) {
            if (seen.insert(box).second) {
                out.boxes.push_back(box);
            }
        }
    }
    return out;
}

ActiveSet select_active(const GridSpec& final_grid, const AttentionModel& attention, int margin) {
    std::vector<Rect> grown;
    grown.reserve(attention.boxes.size());
    for (const auto& box : attention.boxes) {
        grown.push_back(dilate(box, margin, final_grid.frame_w, final_grid.frame_h));
    }
    ActiveSet active;
    active.grid = final_grid;
    for (const auto& crop : final_grid.crops) {
        const bool hit = std::any_of(grown.begin(), grown.end(),
                                     [&](const Rect& r) { return intersects(r, crop.global_rect); });
        if (hit) {
            active.active_ids.push_back(crop.crop_id);
        }
    }
    return active;
}

std::vector<Detection> final_pass(const Raster& frame, long frame_id, const ActiveSet& active,
                                  CropEvaluator& evaluator, double min_confidence, StageTiming& timing) {
    std::vector<CropSpec> crops;
    crops.reserve(active.active_ids.size());
    for (const int id : active.active_ids) {
        crops.push_back(active.grid.crops.at(static_cast<std::size_t>(id)));
    }
    if (crops.empty()) {
        return {};
    }
    return evaluate_crops(frame, frame_id, crops, evaluator, min_confidence, timing);
}

void AttentionHistory::push(AttentionModel model) {
    models_.push_back(std::move(model));
    while (models_.size() > static_cast<std::size_t>(capacity_)) {
        models_.pop_front();
    }
}

AttentionModel AttentionHistory::merged() const {
    const std::vector<AttentionModel> v(models_.begin(), models_.end());
    return merge_temporal(v, capacity_);
}

namespace {

template <typename Fn>
auto in_stage(const char* stage, long frame_id, Fn&& fn) -> decltype(fn()) {
    try {
        return fn();
    } catch (const StageError&) {
        throw;
    } catch (const std::exception& e) {
        throw StageError(stage, frame_id, e.what());
    }
}

FrameResult finish(long frame_id, const std::vector<Detection>& raw, const GridSpec& grid,
                   const PipelineSettings& settings, int active_count, const StageTiming& stage) {
    FrameResult result;
    result.frame_id = frame_id;
    result.active_count = active_count;
    result.total_count = static_cast<int>(grid.crops.size());
    result.timing.client_processing_ms = stage.client_processing_ms;
    result.timing.transfer_ms = stage.transfer_ms;
    result.timing.final_eval_ms = stage.eval_ms;
    result.timing.per_worker = stage.per_worker;
    Stopwatch post;
    result.detections = in_stage("postprocess", frame_id, [&] { return postprocess(raw, grid, settings.merge); });
    result.timing.postprocess_ms = post.elapsed_ms();
    return result;
}

}  // namespace

FrameResult complete_frame(const Raster& frame, long frame_id, const PipelineSettings& settings,
                           const AttentionModel& attention, CropEvaluator& final_evaluator) {
    const auto grid = build_grid(frame.width, frame.height, settings.final);
    const auto active =
        in_stage("select", frame_id, [&] { return select_active(grid, attention, settings.attention_margin_px); });
    StageTiming stage;
    const auto raw = in_stage("final", frame_id, [&] {
        return final_pass(frame, frame_id, active, final_evaluator, settings.min_confidence, stage);
    });
    return finish(frame_id, raw, grid, settings, static_cast<int>(active.active_ids.size()), stage);
}

FrameResult run_frame(const Raster& frame, long frame_id, const PipelineSettings& settings,
                      CropEvaluator& attention_evaluator, CropEvaluator& final_evaluator, AttentionHistory& history) {
    validate(settings);
    Stopwatch att;
    StageTiming att_timing;
    auto model = in_stage("attention", frame_id,
                          [&] { return attention_pass(frame, frame_id, settings, attention_evaluator, att_timing); });
    const double attention_ms = att.elapsed_ms();
    history.push(std::move(model));
    const auto merged = history.merged();
    auto result = complete_frame(frame, frame_id, settings, merged, final_evaluator);
    result.timing.attention_wait_ms = attention_ms;
    return result;
}

CropSpec downscale_crop(int frame_w, int frame_h) {
    CropSpec crop;
    const int side = std::max(frame_w, frame_h);
    crop.crop_id = 0;
    crop.global_rect = Rect(0, 0, side, side);
    crop.scale = static_cast<double>(side) / kModelSide;
    crop.frame_w = frame_w;
    crop.frame_h = frame_h;
    return crop;
}

FrameResult run_downscale_baseline(const Raster& frame, long frame_id, const PipelineSettings& settings,
                                   CropEvaluator& evaluator) {
    GridSpec grid;
    grid.frame_w = frame.width;
    grid.frame_h = frame.height;
    grid.crop_side = std::max(frame.width, frame.height);
    grid.rows = grid.cols = 1;
    grid.settings = CropSettings{1, 0};
    grid.crops = {downscale_crop(frame.width, frame.height)};
    StageTiming stage;
    const auto raw = in_stage("final", frame_id, [&] {
        return evaluate_crops(frame, frame_id, grid.crops, evaluator, settings.min_confidence, stage);
    });
    return finish(frame_id, raw, grid, settings, 1, stage);
}

FrameResult run_allcrops_baseline(const Raster& frame, long frame_id, const PipelineSettings& settings,
                                  CropEvaluator& evaluator) {
    validate(settings);
    const auto grid = build_grid(frame.width, frame.height, settings.final);
    StageTiming stage;
    const auto raw = in_stage("final", frame_id, [&] {
        return evaluate_crops(frame, frame_id, grid.crops, evaluator, settings.min_confidence, stage);
    });
    return finish(frame_id, raw, grid, settings, static_cast<int>(grid.crops.size()), stage);
}

}  // namespace attnpipe
