#pragma once

// Scene families shared by the unit tests and the acceptance run. Object
// placement is derived from build_grid so it tracks the grid arithmetic.

#include <map>
#include <stdexcept>
#include <string>
#include <tuple>
#include <vector>

#include "attnpipe/pipeline.hpp"
#include "support.hpp"

namespace fixtures {

using namespace attnpipe;

inline PipelineSettings settings_for(int attention_rows, int final_rows, int overlap) {
    PipelineSettings s;
    s.attention = CropSettings{attention_rows, overlap};
    s.final = CropSettings{final_rows, overlap};
    return s;
}

struct StraddleCase {
    std::string name;
    testsupport::Scene scene;
    PipelineSettings settings;
};

/// Vertical extent [top, bottom) of an object of height h crossing the border
/// below grid row `row` with `fraction` of it inside that row.
inline std::pair<int, int> across_row(const GridSpec& g, int row, double fraction, int h) {
    const int border = g.at(row, 0).global_rect.bottom();
    const int top = border - static_cast<int>(round_half_up(fraction * h));
    return {top, top + h};
}

/// Left edge range of column `col` that no neighbouring column reaches.
inline std::pair<int, int> column_interior(const GridSpec& g, int col) {
    const int lo = col > 0 ? g.at(0, col - 1).global_rect.right() : 0;
    const int hi = col + 1 < g.cols ? g.at(0, col + 1).global_rect.x() : g.frame_w;
    return {lo, hi};
}

inline StraddleCase vertical_case(const std::string& name, int final_rows, int overlap,
                                  const std::vector<std::tuple<int, int, double, int, int>>& people) {
    // people: (row, col, fraction above border, w, h)
    const auto settings = settings_for(1, final_rows, overlap);
    const auto g = build_grid(3840, 2160, settings.final);
    SceneSpec spec;
    spec.width = 3840;
    spec.height = 2160;
    std::map<int, int> next_x;
    for (const auto& [row, col, fraction, w, h] : people) {
        const auto [lo, hi] = column_interior(g, col);
        const int x = next_x.contains(col) ? next_x[col] : lo + 10;
        next_x[col] = x + w + 80;
        if (x + w > hi) {
            throw std::logic_error("straddle fixture does not fit its column");
        }
        const auto [top, bottom] = across_row(g, row, fraction, h);
        spec.objects.push_back(SceneObject{"person", Rect(x, top, w, bottom - top), 0, 0});
    }
    return StraddleCase{name, testsupport::Scene(spec), settings};
}

/// Ten people-crossing-a-row-border layouts over several grids and split
/// ratios. Each must come out as one box per person.
inline std::vector<StraddleCase> straddle_family() {
    std::vector<StraddleCase> out;
    out.push_back(vertical_case("rows2 even split", 2, 20, {{0, 1, 0.5, 60, 200}}));
    out.push_back(vertical_case("rows2 mostly below", 2, 20, {{0, 1, 0.35, 60, 200}}));
    out.push_back(vertical_case("rows2 mostly above", 2, 20, {{0, 2, 0.65, 70, 240}}));
    out.push_back(vertical_case("rows3 upper border", 3, 20, {{0, 2, 0.5, 50, 160}}));
    out.push_back(vertical_case("rows3 lower border", 3, 20, {{1, 3, 0.4, 50, 170}}));
    out.push_back(vertical_case("rows4 single", 4, 20, {{1, 4, 0.5, 45, 150}}));
    out.push_back(vertical_case("rows4 side by side", 4, 20, {{1, 2, 0.5, 45, 150}, {1, 2, 0.45, 45, 150}}));
    out.push_back(vertical_case("rows2 overlap 50 with bystander", 2, 50, {{0, 1, 0.55, 60, 220}, {0, 2, 0.9, 60, 100}}));
    out.push_back(vertical_case("rows6 short crops", 6, 20, {{2, 5, 0.5, 40, 150}}));
    out.push_back(vertical_case("rows3 spread over columns", 3, 20,
                                {{0, 1, 0.5, 50, 180}, {1, 3, 0.6, 50, 180}, {0, 5, 0.4, 50, 180}}));
    return out;
}

/// People crossing a column border: left and right fragments.
inline StraddleCase horizontal_straddle() {
    const auto settings = settings_for(1, 2, 20);
    const auto g = build_grid(3840, 2160, settings.final);
    SceneSpec spec;
    spec.width = 3840;
    spec.height = 2160;
    for (const int col : {0, 1}) {
        const int border = g.at(0, col).global_rect.right();
        const int w = 120;
        spec.objects.push_back(SceneObject{"person", Rect(border - w / 2, 300 + col * 100, w, 200), 0, 0});
    }
    return StraddleCase{"horizontal", testsupport::Scene(spec), settings};
}

/// One frame through the full pipeline with the oracle detector.
inline FrameResult run_pipeline_frame(const testsupport::Scene& scene, const PipelineSettings& settings,
                                      long frame = 0) {
    OracleDetector det(scene.by_frame);
    LocalEvaluator ev(det);
    AttentionHistory h(settings.temporal_window);
    return run_frame(scene.frame(frame), frame, settings, ev, ev, h);
}

/// Scene whose objects are all seen by a one-row attention pass in 4K.
inline SceneSpec visible_scene(std::uint64_t seed) {
    return testsupport::random_scene(seed, 6 + static_cast<int>(seed % 10), 40, 200, 60, 300, 2);
}

/// At most two people, for crop-count checks.
inline SceneSpec sparse_scene(std::uint64_t seed) {
    return testsupport::random_scene(seed, 1 + static_cast<int>(seed % 2), 40, 120, 60, 200, 3);
}

/// Many small people: large enough for a one-row attention pass in 4K,
/// below the on-tile minimum once the whole frame is squeezed to 608.
inline SceneSpec dense_small_scene(std::uint64_t seed) {
    return testsupport::random_scene(seed, 60, 32, 45, 60, 120, 2);
}

}  // namespace fixtures
