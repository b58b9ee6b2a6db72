#pragma once

#include <array>
#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnpipe/detector.hpp"
#include "attnpipe/raster.hpp"

namespace attnpipe {

struct SceneObject {
    std::string label = "person";
    Rect rect;
    /// Per-frame displacement in pixels.
    int dx = 0;
    int dy = 0;
};

/// Objects drawn at random positions, fully inside the frame.
struct RandomObjects {
    int count = 0;
    std::string label = "person";
    int min_w = 20;
    int max_w = 60;
    int min_h = 40;
    int max_h = 120;
};

/// Description of a synthetic sequence: flat background with filled
/// rectangles, one colour per object.
struct SceneSpec {
    int width = 1920;
    int height = 1080;
    int frames = 1;
    std::uint64_t seed = 1;
    std::array<std::uint8_t, 3> background{32, 32, 32};
    std::vector<SceneObject> objects;
    RandomObjects random;
};

/// Throws ConfigError for invalid specs.
SceneSpec scene_spec_from_json(const nlohmann::json& j);
nlohmann::json to_json(const SceneSpec& spec);
void validate(const SceneSpec& spec);

/// Uniform integer in [lo, hi] drawn from a 64-bit stream; stable across
/// standard libraries.
class SceneRng {
public:
    explicit SceneRng(std::uint64_t seed) : state_(seed) {}
    std::uint64_t next();
    int uniform(int lo, int hi);

private:
    std::uint64_t state_;
};

/// Ground truth of every frame. Moving objects are clipped to the frame and
/// dropped once they leave it. Object ids are stable across frames.
std::vector<GroundTruthObject> scene_ground_truth(const SceneSpec& spec);

/// Pixels of one frame given that frame's ground truth.
Raster render_frame(const SceneSpec& spec, std::span<const GroundTruthObject> frame_objects);

/// Colour used for an object id; never equal to the background.
std::array<std::uint8_t, 3> object_colour(long object_id, const std::array<std::uint8_t, 3>& background);

/// Writes frame_%06d.ppm files and gt.jsonl into `out`.
void write_scene(const SceneSpec& spec, const std::filesystem::path& out);

}  // namespace attnpipe
