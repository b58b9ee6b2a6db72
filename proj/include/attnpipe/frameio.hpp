#pragma once

#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "attnpipe/detector.hpp"
#include "attnpipe/distribution.hpp"
#include "attnpipe/metrics.hpp"
#include "attnpipe/pipeline.hpp"
#include "attnpipe/raster.hpp"

namespace attnpipe {

namespace fs = std::filesystem;

// --- frames -----------------------------------------------------------------

/// Binary PPM (P6, maxval 255). Throws IoError.
Raster read_ppm(const fs::path& path);
void write_ppm(const fs::path& path, const Raster& raster);

/// Frame file name for an index: frame_000042.ppm
std::string frame_file_name(long index);

/// Directory of frame_%06d.ppm files, ordered by numeric index. All frames
/// must share the dimensions of the first one.
class FrameSource {
public:
    /// Throws IoError when the directory is missing, empty or unreadable.
    explicit FrameSource(fs::path directory);

    std::size_t size() const noexcept { return files_.size(); }
    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    long frame_id(std::size_t index) const;
    const fs::path& directory() const noexcept { return directory_; }

    /// Throws std::out_of_range for a bad index, IoError on decode failure
    /// or dimension mismatch.
    Raster load_frame(std::size_t index) const;

private:
    fs::path directory_;
    std::vector<std::pair<long, fs::path>> files_;
    int width_ = 0;
    int height_ = 0;
};

// --- ground truth -----------------------------------------------------------

/// One JSON object per line: frame_id, class, x, y, w, h, object_id.
std::vector<GroundTruthObject> read_ground_truth(const fs::path& path);
void write_ground_truth(const fs::path& path, const std::vector<GroundTruthObject>& objects);
GroundTruthObject ground_truth_from_json(const nlohmann::json& j);
nlohmann::json to_json(const GroundTruthObject& o);

// --- results ----------------------------------------------------------------

/// Confidence rounded to 6 decimals, as persisted.
double persisted_confidence(double c);

nlohmann::json to_json(const FrameResult& r, bool embed_timing);
/// JSON-lines, one frame per line. Timing is left out unless embed_timing,
/// so identical runs give identical bytes.
void write_results(const fs::path& path, const std::vector<FrameResult>& results, bool embed_timing = false);
std::string results_to_string(const std::vector<FrameResult>& results, bool embed_timing = false);
std::vector<FrameResult> read_results(const fs::path& path);
DetectionSet detections_by_frame(const std::vector<FrameResult>& results);

/// Column list of the timing CSV.
const std::vector<std::string>& timing_columns();
void write_timing_csv(const fs::path& path, const std::vector<FrameResult>& results);
void write_timing_csv(std::ostream& os, const std::vector<FrameResult>& results);

void write_count_csv(const fs::path& path, const std::vector<CountRow>& rows);
void write_count_csv(std::ostream& os, const std::vector<CountRow>& rows);
nlohmann::json to_json(const APReport& report);

// --- configuration ----------------------------------------------------------

enum class RunMode { pipeline, downscale, allcrops };
enum class DetectorKind { oracle, remote };

RunMode parse_run_mode(const std::string& text);
std::string to_string(RunMode mode);

/// Everything a run needs. Loaded from a "key = value" file; relative paths
/// resolve against the file's directory.
struct RunConfig {
    PipelineSettings settings;
    ClusterConfig cluster;
    DetectorKind detector = DetectorKind::oracle;
    OracleOptions oracle;
    RunMode mode = RunMode::pipeline;
    fs::path frames;
    fs::path ground_truth;
    fs::path results = "results.jsonl";
    fs::path timing = "timing.csv";
    bool embed_timing = false;
};

/// Parsed "key = value" lines; '#' starts a comment.
using KeyValues = std::vector<std::pair<std::string, std::string>>;
KeyValues parse_key_values(std::istream& in);

/// Applies one setting; throws ConfigError for unknown keys or bad values.
void apply_setting(RunConfig& config, const std::string& key, const std::string& value,
                   const fs::path& base_dir = {});

/// Reads a config file. "preset" is applied before the other keys.
RunConfig load_run_config(const fs::path& path);

/// Checks referenced inputs exist and the outputs' directories exist.
void check_paths(const RunConfig& config);

/// Writes the config back in key-value form.
void write_run_config(std::ostream& os, const RunConfig& config);

}  // namespace attnpipe
