#include "attnpipe/frameio.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <regex>
#include <sstream>

#include "attnpipe/error.hpp"

namespace attnpipe {

using nlohmann::json;

namespace {

std::ofstream open_out(const fs::path& path, std::ios::openmode mode = std::ios::out) {
    std::ofstream out(path, mode);
    if (!out) {
        throw IoError("cannot write " + path.string());
    }
    return out;
}

std::ifstream open_in(const fs::path& path, std::ios::openmode mode = std::ios::in) {
    std::ifstream in(path, mode);
    if (!in) {
        throw IoError("cannot read " + path.string());
    }
    return in;
}

// next whitespace-separated PPM header token, skipping comments
std::string ppm_token(std::istream& in) {
    std::string tok;
    int ch;
    while ((ch = in.get()) != EOF) {
        if (ch == '#') {
            while ((ch = in.get()) != EOF && ch != '\n') {
            }
            continue;
        }
        if (std::isspace(ch)) {
            if (!tok.empty()) {
                return tok;
            }
            continue;
        }
        tok.push_back(static_cast<char>(ch));
    }
    return tok;
}

int ppm_int(std::istream& in, const fs::path& path) {
    const auto tok = ppm_token(in);
    try {
        std::size_t used = 0;
        const int v = std::stoi(tok, &used);
        if (used != tok.size()) {
            throw std::invalid_argument(tok);
        }
        return v;
    } catch (const std::exception&) {
        throw IoError(path.string() + ": bad PPM header field '" + tok + "'");
    }
}

struct PpmHeader {
    int width;
    int height;
};

PpmHeader read_ppm_header(std::istream& in, const fs::path& path) {
    if (ppm_token(in) != "P6") {
        throw IoError(path.string() + ": not a binary PPM (P6)");
    }
    PpmHeader h{ppm_int(in, path), ppm_int(in, path)};
    const int maxval = ppm_int(in, path);
    if (h.width < 1 || h.height < 1 || maxval != 255) {
        throw IoError(path.string() + ": unsupported PPM dimensions or maxval");
    }
    return h;
}

}  // namespace

Raster read_ppm(const fs::path& path) {
    auto in = open_in(path, std::ios::binary);
    const auto h = read_ppm_header(in, path);
    Raster r(h.width, h.height);
    in.read(reinterpret_cast<char*>(r.rgb.data()), static_cast<std::streamsize>(r.rgb.size()));
    if (in.gcount() != static_cast<std::streamsize>(r.rgb.size())) {
        throw IoError(path.string() + ": truncated pixel data");
    }
    return r;
}

void write_ppm(const fs::path& path, const Raster& raster) {
    auto out = open_out(path, std::ios::binary);
    out << "P6\n" << raster.width << ' ' << raster.height << "\n255\n";
    out.write(reinterpret_cast<const char*>(raster.rgb.data()), static_cast<std::streamsize>(raster.rgb.size()));
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::string frame_file_name(long index) {
    char buf[32];
    std::snprintf(buf, sizeof(buf), "frame_%06ld.ppm", index);
    return buf;
}

FrameSource::FrameSource(fs::path directory) : directory_(std::move(directory)) {
    std::error_code ec;
    if (!fs::is_directory(directory_, ec)) {
        throw IoError("frame directory " + directory_.string() + " does not exist");
    }
    static const std::regex name(R"(frame_(\d+)\.ppm)");
    for (const auto& entry : fs::directory_iterator(directory_)) {
        std::smatch m;
        const auto file = entry.path().filename().string();
        if (entry.is_regular_file() && std::regex_match(file, m, name)) {
            files_.emplace_back(std::stol(m[1].str()), entry.path());
        }
    }
    if (files_.empty()) {
        throw IoError("no frame_*.ppm files in " + directory_.string());
    }
    std::sort(files_.begin(), files_.end());
    auto in = open_in(files_.front().second, std::ios::binary);
    const auto h = read_ppm_header(in, files_.front().second);
    width_ = h.width;
    height_ = h.height;
}

long FrameSource::frame_id(std::size_t index) const { return files_.at(index).first; }

Raster FrameSource::load_frame(std::size_t index) const {
    if (index >= files_.size()) {
        throw std::out_of_range("frame index " + std::to_string(index) + " out of range (" +
                                std::to_string(files_.size()) + " frames)");
    }
    auto r = read_ppm(files_[index].second);
    if (r.width != width_ || r.height != height_) {
        throw IoError(files_[index].second.string() + ": dimensions " + std::to_string(r.width) + "x" +
                      std::to_string(r.height) + " differ from sequence " + std::to_string(width_) + "x" +
                      std::to_string(height_));
    }
    return r;
}

GroundTruthObject ground_truth_from_json(const json& j) {
    GroundTruthObject o;
    o.frame_id = j.at("frame_id").get<long>();
    o.label = j.at("class").get<std::string>();
    o.rect = Rect(j.at("x").get<int>(), j.at("y").get<int>(), j.at("w").get<int>(), j.at("h").get<int>());
    o.object_id = j.at("object_id").get<long>();
    return o;
}

json to_json(const GroundTruthObject& o) {
    return json{{"frame_id", o.frame_id}, {"class", o.label},  {"x", o.rect.x()},          {"y", o.rect.y()},
                {"w", o.rect.w()},        {"h", o.rect.h()},   {"object_id", o.object_id}};
}

std::vector<GroundTruthObject> read_ground_truth(const fs::path& path) {
    auto in = open_in(path);
    std::vector<GroundTruthObject> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            out.push_back(ground_truth_from_json(json::parse(line)));
        } catch (const std::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

void write_ground_truth(const fs::path& path, const std::vector<GroundTruthObject>& objects) {
    auto out = open_out(path, std::ios::binary);
    for (const auto& o : objects) {
        out << to_json(o).dump() << '\n';
    }
}

double persisted_confidence(double c) { return std::round(c * 1e6) / 1e6; }

json to_json(const FrameResult& r, bool embed_timing) {
    json dets = json::array();
    for (const auto& d : r.detections) {
        dets.push_back({{"x", d.rect.x()},
                        {"y", d.rect.y()},
                        {"w", d.rect.w()},
                        {"h", d.rect.h()},
                        {"class", d.label},
                        {"confidence", persisted_confidence(d.confidence)}});
    }
    json j{{"frame_id", r.frame_id},
           {"active_count", r.active_count},
           {"total_count", r.total_count},
           {"detections", std::move(dets)}};
    if (embed_timing) {
        const auto& t = r.timing;
        json workers = json::array();
        for (const auto& w : t.per_worker) {
            workers.push_back({{"endpoint", w.endpoint}, {"busy_ms", w.busy_ms}});
        }
        j["timing"] = {{"io_ms", t.io_ms},
                       {"attention_wait_ms", t.attention_wait_ms},
                       {"client_processing_ms", t.client_processing_ms},
                       {"transfer_ms", t.transfer_ms},
                       {"final_eval_ms", t.final_eval_ms},
                       {"postprocess_ms", t.postprocess_ms},
                       {"per_worker", std::move(workers)}};
    }
    return j;
}

std::string results_to_string(const std::vector<FrameResult>& results, bool embed_timing) {
    std::string out;
    for (const auto& r : results) {
        out += to_json(r, embed_timing).dump();
        out += '\n';
    }
    return out;
}

void write_results(const fs::path& path, const std::vector<FrameResult>& results, bool embed_timing) {
    auto out = open_out(path, std::ios::binary);
    out << results_to_string(results, embed_timing);
    if (!out) {
        throw IoError("failed writing " + path.string());
    }
}

std::vector<FrameResult> read_results(const fs::path& path) {
    auto in = open_in(path);
    std::vector<FrameResult> out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        if (line.find_first_not_of(" \t\r") == std::string::npos) {
            continue;
        }
        try {
            const auto j = json::parse(line);
            FrameResult r;
            r.frame_id = j.at("frame_id").get<long>();
            r.active_count = j.value("active_count", 0);
            r.total_count = j.value("total_count", 0);
            for (const auto& d : j.at("detections")) {
                r.detections.push_back(Detection{
                    Rect(d.at("x").get<int>(), d.at("y").get<int>(), d.at("w").get<int>(), d.at("h").get<int>()),
                    d.at("class").get<std::string>(), d.at("confidence").get<double>(), -1});
            }
            if (j.contains("timing")) {
                const auto& t = j["timing"];
                r.timing.io_ms = t.value("io_ms", 0.0);
                r.timing.attention_wait_ms = t.value("attention_wait_ms", 0.0);
                r.timing.client_processing_ms = t.value("client_processing_ms", 0.0);
                r.timing.transfer_ms = t.value("transfer_ms", 0.0);
                r.timing.final_eval_ms = t.value("final_eval_ms", 0.0);
                r.timing.postprocess_ms = t.value("postprocess_ms", 0.0);
                for (const auto& w : t.value("per_worker", json::array())) {
                    r.timing.per_worker.push_back(
                        WorkerBusy{w.at("endpoint").get<std::string>(), w.at("busy_ms").get<double>()});
                }
            }
            out.push_back(std::move(r));
        } catch (const std::exception& e) {
            throw IoError(path.string() + ":" + std::to_string(lineno) + ": " + e.what());
        }
    }
    return out;
}

DetectionSet detections_by_frame(const std::vector<FrameResult>& results) {
    DetectionSet out;
    for (const auto& r : results) {
        auto& v = out[r.frame_id];
        v.insert(v.end(), r.detections.begin(), r.detections.end());
    }
    return out;
}

const std::vector<std::string>& timing_columns() {
    static const std::vector<std::string> columns{
        "frame_id",    "io_ms",         "attention_wait_ms", "client_processing_ms", "transfer_ms",
        "final_eval_ms", "postprocess_ms", "active_crops",    "total_crops",          "per_worker"};
    return columns;
}

void write_timing_csv(std::ostream& os, const std::vector<FrameResult>& results) {
    const auto& cols = timing_columns();
    for (std::size_t i = 0; i < cols.size(); ++i) {
        os << (i ? "," : "") << cols[i];
    }
    os << '\n' << std::fixed << std::setprecision(3);
    for (const auto& r : results) {
        const auto& t = r.timing;
        os << r.frame_id << ',' << t.io_ms << ',' << t.attention_wait_ms << ',' << t.client_processing_ms << ','
           << t.transfer_ms << ',' << t.final_eval_ms << ',' << t.postprocess_ms << ',' << r.active_count << ','
           << r.total_count << ',';
        for (std::size_t i = 0; i < t.per_worker.size(); ++i) {
            os << (i ? ";" : "") << t.per_worker[i].endpoint << '=' << t.per_worker[i].busy_ms;
        }
        os << '\n';
    }
}

void write_timing_csv(const fs::path& path, const std::vector<FrameResult>& results) {
    auto out = open_out(path, std::ios::binary);
    write_timing_csv(out, results);
}

void write_count_csv(std::ostream& os, const std::vector<CountRow>& rows) {
    os << "frame_id,detected,ground_truth\n";
    for (const auto& r : rows) {
        os << r.frame_id << ',' << r.detected << ',' << r.ground_truth << '\n';
    }
}

void write_count_csv(const fs::path& path, const std::vector<CountRow>& rows) {
    auto out = open_out(path, std::ios::binary);
    write_count_csv(out, rows);
}

json to_json(const APReport& report) {
    const auto opt = [](const std::optional<double>& v) { return v ? json(*v) : json(nullptr); };
    json j;
    for (const auto& [key, v] : report.overall) {
        j[key] = opt(v);
    }
    json per_class = json::object();
    for (const auto& [label, values] : report.per_class) {
        for (const auto& [key, v] : values) {
            per_class[label][key] = opt(v);
        }
    }
    j["per_class"] = std::move(per_class);
    j["ground_truth_count"] = report.ground_truth_count;
    j["detection_count"] = report.detection_count;
    return j;
}

RunMode parse_run_mode(const std::string& text) {
    if (text == "pipeline") {
        return RunMode::pipeline;
    }
    if (text == "downscale") {
        return RunMode::downscale;
    }
    if (text == "allcrops") {
        return RunMode::allcrops;
    }
    throw ConfigError("unknown mode '" + text + "' (pipeline|downscale|allcrops)");
}

std::string to_string(RunMode mode) {
    switch (mode) {
        case RunMode::pipeline:
            return "pipeline";
        case RunMode::downscale:
            return "downscale";
        case RunMode::allcrops:
            return "allcrops";
    }
    return "pipeline";
}

namespace {

std::string trim(std::string s) {
    const auto b = s.find_first_not_of(" \t\r\n");
    if (b == std::string::npos) {
        return {};
    }
    const auto e = s.find_last_not_of(" \t\r\n");
    return s.substr(b, e - b + 1);
}

int to_int(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const int n = std::stoi(v, &used);
        if (used == v.size()) {
            return n;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected an integer, got '" + v + "'");
}

double to_double(const std::string& key, const std::string& v) {
    try {
        std::size_t used = 0;
        const double d = std::stod(v, &used);
        if (used == v.size()) {
            return d;
        }
    } catch (const std::exception&) {
    }
    throw ConfigError(key + ": expected a number, got '" + v + "'");
}

bool to_bool(const std::string& key, const std::string& v) {
    if (v == "true" || v == "1" || v == "yes" || v == "on") {
        return true;
    }
    if (v == "false" || v == "0" || v == "no" || v == "off") {
        return false;
    }
    throw ConfigError(key + ": expected true/false, got '" + v + "'");
}

std::vector<std::string> split_list(const std::string& v) {
    std::vector<std::string> out;
    std::stringstream ss(v);
    std::string item;
    while (std::getline(ss, item, ',')) {
        item = trim(item);
        if (!item.empty()) {
            out.push_back(item);
        }
    }
    return out;
}

std::vector<Endpoint> to_endpoints(const std::string& v) {
    std::vector<Endpoint> out;
    for (const auto& item : split_list(v)) {
        out.push_back(Endpoint::parse(item));
    }
    return out;
}

MergeAxis to_axis(const std::string& key, const std::string& v) {
    if (v == "vertical") {
        return MergeAxis::vertical;
    }
    if (v == "horizontal") {
        return MergeAxis::horizontal;
    }
    if (v == "both") {
        return MergeAxis::both;
    }
    throw ConfigError(key + ": unknown merge axis '" + v + "'");
}

std::string axis_name(MergeAxis a) {
    switch (a) {
        case MergeAxis::vertical:
            return "vertical";
        case MergeAxis::horizontal:
            return "horizontal";
        case MergeAxis::both:
            return "both";
    }
    return "vertical";
}

fs::path resolve(const fs::path& base, const std::string& v) {
    fs::path p(v);
    return (p.is_relative() && !base.empty()) ? base / p : p;
}

}  // namespace

KeyValues parse_key_values(std::istream& in) {
    KeyValues out;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) {
            line.erase(hash);
        }
        line = trim(line);
        if (line.empty()) {
            continue;
        }
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
        }
        out.emplace_back(trim(line.substr(0, eq)), trim(line.substr(eq + 1)));
    }
    return out;
}

void apply_setting(RunConfig& c, const std::string& key, const std::string& value, const fs::path& base_dir) {
    auto& s = c.settings;
    if (key == "preset") {
        const auto p = settings_from_preset(value);
        s.attention = p.attention;
        s.final = p.final;
    } else if (key == "attention_rows") {
        s.attention.rows = to_int(key, value);
    } else if (key == "final_rows") {
        s.final.rows = to_int(key, value);
    } else if (key == "attention_overlap") {
        s.attention.overlap_px = to_int(key, value);
    } else if (key == "final_overlap") {
        s.final.overlap_px = to_int(key, value);
    } else if (key == "overlap") {
        s.attention.overlap_px = s.final.overlap_px = to_int(key, value);
    } else if (key == "attention_margin") {
        s.attention_margin_px = to_int(key, value);
    } else if (key == "temporal_window") {
        s.temporal_window = to_int(key, value);
    } else if (key == "min_confidence") {
        s.min_confidence = to_double(key, value);
    } else if (key == "nms_iou") {
        s.merge.nms_iou = to_double(key, value);
    } else if (key == "vertical_gap") {
        s.merge.vertical_gap_px = to_int(key, value);
    } else if (key == "horizontal_tolerance") {
        s.merge.horizontal_alignment_tolerance_px = to_int(key, value);
    } else if (key == "merge_classes") {
        s.merge.mergeable_classes.clear();
        for (const auto& item : split_list(value)) {
            const auto colon = item.find(':');
            if (colon == std::string::npos) {
                throw ConfigError(key + ": expected class:axis, got '" + item + "'");
            }
            s.merge.mergeable_classes[trim(item.substr(0, colon))] = to_axis(key, trim(item.substr(colon + 1)));
        }
    } else if (key == "nms_per_crop") {
        s.merge.nms_per_crop = to_bool(key, value);
    } else if (key == "merge_before_nms") {
        s.merge.merge_before_nms = to_bool(key, value);
    } else if (key == "detector") {
        if (value == "oracle") {
            c.detector = DetectorKind::oracle;
        } else if (value == "remote") {
            c.detector = DetectorKind::remote;
        } else {
            throw ConfigError("detector: expected oracle or remote, got '" + value + "'");
        }
    } else if (key == "visibility") {
        c.oracle.visibility_threshold = to_double(key, value);
    } else if (key == "min_tile_px") {
        c.oracle.min_tile_px = to_double(key, value);
    } else if (key == "mode") {
        c.mode = parse_run_mode(value);
    } else if (key == "frames") {
        c.frames = resolve(base_dir, value);
    } else if (key == "gt") {
        c.ground_truth = resolve(base_dir, value);
    } else if (key == "results") {
        c.results = resolve(base_dir, value);
    } else if (key == "timing") {
        c.timing = resolve(base_dir, value);
    } else if (key == "embed_timing") {
        c.embed_timing = to_bool(key, value);
    } else if (key == "attention_workers") {
        c.cluster.attention_workers = to_endpoints(value);
    } else if (key == "final_workers") {
        c.cluster.final_workers = to_endpoints(value);
    } else if (key == "timeout_ms") {
        c.cluster.request_timeout = std::chrono::milliseconds(to_int(key, value));
    } else {
        throw ConfigError("unknown setting '" + key + "'");
    }
}

RunConfig load_run_config(const fs::path& path) {
    std::ifstream in(path);
    if (!in) {
        throw ConfigError("cannot read config " + path.string());
    }
    KeyValues kv;
    try {
        kv = parse_key_values(in);
    } catch (const ConfigError& e) {
        throw ConfigError(path.string() + ": " + e.what());
    }
    RunConfig c;
    const auto base = path.parent_path();
    std::stable_partition(kv.begin(), kv.end(), [](const auto& p) { return p.first == "preset"; });
    for (const auto& [k, v] : kv) {
        try {
            apply_setting(c, k, v, base);
        } catch (const ConfigError& e) {
            throw ConfigError(path.string() + ": " + e.what());
        }
    }
    return c;
}

void check_paths(const RunConfig& c) {
    std::error_code ec;
    if (c.frames.empty() || !fs::is_directory(c.frames, ec)) {
        throw ConfigError("frames directory '" + c.frames.string() + "' does not exist");
    }
    if (c.detector == DetectorKind::oracle && (c.ground_truth.empty() || !fs::is_regular_file(c.ground_truth, ec))) {
        throw ConfigError("ground truth '" + c.ground_truth.string() + "' does not exist (needed by the oracle)");
    }
    for (const auto& out : {c.results, c.timing}) {
        const auto dir = out.parent_path();
        if (!dir.empty() && !fs::is_directory(dir, ec)) {
            throw ConfigError("output directory '" + dir.string() + "' does not exist");
        }
    }
    if (c.detector == DetectorKind::remote) {
        validate(c.cluster);
    }
}

void write_run_config(std::ostream& os, const RunConfig& c) {
    const auto& s = c.settings;
    const auto join = [](const std::vector<Endpoint>& eps) {
        std::string out;
        for (std::size_t i = 0; i < eps.size(); ++i) {
            out += (i ? ", " : "") + eps[i].str();
        }
        return out;
    };
    os << "attention_rows = " << s.attention.rows << '\n'
       << "attention_overlap = " << s.attention.overlap_px << '\n'
       << "final_rows = " << s.final.rows << '\n'
       << "final_overlap = " << s.final.overlap_px << '\n'
       << "attention_margin = " << s.attention_margin_px << '\n'
       << "temporal_window = " << s.temporal_window << '\n'
       << "min_confidence = " << s.min_confidence << '\n'
       << "nms_iou = " << s.merge.nms_iou << '\n'
       << "vertical_gap = " << s.merge.vertical_gap_px << '\n'
       << "horizontal_tolerance = " << s.merge.horizontal_alignment_tolerance_px << '\n';
    os << "merge_classes = ";
    bool first = true;
    for (const auto& [label, axis] : s.merge.mergeable_classes) {
        os << (first ? "" : ", ") << label << ':' << axis_name(axis);
        first = false;
    }
    os << '\n'
       << "nms_per_crop = " << (s.merge.nms_per_crop ? "true" : "false") << '\n'
       << "merge_before_nms = " << (s.merge.merge_before_nms ? "true" : "false") << '\n'
       << "detector = " << (c.detector == DetectorKind::oracle ? "oracle" : "remote") << '\n'
       << "visibility = " << c.oracle.visibility_threshold << '\n'
       << "min_tile_px = " << c.oracle.min_tile_px << '\n'
       << "mode = " << to_string(c.mode) << '\n'
       << "frames = " << c.frames.string() << '\n'
       << "gt = " << c.ground_truth.string() << '\n'
       << "results = " << c.results.string() << '\n'
       << "timing = " << c.timing.string() << '\n'
       << "embed_timing = " << (c.embed_timing ? "true" : "false") << '\n'
       << "attention_workers = " << join(c.cluster.attention_workers) << '\n'
       << "final_workers = " << join(c.cluster.final_workers) << '\n'
       << "timeout_ms = " << c.cluster.request_timeout.count() << '\n';
}

}  // namespace attnpipe
