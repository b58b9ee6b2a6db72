#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <string>
#include <vector>

#include <sys/wait.h>

#include "attnpipe/detector.hpp"
#include "attnpipe/pipeline.hpp"
#include "attnpipe/synthetic.hpp"

namespace testsupport {

namespace fs = std::filesystem;

/// A rendered synthetic sequence held in memory.
struct Scene {
    attnpipe::SceneSpec spec;
    std::vector<attnpipe::GroundTruthObject> gt;
    attnpipe::GroundTruthSet by_frame;

    explicit Scene(attnpipe::SceneSpec s)
        : spec(std::move(s)), gt(attnpipe::scene_ground_truth(spec)), by_frame(attnpipe::index_by_frame(gt)) {}

    std::span<const attnpipe::GroundTruthObject> objects(long frame) const {
        const auto it = by_frame.find(frame);
        if (it == by_frame.end()) {
            return {};
        }
        return it->second;
    }
    attnpipe::Raster frame(long f) const { return attnpipe::render_frame(spec, objects(f)); }
};

inline attnpipe::SceneSpec random_scene(std::uint64_t seed, int count, int min_w, int max_w, int min_h, int max_h,
                                        int frames = 1, int width = 3840, int height = 2160) {
    attnpipe::SceneSpec s;
    s.width = width;
    s.height = height;
    s.frames = frames;
    s.seed = seed;
    s.random.count = count;
    s.random.min_w = min_w;
    s.random.max_w = max_w;
    s.random.min_h = min_h;
    s.random.max_h = max_h;
    return s;
}

/// Fresh empty directory under the system temp dir.
inline fs::path temp_dir(const std::string& tag) {
    static std::mt19937_64 rng(std::random_device{}());
    auto p = fs::temp_directory_path() / ("attnpipe-" + tag + "-" + std::to_string(rng()));
    fs::remove_all(p);
    fs::create_directories(p);
    return p;
}

inline std::string slurp(const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

inline void spit(const fs::path& p, const std::string& text) {
    std::ofstream out(p, std::ios::binary);
    out << text;
}

/// Exit status of a shell command.
inline int sh(const std::string& cmd) {
    const int rc = std::system(cmd.c_str());
    if (rc == -1) {
        return -1;
    }
    return WIFEXITED(rc) ? WEXITSTATUS(rc) : 128 + WTERMSIG(rc);
}

inline std::string quote(const fs::path& p) { return "'" + p.string() + "'"; }

}  // namespace testsupport
