#include "attnpipe/synthetic.hpp"

#include <algorithm>

#include "attnpipe/error.hpp"
#include "attnpipe/frameio.hpp"

namespace attnpipe {

using nlohmann::json;

std::uint64_t SceneRng::next() {
    // splitmix64
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
}

int SceneRng::uniform(int lo, int hi) {
    if (hi <= lo) {
        return lo;
    }
    const auto span = static_cast<std::uint64_t>(hi - lo) + 1;
    return lo + static_cast<int>(next() % span);
}

void validate(const SceneSpec& spec) {
    if (spec.width < 1 || spec.height < 1) {
        throw ConfigError("scene: width and height must be >= 1");
    }
    if (spec.frames < 0) {
        throw ConfigError("scene: frames must be >= 0");
    }
    const auto& r = spec.random;
    if (r.count < 0) {
        throw ConfigError("scene: random.count must be >= 0");
    }
    if (r.count > 0 && (r.min_w < 1 || r.min_h < 1 || r.max_w < r.min_w || r.max_h < r.min_h ||
                        r.max_w > spec.width || r.max_h > spec.height)) {
        throw ConfigError("scene: random object size range does not fit the frame");
    }
}

SceneSpec scene_spec_from_json(const json& j) {
    SceneSpec s;
    try {
        s.width = j.value("width", s.width);
        s.height = j.value("height", s.height);
        s.frames = j.value("frames", s.frames);
        s.seed = j.value("seed", s.seed);
        if (j.contains("background")) {
            s.background = j.at("background").get<std::array<std::uint8_t, 3>>();
        }
        for (const auto& o : j.value("objects", json::array())) {
            SceneObject obj;
            obj.label = o.value("class", obj.label);
            obj.rect = Rect(o.at("x").get<int>(), o.at("y").get<int>(), o.at("w").get<int>(), o.at("h").get<int>());
            obj.dx = o.value("dx", 0);
            obj.dy = o.value("dy", 0);
            s.objects.push_back(obj);
        }
        if (j.contains("random")) {
            const auto& r = j.at("random");
            s.random.count = r.value("count", 0);
            s.random.label = r.value("class", s.random.label);
            s.random.min_w = r.value("min_w", s.random.min_w);
            s.random.max_w = r.value("max_w", s.random.max_w);
            s.random.min_h = r.value("min_h", s.random.min_h);
            s.random.max_h = r.value("max_h", s.random.max_h);
        }
    } catch (const json::exception& e) {
        throw ConfigError(std::string("scene spec: ") + e.what());
    } catch (const std::invalid_argument& e) {
        throw ConfigError(std::string("scene spec: ") + e.what());
    }
    validate(s);
    return s;
}

json to_json(const SceneSpec& s) {
    json objects = json::array();
    for (const auto& o : s.objects) {
        objects.push_back({{"class", o.label},
                           {"x", o.rect.x()},
                           {"y", o.rect.y()},
                           {"w", o.rect.w()},
                           {"h", o.rect.h()},
                           {"dx", o.dx},
                           {"dy", o.dy}});
    }
    return json{{"width", s.width},
                {"height", s.height},
                {"frames", s.frames},
                {"seed", s.seed},
                {"background", s.background},
                {"objects", std::move(objects)},
                {"random",
                 {{"count", s.random.count},
                  {"class", s.random.label},
                  {"min_w", s.random.min_w},
                  {"max_w", s.random.max_w},
                  {"min_h", s.random.min_h},
                  {"max_h", s.random.max_h}}}};
}

std::vector<GroundTruthObject> scene_ground_truth(const SceneSpec& spec) {
    validate(spec);
    std::vector<SceneObject> all = spec.objects;
    SceneRng rng(spec.seed);
    const auto& r = spec.random;
    for (int i = 0; i < r.count; ++i) {
        const int w = rng.uniform(r.min_w, r.max_w);
        const int h = rng.uniform(r.min_h, r.max_h);
        const int x = rng.uniform(0, spec.width - w);
        const int y = rng.uniform(0, spec.height - h);
        all.push_back(SceneObject{r.label, Rect(x, y, w, h), 0, 0});
    }

    std::vector<GroundTruthObject> out;
    for (int f = 0; f < spec.frames; ++f) {
        for (std::size_t id = 0; id < all.size(); ++id) {
            const auto& o = all[id];
            const Rect moved(o.rect.x() + o.dx * f, o.rect.y() + o.dy * f, o.rect.w(), o.rect.h());
            const Rect frame(0, 0, spec.width, spec.height);
            if (!intersects(moved, frame)) {
                continue;
            }
            out.push_back(GroundTruthObject{f, intersection(moved, frame), o.label, static_cast<long>(id)});
        }
    }
    return out;
}

std::array<std::uint8_t, 3> object_colour(long object_id, const std::array<std::uint8_t, 3>& background) {
    SceneRng rng(static_cast<std::uint64_t>(object_id) * 7919 + 17);
    for (;;) {
        std::array<std::uint8_t, 3> c{static_cast<std::uint8_t>(rng.uniform(64, 255)),
                                      static_cast<std::uint8_t>(rng.uniform(64, 255)),
                                      static_cast<std::uint8_t>(rng.uniform(64, 255))};
        if (c != background) {
            return c;
        }
    }
}

Raster render_frame(const SceneSpec& spec, std::span<const GroundTruthObject> frame_objects) {
    Raster r(spec.width, spec.height);
    r.fill(spec.background[0], spec.background[1], spec.background[2]);
    for (const auto& o : frame_objects) {
        const auto c = object_colour(o.object_id, spec.background);
        r.fill_rect(o.rect, c[0], c[1], c[2]);
    }
    return r;
}

void write_scene(const SceneSpec& spec, const std::filesystem::path& out) {
    std::error_code ec;
    std::filesystem::create_directories(out, ec);
    if (ec) {
        throw IoError("cannot create " + out.string() + ": " + ec.message());
    }
    const auto gt = scene_ground_truth(spec);
    const auto by_frame = index_by_frame(gt);
    for (int f = 0; f < spec.frames; ++f) {
        const auto it = by_frame.find(f);
        const std::span<const GroundTruthObject> objects =
            it == by_frame.end() ? std::span<const GroundTruthObject>{} : std::span<const GroundTruthObject>(it->second);
        write_ppm(out / frame_file_name(f), render_frame(spec, objects));
    }
    write_ground_truth(out / "gt.jsonl", gt);
}

}  // namespace attnpipe
