#include <doctest.h>

#include <random>

#include "attnpipe/error.hpp"
#include "attnpipe/pipeline.hpp"
#include "support.hpp"

using namespace attnpipe;
using testsupport::Scene;

namespace {

// Records how many tiles it was asked to evaluate.
class CountingEvaluator : public CropEvaluator {
public:
    explicit CountingEvaluator(const Detector& d) : inner_(d) {}
    std::vector<CropResult> evaluate(long frame_id, std::span<const Tile> tiles, StageTiming& timing) override {
        calls += 1;
        tiles_seen += tiles.size();
        return inner_.evaluate(frame_id, tiles, timing);
    }
    int calls = 0;
    std::size_t tiles_seen = 0;

private:
    LocalEvaluator inner_;
};

class FailingDetector : public Detector {
public:
    const DetectorProfile& profile() const override { return profile_; }

protected:
    std::vector<CropDetection> do_detect(const Tile&) const override { throw std::runtime_error("boom"); }

private:
    DetectorProfile profile_;
};

// Brute-force count of final cells touching any dilated box.
std::vector<int> brute_active(const GridSpec& g, const std::vector<Rect>& boxes, int margin) {
    std::vector<int> out;
    for (const auto& c : g.crops) {
        for (const auto& b : boxes) {
            const int x0 = std::max(0, b.x() - margin);
            const int y0 = std::max(0, b.y() - margin);
            const int x1 = std::min(g.frame_w, b.right() + margin);
            const int y1 = std::min(g.frame_h, b.bottom() + margin);
            if (std::max(x0, c.global_rect.x()) < std::min(x1, c.global_rect.right()) &&
                std::max(y0, c.global_rect.y()) < std::min(y1, c.global_rect.bottom())) {
                out.push_back(c.crop_id);
                break;
            }
        }
    }
    return out;
}

}  // namespace

TEST_CASE("presets") {
    for (const auto& name : preset_names()) {
        const auto s = settings_from_preset(name);
        CHECK(s.name() == name);
        CHECK_NOTHROW(validate(s));
    }
    const auto s = settings_from_preset("2 att, 6 fin, 20 over");
    CHECK(s.attention.rows == 2);
    CHECK(s.final.rows == 6);
    CHECK(s.final.overlap_px == 20);
    CHECK(s.attention.overlap_px == 20);
    CHECK_THROWS_AS(settings_from_preset("2 attention"), ConfigError);
    PipelineSettings bad;
    bad.attention.rows = 3;
    bad.final.rows = 2;
    CHECK_THROWS(validate(bad));
    bad = PipelineSettings{};
    bad.temporal_window = 0;
    CHECK_THROWS(validate(bad));
}

TEST_CASE("attention pass examples") {
    Scene empty(testsupport::random_scene(1, 0, 1, 1, 1, 1));
    OracleDetector det(empty.by_frame);
    CountingEvaluator ev(det);
    StageTiming t;
    const auto m = attention_pass(empty.frame(0), 0, PipelineSettings{}, ev, t);
    CHECK(m.boxes.empty());
    CHECK(ev.tiles_seen == 2);

    SceneSpec one = testsupport::random_scene(1, 0, 1, 1, 1, 1);
    one.objects.push_back(SceneObject{"person", Rect(1890, 1000, 60, 160), 0, 0});
    Scene s(one);
    OracleDetector d2(s.by_frame);
    LocalEvaluator e2(d2);
    const auto m2 = attention_pass(s.frame(0), 0, PipelineSettings{}, e2, t);
    REQUIRE_FALSE(m2.boxes.empty());
    CHECK(std::any_of(m2.boxes.begin(), m2.boxes.end(),
                      [&](const Rect& b) { return intersects(b, s.gt[0].rect); }));
}

TEST_CASE("temporal merge") {
    const AttentionModel a{1, {Rect(0, 0, 5, 5)}, {1}};
    const AttentionModel b{2, {Rect(10, 10, 5, 5)}, {2}};
    const AttentionModel c{3, {Rect(20, 20, 5, 5), Rect(0, 0, 5, 5)}, {3}};
    const std::vector h1{a};
    CHECK(merge_temporal(h1, 1) == a);
    const std::vector h2{a, b};
    const auto m = merge_temporal(h2, 2);
    CHECK(m.frame_id == 2);
    CHECK(m.boxes == std::vector{Rect(0, 0, 5, 5), Rect(10, 10, 5, 5)});
    CHECK(m.source_window == std::vector<long>{1, 2});
    const std::vector h3{a, b, c};
    CHECK(merge_temporal(h3, 10).boxes.size() == 3);
    CHECK(merge_temporal(h3, 1) == c);
    CHECK_THROWS(merge_temporal(std::span<const AttentionModel>{}, 1));

    AttentionHistory hist(2);
    hist.push(a);
    hist.push(b);
    hist.push(c);
    CHECK(hist.size() == 2);
    CHECK(hist.merged().source_window == std::vector<long>{2, 3});
}

TEST_CASE("active selection examples") {
    const auto g = build_grid(3840, 2160, {4, 20});
    CHECK(select_active(g, AttentionModel{}, 20).active_ids.empty());
    AttentionModel all{0, {Rect(0, 0, 3840, 2160)}, {0}};
    CHECK(select_active(g, all, 0).active_ids.size() == g.crops.size());

    const auto g0 = build_grid(2432, 1216, {2, 0});  // abutting 608 cells
    REQUIRE(g0.crop_side == 608);
    AttentionModel inner{0, {Rect(700, 100, 50, 50)}, {0}};
    const auto a = select_active(g0, inner, 0);
    CHECK(a.active_ids == brute_active(g0, inner.boxes, 0));
    CHECK(a.active_ids.size() == 1);
}

TEST_CASE("active selection matches brute force and grows with margin") {
    std::mt19937 rng(8);
    const auto g = build_grid(3840, 2160, {4, 20});
    std::uniform_int_distribution<int> px(0, 3800);
    std::uniform_int_distribution<int> py(0, 2100);
    std::uniform_int_distribution<int> sz(1, 300);
    for (int i = 0; i < 200; ++i) {
        AttentionModel m;
        for (int k = 0; k < 3; ++k) {
            const int x = px(rng);
            const int y = py(rng);
            m.boxes.push_back(Rect(x, y, std::min(sz(rng), 3840 - x), std::min(sz(rng), 2160 - y)));
        }
        std::vector<int> prev;
        for (int margin : {0, 5, 20, 100, 400}) {
            const auto a = select_active(g, m, margin);
            CHECK(a.active_ids == brute_active(g, m.boxes, margin));
            CHECK(std::includes(a.active_ids.begin(), a.active_ids.end(), prev.begin(), prev.end()));
            CHECK(a.active_ids.size() <= g.crops.size());
            prev = a.active_ids;
        }
    }
}

TEST_CASE("final pass examples") {
    SceneSpec spec = testsupport::random_scene(1, 0, 1, 1, 1, 1);
    spec.objects.push_back(SceneObject{"person", Rect(100, 100, 60, 160), 0, 0});
    spec.objects.push_back(SceneObject{"person", Rect(520, 300, 60, 160), 0, 0});
    Scene s(spec);
    OracleDetector det(s.by_frame);
    LocalEvaluator ev(det);
    const auto g = build_grid(3840, 2160, {4, 20});
    StageTiming t;
    CHECK(final_pass(s.frame(0), 0, ActiveSet{g, {}}, ev, 0.3, t).empty());

    const auto one = final_pass(s.frame(0), 0, ActiveSet{g, {0}}, ev, 0.3, t);
    REQUIRE(!one.empty());
    const auto& d = one.front();
    CHECK(d.confidence == 1.0);
    CHECK(std::abs(d.rect.x() - 100) <= 1);
    CHECK(std::abs(d.rect.bottom() - 260) <= 1);

    // second object straddles the border between cells 0 and 1
    REQUIRE(g.at(0, 1).global_rect.x() > 520);
    REQUIRE(g.at(0, 1).global_rect.x() < 580);
    const auto both = final_pass(s.frame(0), 0, ActiveSet{g, {0, 1}}, ev, 0.3, t);
    const auto n = std::count_if(both.begin(), both.end(), [](const Detection& x) { return x.rect.x() >= 500; });
    CHECK(n == 2);
}

TEST_CASE("run_frame on empty, dense and sparse scenes") {
    const auto settings = settings_from_preset("1 att, 4 fin, 20 over");
    {
        Scene s(testsupport::random_scene(1, 0, 1, 1, 1, 1));
        OracleDetector det(s.by_frame);
        LocalEvaluator ev(det);
        AttentionHistory h(settings.temporal_window);
        const auto r = run_frame(s.frame(0), 0, settings, ev, ev, h);
        CHECK(r.detections.empty());
        CHECK(r.active_count == 0);
        CHECK(r.total_count == 32);
    }
    {
        // one object per final cell
        SceneSpec spec = testsupport::random_scene(1, 0, 1, 1, 1, 1);
        const auto g = build_grid(3840, 2160, settings.final);
        for (const auto& c : g.crops) {
            spec.objects.push_back(
                SceneObject{"person", Rect(c.global_rect.x() + 200, c.global_rect.y() + 150, 50, 120), 0, 0});
        }
        Scene s(spec);
        OracleDetector det(s.by_frame);
        LocalEvaluator ev(det);
        AttentionHistory h(settings.temporal_window);
        const auto r = run_frame(s.frame(0), 0, settings, ev, ev, h);
        const auto all = run_allcrops_baseline(s.frame(0), 0, settings, ev);
        CHECK(r.active_count == r.total_count);
        CHECK(r.detections == all.detections);
        CHECK(all.active_count == all.total_count);
    }
    {
        SceneSpec spec = testsupport::random_scene(1, 0, 1, 1, 1, 1);
        spec.objects.push_back(SceneObject{"person", Rect(1000, 700, 60, 160), 0, 0});
        Scene s(spec);
        OracleDetector det(s.by_frame);
        CountingEvaluator att(det);
        CountingEvaluator fin(det);
        AttentionHistory h(settings.temporal_window);
        const auto r = run_frame(s.frame(0), 0, settings, att, fin, h);
        const auto g = build_grid(3840, 2160, settings.final);
        const auto expected = brute_active(g, {Rect(1000, 700, 60, 160)}, settings.attention_margin_px);
        CHECK(r.active_count == static_cast<int>(expected.size()));
        CHECK(r.active_count < r.total_count);
        CHECK(fin.tiles_seen == expected.size());
        CHECK(r.detections.size() == 1);
    }
}

TEST_CASE("pipeline equals all-crops on attention-visible scenes") {
    for (std::uint64_t seed = 1; seed <= 5; ++seed) {
        Scene s(testsupport::random_scene(seed, 12, 40, 200, 60, 300, 2));
        OracleDetector det(s.by_frame);
        LocalEvaluator ev(det);
        for (const auto& name : {"1 att, 2 fin, 20 over", "1 att, 3 fin, 50 over"}) {
            const auto settings = settings_from_preset(name);
            AttentionHistory h(settings.temporal_window);
            for (long f = 0; f < 2; ++f) {
                const auto frame = s.frame(f);
                const auto r = run_frame(frame, f, settings, ev, ev, h);
                const auto all = run_allcrops_baseline(frame, f, settings, ev);
                CHECK(r.detections == all.detections);
                CHECK(r.active_count <= r.total_count);
            }
        }
    }
}

TEST_CASE("window of one matches stateless evaluation") {
    SceneSpec spec = testsupport::random_scene(4, 6, 40, 120, 60, 200, 3);
    spec.objects.push_back(SceneObject{"person", Rect(200, 300, 60, 150), 300, 0});
    Scene s(spec);
    OracleDetector det(s.by_frame);
    LocalEvaluator ev(det);
    auto settings = settings_from_preset("1 att, 3 fin, 20 over");
    settings.temporal_window = 1;
    AttentionHistory h(1);
    for (long f = 0; f < 3; ++f) {
        const auto frame = s.frame(f);
        const auto r = run_frame(frame, f, settings, ev, ev, h);
        AttentionHistory fresh(1);
        const auto stateless = run_frame(frame, f, settings, ev, ev, fresh);
        CHECK(r.detections == stateless.detections);
        CHECK(r.active_count == stateless.active_count);
        const auto again = run_frame(frame, f, settings, ev, ev, fresh);
        CHECK(again.detections == r.detections);
    }
}

TEST_CASE("downscale baseline") {
    SceneSpec spec = testsupport::random_scene(1, 0, 1, 1, 1, 1, 1, 608, 608);
    spec.objects.push_back(SceneObject{"person", Rect(10, 20, 100, 200), 0, 0});
    Scene s(spec);
    OracleDetector det(s.by_frame);
    LocalEvaluator ev(det);
    const auto r = run_downscale_baseline(s.frame(0), 0, PipelineSettings{}, ev);
    const auto direct = det.detect(Tile{0, downscale_crop(608, 608), s.frame(0)});
    REQUIRE(direct.size() == 1);
    REQUIRE(r.detections.size() == 1);
    CHECK(r.detections[0].rect == Rect(10, 20, 100, 200));
    CHECK(r.active_count == 1);

    SceneSpec big = testsupport::random_scene(1, 0, 1, 1, 1, 1);
    big.objects.push_back(SceneObject{"person", Rect(3000, 1500, 30, 40), 0, 0});
    big.objects.push_back(SceneObject{"person", Rect(0, 0, 3840, 2160), 0, 0});
    Scene b(big);
    OracleDetector bd(b.by_frame);
    LocalEvaluator be(bd);
    const auto br = run_downscale_baseline(b.frame(0), 0, PipelineSettings{}, be);
    REQUIRE(br.detections.size() == 1);
    CHECK(br.detections[0].rect == Rect(0, 0, 3840, 2160));
}

TEST_CASE("stage failures carry stage name and frame") {
    FailingDetector bad;
    LocalEvaluator ev(bad);
    Scene s(testsupport::random_scene(1, 0, 1, 1, 1, 1));
    AttentionHistory h(2);
    try {
        run_frame(s.frame(0), 7, PipelineSettings{}, ev, ev, h);
        FAIL("expected a StageError");
    } catch (const StageError& e) {
        CHECK(e.stage() == "attention");
        CHECK(e.frame_id() == 7);
    }
}
