#include <doctest.h>

#include <random>
#include <stdexcept>
#include <vector>

#include "attnpipe/geometry.hpp"

using namespace attnpipe;

namespace {

// Counts unit lattice cells covered by both / either rect.
double lattice_iou(const Rect& a, const Rect& b) {
    const int x0 = std::min(a.x(), b.x());
    const int y0 = std::min(a.y(), b.y());
    const int x1 = std::max(a.right(), b.right());
    const int y1 = std::max(a.bottom(), b.bottom());
    long inter = 0;
    long uni = 0;
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            const bool in_a = a.contains(x, y);
            const bool in_b = b.contains(x, y);
            inter += in_a && in_b;
            uni += in_a || in_b;
        }
    }
    return uni == 0 ? 0.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

bool covered(const GridSpec& g, int px, int py) {
    for (const auto& c : g.crops) {
        if (c.global_rect.contains(px, py)) {
            return true;
        }
    }
    return false;
}

// Every frame pixel covered, checked on column / row boundaries of all crops
// plus the frame edges, which is enough for unions of rects.
bool covers_frame(const GridSpec& g, int drop_col = -1) {
    std::vector<int> xs{0, g.frame_w - 1};
    std::vector<int> ys{0, g.frame_h - 1};
    for (const auto& c : g.crops) {
        for (int d : {-1, 0}) {
            xs.push_back(c.global_rect.x() + d);
            xs.push_back(c.global_rect.right() + d);
            ys.push_back(c.global_rect.y() + d);
            ys.push_back(c.global_rect.bottom() + d);
        }
    }
    GridSpec h = g;
    if (drop_col >= 0) {
        std::erase_if(h.crops, [&](const CropSpec& c) { return c.col == drop_col; });
    }
    for (int x : xs) {
        for (int y : ys) {
            if (x < 0 || y < 0 || x >= g.frame_w || y >= g.frame_h) {
                continue;
            }
            if (!covered(h, x, y)) {
                return false;
            }
        }
    }
    return true;
}

}  // namespace

TEST_CASE("rect rejects non-positive sizes") {
    CHECK_THROWS_AS(Rect(0, 0, 0, 5), std::invalid_argument);
    CHECK_THROWS_AS(Rect(0, 0, 5, -1), std::invalid_argument);
    CHECK(Rect::from_edges(2, 3, 7, 9) == Rect(2, 3, 5, 6));
}

TEST_CASE("iou examples") {
    CHECK(iou(Rect(3, 4, 10, 12), Rect(3, 4, 10, 12)) == 1.0);
    CHECK(iou(Rect(0, 0, 5, 5), Rect(10, 10, 5, 5)) == 0.0);
    CHECK(iou(Rect(0, 0, 2, 2), Rect(1, 1, 2, 2)) == doctest::Approx(lattice_iou(Rect(0, 0, 2, 2), Rect(1, 1, 2, 2))));
    CHECK(iou(Rect(0, 0, 2, 2), Rect(1, 1, 2, 2)) == doctest::Approx(1.0 / 7.0));
}

TEST_CASE("iou matches lattice counting") {
    std::mt19937 rng(11);
    std::uniform_int_distribution<int> pos(0, 30);
    std::uniform_int_distribution<int> size(1, 20);
    for (int i = 0; i < 2000; ++i) {
        const Rect a(pos(rng), pos(rng), size(rng), size(rng));
        const Rect b(pos(rng), pos(rng), size(rng), size(rng));
        const double v = iou(a, b);
        CHECK(v == doctest::Approx(lattice_iou(a, b)).epsilon(1e-12));
        CHECK(v == iou(b, a));
        CHECK(v >= 0.0);
        CHECK(v <= 1.0);
        CHECK(iou(a, a) == 1.0);
        CHECK(intersects(a, b) == (lattice_iou(a, b) > 0.0));
    }
}

TEST_CASE("intersects examples") {
    CHECK_FALSE(intersects(Rect(0, 0, 5, 5), Rect(5, 0, 5, 5)));
    CHECK(intersects(Rect(0, 0, 10, 10), Rect(2, 2, 3, 3)));
    CHECK(intersects(Rect(0, 0, 5, 5), Rect(4, 4, 5, 5)));
}

TEST_CASE("crop side examples") {
    CHECK(crop_side_px(2160, {2, 20}) == 1098);
    CHECK(crop_side_px(2160, {6, 20}) == 370);
    CHECK(crop_side_px(4320, {3, 20}) == 1472);
    CHECK(crop_side_px(608, {1, 20}) == 608);
}

TEST_CASE("crop side follows the rounded real formula") {
    for (int h : {1, 7, 480, 608, 1080, 2160, 4320}) {
        for (int rows = 1; rows <= 8; ++rows) {
            for (int o : {0, 20, 50, 300, 607}) {
                const double real = h * 608.0 / (608.0 * rows - o * (rows - 1.0));
                const int side = crop_side_px(h, {rows, o});
                CHECK(std::abs(side - real) <= 0.5 + 1e-9);
            }
        }
    }
}

TEST_CASE("published crop sides and grid shapes") {
    struct Cell {
        int w, h, rows, side, cols;
    };
    const Cell cells[] = {{3840, 2160, 1, 2160, 2}, {3840, 2160, 2, 1098, 4}, {3840, 2160, 3, 736, 6},
                          {3840, 2160, 4, 554, 8},  {3840, 2160, 6, 370, 11}, {7680, 4320, 1, 4320, 2},
                          {7680, 4320, 2, 2196, 4}, {7680, 4320, 3, 1472, 6}, {7680, 4320, 4, 1107, 8}};
    for (const auto& c : cells) {
        CAPTURE(c.h);
        CAPTURE(c.rows);
        const auto g = build_grid(c.w, c.h, {c.rows, 20});
        CHECK(std::abs(g.crop_side - c.side) <= 1);
        CHECK(g.rows == c.rows);
        CHECK(g.cols == c.cols);
    }
}

TEST_CASE("trivial grid") {
    const auto g = build_grid(608, 608, {1, 0});
    REQUIRE(g.crops.size() == 1);
    CHECK(g.crops[0].global_rect == Rect(0, 0, 608, 608));
    CHECK(g.crops[0].scale == 1.0);
}

TEST_CASE("grid coverage, minimality, squareness and bounds") {
    std::mt19937 rng(5);
    std::uniform_int_distribution<int> dim(16, 5000);
    std::uniform_int_distribution<int> rows(1, 7);
    std::uniform_int_distribution<int> overlap(0, 200);
    for (int i = 0; i < 300; ++i) {
        const int w = dim(rng);
        const int h = dim(rng);
        const CropSettings s{rows(rng), overlap(rng)};
        CAPTURE(w);
        CAPTURE(h);
        CAPTURE(s.rows);
        CAPTURE(s.overlap_px);
        const auto g = build_grid(w, h, s);
        REQUIRE(g.crops.size() == static_cast<std::size_t>(g.rows * g.cols));
        CHECK(covers_frame(g));
        if (g.cols > 1) {
            CHECK_FALSE(covers_frame(g, g.cols - 1));
        }
        for (const auto& c : g.crops) {
            CHECK(std::abs(c.global_rect.w() - c.global_rect.h()) <= 1);
            CHECK(c.global_rect.x() >= 0);
            CHECK(c.global_rect.y() >= 0);
            CHECK(&g.at(c.row, c.col) == &c);
            CHECK(c.scale == doctest::Approx(g.crop_side / 608.0));
        }
    }
}

TEST_CASE("to_local examples") {
    CropSpec c;
    c.global_rect = Rect(100, 100, 1216, 1216);
    c.scale = 2.0;
    c.frame_w = 4000;
    c.frame_h = 4000;
    CHECK(to_local(c.global_rect, c) == BoxF{0, 0, 608, 608});
    CHECK(to_local(Rect(100, 100, 608, 608), c) == BoxF{0, 0, 304, 304});
    CHECK(to_global(BoxF{0, 0, 608, 608}, c) == c.global_rect);
    CHECK_THROWS_AS(to_local(Rect(0, 0, 50, 50), c), std::invalid_argument);

    CropSpec o;
    o.global_rect = Rect(0, 0, 1216, 1216);
    o.scale = 2.0;
    o.frame_w = 2000;
    o.frame_h = 2000;
    CHECK(to_global(BoxF{10, 10, 20, 20}, o) == Rect(20, 20, 40, 40));
}

TEST_CASE("to_global after to_local is identity within a pixel") {
    std::mt19937 rng(3);
    const auto g = build_grid(3840, 2160, {4, 20});
    for (const auto& c : g.crops) {
        std::uniform_int_distribution<int> px(c.global_rect.x(), c.global_rect.right() - 2);
        std::uniform_int_distribution<int> py(c.global_rect.y(), c.global_rect.bottom() - 2);
        for (int i = 0; i < 50; ++i) {
            const int x = px(rng);
            const int y = py(rng);
            std::uniform_int_distribution<int> pw(1, c.global_rect.right() - x);
            std::uniform_int_distribution<int> ph(1, c.global_rect.bottom() - y);
            const Rect r(x, y, pw(rng), ph(rng));
            const Rect back = to_global(to_local(r, c), c);
            CHECK(std::abs(back.x() - r.x()) <= 1);
            CHECK(std::abs(back.y() - r.y()) <= 1);
            CHECK(std::abs(back.right() - r.right()) <= 1);
            CHECK(std::abs(back.bottom() - r.bottom()) <= 1);
        }
    }
}

TEST_CASE("dilate and clip stay inside the frame") {
    CHECK(dilate(Rect(5, 5, 10, 10), 20, 100, 100) == Rect(0, 0, 35, 35));
    CHECK(dilate(Rect(80, 80, 10, 10), 20, 100, 100) == Rect(60, 60, 40, 40));
    CHECK(clip_to_frame(Rect(-5, -5, 10, 10), 100, 100) == Rect(0, 0, 5, 5));
    CHECK_THROWS(clip_to_frame(Rect(200, 200, 10, 10), 100, 100));
}

TEST_CASE("invalid crop settings are rejected") {
    CHECK_THROWS_AS(validate(CropSettings{0, 20}), std::invalid_argument);
    CHECK_THROWS_AS(validate(CropSettings{1, 608}), std::invalid_argument);
    CHECK_THROWS_AS(validate(CropSettings{1, -1}), std::invalid_argument);
    CHECK_NOTHROW(validate(CropSettings{3, 607}));
}
