#include <doctest.h>

#include <random>
#include <stdexcept>

#include "attnpipe/detector.hpp"
#include "attnpipe/raster.hpp"

using namespace attnpipe;

namespace {

CropSpec crop_at(int x, int y, int side, int frame_w = 4000, int frame_h = 4000) {
    CropSpec c;
    c.global_rect = Rect(x, y, side, side);
    c.scale = side / 608.0;
    c.frame_w = frame_w;
    c.frame_h = frame_h;
    return c;
}

// Fraction of obj's lattice cells that fall inside crop.
double lattice_fraction(const Rect& obj, const Rect& crop) {
    long in = 0;
    for (int y = obj.y(); y < obj.bottom(); ++y) {
        for (int x = obj.x(); x < obj.right(); ++x) {
            in += crop.contains(x, y);
        }
    }
    return static_cast<double>(in) / static_cast<double>(obj.area());
}

GroundTruthObject person(const Rect& r, long id = 0) { return GroundTruthObject{0, r, "person", id}; }

Tile blank_tile(const CropSpec& c, int side = 608) { return Tile{0, c, Raster(side, side)}; }

}  // namespace

TEST_CASE("oracle on an empty tile returns nothing") {
    OracleDetector det({});
    CHECK(det.detect(blank_tile(crop_at(0, 0, 608))).empty());
}

TEST_CASE("fully contained object comes back at full confidence") {
    const auto c = crop_at(0, 0, 1216);
    const std::vector gt{person(Rect(100, 200, 60, 160))};
    const auto out = mock_detect(c, gt);
    REQUIRE(out.size() == 1);
    CHECK(out[0].confidence == 1.0);
    CHECK(out[0].rect == BoxF{50, 100, 30, 80});
}

TEST_CASE("visibility threshold") {
    const auto c = crop_at(0, 0, 608);
    // 20% inside
    CHECK(mock_detect(c, std::vector{person(Rect(598, 0, 50, 100))}).empty());
    // 60/40 straddle over two abutting crops: both emit
    const auto left = crop_at(0, 0, 608);
    const auto right = crop_at(608, 0, 608);
    const Rect obj(578, 100, 50, 100);
    const auto a = mock_detect(left, std::vector{person(obj)});
    const auto b = mock_detect(right, std::vector{person(obj)});
    REQUIRE(a.size() == 1);
    REQUIRE(b.size() == 1);
    CHECK(a[0].confidence == doctest::Approx(lattice_fraction(obj, left.global_rect)));
    CHECK(b[0].confidence == doctest::Approx(lattice_fraction(obj, right.global_rect)));
    CHECK(a[0].confidence == doctest::Approx(0.6));
    CHECK(b[0].confidence == doctest::Approx(0.4));
}

TEST_CASE("oracle completeness against lattice fractions") {
    std::mt19937 rng(17);
    std::uniform_int_distribution<int> pos(-100, 1300);
    std::uniform_int_distribution<int> size(10, 200);
    const auto c = crop_at(200, 150, 900);
    for (int trial = 0; trial < 200; ++trial) {
        std::vector<GroundTruthObject> gt;
        for (int i = 0; i < 6; ++i) {
            gt.push_back(person(Rect(pos(rng), pos(rng), size(rng), size(rng)), i));
        }
        const OracleOptions opt{0.3, 0.0};
        const auto out = mock_detect(c, gt, opt);
        std::size_t expected = 0;
        for (const auto& o : gt) {
            const double f = lattice_fraction(o.rect, c.global_rect);
            if (f >= 0.3) {
                ++expected;
                const bool found = std::any_of(out.begin(), out.end(), [&](const CropDetection& d) {
                    return std::abs(d.confidence - f) < 1e-12 && d.rect == to_local(o.rect, c);
                });
                CHECK(found);
            }
        }
        CHECK(out.size() == expected);
        CHECK(out == mock_detect(c, gt, opt));
        for (std::size_t i = 0; i < out.size(); ++i) {
            CHECK(out[i].rect.x >= 0.0);
            CHECK(out[i].rect.y >= 0.0);
            CHECK(out[i].rect.right() <= 608.0);
            CHECK(out[i].rect.bottom() <= 608.0);
            if (i > 0) {
                CHECK(out[i - 1].confidence >= out[i].confidence);
            }
        }
    }
}

TEST_CASE("small objects on a downscaled tile are missed") {
    const auto c = crop_at(0, 0, 3840);  // scale 6.3
    CHECK(mock_detect(c, std::vector{person(Rect(100, 100, 40, 100))}).empty());
    CHECK(mock_detect(c, std::vector{person(Rect(100, 100, 60, 100))}).size() == 1);
}

TEST_CASE("wrong tile size is rejected") {
    OracleDetector det({});
    CHECK_THROWS_AS(det.detect(blank_tile(crop_at(0, 0, 608), 300)), std::invalid_argument);
    CHECK(det.profile().input_side == 608);
}

TEST_CASE("stochastic oracle is repeatable and drops a fraction") {
    GroundTruthSet gt;
    for (int i = 0; i < 200; ++i) {
        gt[0].push_back(person(Rect(10 + (i % 20) * 25, 10 + (i / 20) * 50, 20, 40), i));
    }
    StochasticOracleDetector a(gt, 0.5, 42);
    StochasticOracleDetector b(gt, 0.5, 42);
    StochasticOracleDetector none(gt, 0.0, 42);
    const auto tile = blank_tile(crop_at(0, 0, 608));
    const auto ra = a.detect(tile);
    CHECK(ra == b.detect(tile));
    CHECK(none.detect(tile).size() == 200);
    CHECK(ra.size() > 50);
    CHECK(ra.size() < 150);
    CHECK_THROWS(StochasticOracleDetector(gt, 1.5, 1));
}

TEST_CASE("tile cutting samples nearest pixel centres") {
    Raster frame(4, 2);
    for (int y = 0; y < 2; ++y) {
        for (int x = 0; x < 4; ++x) {
            frame.pixel(x, y)[0] = static_cast<std::uint8_t>(10 * x + y);
        }
    }
    const auto t = cut_tile(frame, Rect(0, 0, 4, 4), 8);
    CHECK(t.width == 8);
    CHECK(t.pixel(0, 0)[0] == 0);
    CHECK(t.pixel(7, 0)[0] == 30);
    CHECK(t.pixel(2, 2)[0] == 11);
    CHECK(t.pixel(0, 7)[0] == 0);  // outside the frame: black
    CHECK(t.pixel(0, 7)[1] == 0);
}
