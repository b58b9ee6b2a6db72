#include "attnpipe/geometry.hpp"

#include <algorithm>
#include <ostream>
#include <stdexcept>
#include <string>

namespace attnpipe {

Rect::Rect(int x, int y, int w, int h) : x_(x), y_(y), w_(w), h_(h) {
    if (w <= 0 || h <= 0) {
        throw std::invalid_argument("Rect requires positive size, got " + std::to_string(w) + "x" +
                                    std::to_string(h));
    }
}

Rect Rect::from_edges(int x0, int y0, int x1, int y1) { return Rect(x0, y0, x1 - x0, y1 - y0); }

std::ostream& operator<<(std::ostream& os, const Rect& r) {
    return os << "Rect(" << r.x() << ", " << r.y() << ", " << r.w() << ", " << r.h() << ")";
}

std::ostream& operator<<(std::ostream& os, const BoxF& b) {
    return os << "BoxF(" << b.x << ", " << b.y << ", " << b.w << ", " << b.h << ")";
}

void validate(const CropSettings& settings) {
    if (settings.rows < 1) {
        throw std::invalid_argument("crop settings: rows must be >= 1");
    }
    if (settings.overlap_px < 0 || settings.overlap_px >= kModelSide) {
        throw std::invalid_argument("crop settings: overlap must be in [0, 607]");
    }
}

bool intersects(const Rect& a, const Rect& b) noexcept { return intersection_area(a, b) > 0; }

std::int64_t intersection_area(const Rect& a, const Rect& b) noexcept {
    const std::int64_t w = std::min(a.right(), b.right()) - std::max(a.x(), b.x());
    const std::int64_t h = std::min(a.bottom(), b.bottom()) - std::max(a.y(), b.y());
    return (w > 0 && h > 0) ? w * h : 0;
}

Rect intersection(const Rect& a, const Rect& b) {
    return Rect::from_edges(std::max(a.x(), b.x()), std::max(a.y(), b.y()), std::min(a.right(), b.right()),
                            std::min(a.bottom(), b.bottom()));
}

Rect union_rect(const Rect& a, const Rect& b) {
    return Rect::from_edges(std::min(a.x(), b.x()), std::min(a.y(), b.y()), std::max(a.right(), b.right()),
                            std::max(a.bottom(), b.bottom()));
}

double iou(const Rect& a, const Rect& b) noexcept {
    const auto inter = intersection_area(a, b);
    if (inter == 0) {
        return 0.0;
    }
    return static_cast<double>(inter) / static_cast<double>(a.area() + b.area() - inter);
}

Rect dilate(const Rect& r, int margin, int frame_w, int frame_h) {
    return clip_to_frame(Rect::from_edges(r.x() - margin, r.y() - margin, r.right() + margin, r.bottom() + margin),
                         frame_w, frame_h);
}

Rect clip_to_frame(const Rect& r, int frame_w, int frame_h) {
    const int x0 = std::max(r.x(), 0);
    const int y0 = std::max(r.y(), 0);
    const int x1 = std::min(r.right(), frame_w);
    const int y1 = std::min(r.bottom(), frame_h);
    if (x1 <= x0 || y1 <= y0) {
        throw std::invalid_argument("rect lies outside the frame");
    }
    return Rect::from_edges(x0, y0, x1, y1);
}

int crop_side_px(int frame_h, const CropSettings& settings) {
    validate(settings);
    if (frame_h < 1) {
        throw std::invalid_argument("frame height must be >= 1");
    }
    // round(frame_h * 608 / (608 * rows - overlap * (rows - 1))), half up, in exact integers
    const std::int64_t num = std::int64_t{frame_h} * kModelSide;
    const std::int64_t den =
        std::int64_t{kModelSide} * settings.rows - std::int64_t{settings.overlap_px} * (settings.rows - 1);
    return static_cast<int>((2 * num + den) / (2 * den));
}

namespace {

// Origins of `count` cells of `side` px along an axis of `extent` px. Cells
// advance by the overlap-reduced stride (floored); the last one is pushed
// against the far edge.
std::vector<int> axis_origins(int count, int extent, int side, int overlap) {
    std::vector<int> origins(static_cast<std::size_t>(count));
    const int far = std::max(0, extent - side);
    for (int i = 0; i < count; ++i) {
        const std::int64_t stride_num = std::int64_t{i} * (kModelSide - overlap) * side;
        origins[static_cast<std::size_t>(i)] = std::min(static_cast<int>(stride_num / kModelSide), far);
    }
    origins.back() = far;
    // A side rounded down can leave a sliver before the pushed-back last
    // cell; spread the cells evenly instead.
    for (std::size_t i = 1; i < origins.size(); ++i) {
        if (origins[i] > origins[i - 1] + side) {
            for (int k = 0; k < count; ++k) {
                origins[static_cast<std::size_t>(k)] =
                    static_cast<int>(std::int64_t{k} * far / std::max(1, count - 1));
            }
            break;
        }
    }
    return origins;
}

}  // namespace

GridSpec build_grid(int frame_w, int frame_h, const CropSettings& settings) {
    if (frame_w < 1 || frame_h < 1) {
        throw std::invalid_argument("frame dimensions must be >= 1");
    }
    GridSpec grid;
    grid.frame_w = frame_w;
    grid.frame_h = frame_h;
    grid.settings = settings;
    grid.crop_side = crop_side_px(frame_h, settings);
    // more rows only when the rounded side cannot span the height otherwise
    grid.rows = std::max(settings.rows, (frame_h + grid.crop_side - 1) / grid.crop_side);

    // smallest n with n*608 - (n-1)*overlap >= frame_w * 608 / side
    const std::int64_t side = grid.crop_side;
    const std::int64_t target = std::int64_t{frame_w} * kModelSide;
    int cols = 1;
    while ((std::int64_t{cols} * (kModelSide - settings.overlap_px) + settings.overlap_px) * side < target) {
        ++cols;
    }
    grid.cols = cols;

    const auto xs = axis_origins(grid.cols, frame_w, grid.crop_side, settings.overlap_px);
    const auto ys = axis_origins(grid.rows, frame_h, grid.crop_side, settings.overlap_px);
    const double scale = static_cast<double>(grid.crop_side) / kModelSide;
    grid.crops.reserve(static_cast<std::size_t>(grid.rows * grid.cols));
    for (int r = 0; r < grid.rows; ++r) {
        for (int c = 0; c < grid.cols; ++c) {
            CropSpec crop;
            crop.crop_id = r * grid.cols + c;
            crop.row = r;
            crop.col = c;
            crop.global_rect = Rect(xs[static_cast<std::size_t>(c)], ys[static_cast<std::size_t>(r)],
                                    grid.crop_side, grid.crop_side);
            crop.scale = scale;
            crop.frame_w = frame_w;
            crop.frame_h = frame_h;
            grid.crops.push_back(crop);
        }
    }
    return grid;
}

BoxF to_local(const Rect& r, const CropSpec& crop) {
    if (!intersects(r, crop.global_rect)) {
        throw std::invalid_argument("to_local: rect does not intersect the crop");
    }
    const Rect vis = intersection(r, crop.global_rect);
    const auto local = [&](int v, int origin) {
        return std::clamp(static_cast<double>(v - origin) / crop.scale, 0.0, static_cast<double>(kModelSide));
    };
    const double x0 = local(vis.x(), crop.global_rect.x());
    const double y0 = local(vis.y(), crop.global_rect.y());
    const double x1 = local(vis.right(), crop.global_rect.x());
    const double y1 = local(vis.bottom(), crop.global_rect.y());
    return BoxF{x0, y0, x1 - x0, y1 - y0};
}

Rect to_global(const BoxF& r, const CropSpec& crop) {
    const auto global = [&](double v, int origin) {
        return origin + static_cast<int>(round_half_up(v * crop.scale));
    };
    int x0 = std::max(global(r.x, crop.global_rect.x()), 0);
    int y0 = std::max(global(r.y, crop.global_rect.y()), 0);
    int x1 = std::min(global(r.right(), crop.global_rect.x()), crop.frame_w);
    int y1 = std::min(global(r.bottom(), crop.global_rect.y()), crop.frame_h);
    // sub-pixel boxes still map to one pixel
    x0 = std::min(x0, crop.frame_w - 1);
    y0 = std::min(y0, crop.frame_h - 1);
    x1 = std::max(x1, x0 + 1);
    y1 = std::max(y1, y0 + 1);
    return Rect::from_edges(x0, y0, x1, y1);
}

}  // namespace attnpipe
