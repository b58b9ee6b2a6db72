#include "attnpipe/raster.hpp"

#include <algorithm>
#include <cstring>
#include <stdexcept>

namespace attnpipe {

Raster::Raster(int w, int h) : width(w), height(h) {
    if (w < 1 || h < 1) {
        throw std::invalid_argument("raster dimensions must be >= 1");
    }
    rgb.assign(static_cast<std::size_t>(w) * h * 3, 0);
}

void Raster::fill(std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    for (std::size_t i = 0; i < rgb.size(); i += 3) {
        rgb[i] = r;
        rgb[i + 1] = g;
        rgb[i + 2] = b;
    }
}

void Raster::fill_rect(const Rect& rect, std::uint8_t r, std::uint8_t g, std::uint8_t b) {
    const int x0 = std::max(rect.x(), 0);
    const int y0 = std::max(rect.y(), 0);
    const int x1 = std::min(rect.right(), width);
    const int y1 = std::min(rect.bottom(), height);
    for (int y = y0; y < y1; ++y) {
        for (int x = x0; x < x1; ++x) {
            auto* p = pixel(x, y);
            p[0] = r;
            p[1] = g;
            p[2] = b;
        }
    }
}

Raster cut_tile(const Raster& frame, const Rect& square, int side) {
    Raster tile(side, side);
    // source column for every destination column, -1 when outside the frame
    std::vector<int> src_x(static_cast<std::size_t>(side));
    const double sx = static_cast<double>(square.w()) / side;
    const double sy = static_cast<double>(square.h()) / side;
    for (int u = 0; u < side; ++u) {
        const int x = square.x() + static_cast<int>((u + 0.5) * sx);
        src_x[static_cast<std::size_t>(u)] = (x >= 0 && x < frame.width) ? x : -1;
    }
    for (int v = 0; v < side; ++v) {
        const int y = square.y() + static_cast<int>((v + 0.5) * sy);
        if (y < 0 || y >= frame.height) {
            continue;
        }
        std::uint8_t* dst = tile.pixel(0, v);
        for (int u = 0; u < side; ++u, dst += 3) {
            const int x = src_x[static_cast<std::size_t>(u)];
            if (x >= 0) {
                std::memcpy(dst, frame.pixel(x, y), 3);
            }
        }
    }
    return tile;
}

}  // namespace attnpipe
