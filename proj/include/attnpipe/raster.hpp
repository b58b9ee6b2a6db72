#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "attnpipe/geometry.hpp"

namespace attnpipe {

/// 8-bit RGB image, row-major, 3 bytes per pixel.
struct Raster {
    int width = 0;
    int height = 0;
    std::vector<std::uint8_t> rgb;

    Raster() = default;
    Raster(int w, int h);

    std::size_t byte_size() const noexcept { return rgb.size(); }
    std::uint8_t* pixel(int x, int y) noexcept { return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3; }
    const std::uint8_t* pixel(int x, int y) const noexcept {
        return rgb.data() + (static_cast<std::size_t>(y) * width + x) * 3;
    }

    void fill(std::uint8_t r, std::uint8_t g, std::uint8_t b);
    /// Paints the part of rect that lies inside the image.
    void fill_rect(const Rect& rect, std::uint8_t r, std::uint8_t g, std::uint8_t b);

    friend bool operator==(const Raster&, const Raster&) = default;
};

/// Cuts the crop's square out of the frame and resamples it to
/// side x side with nearest-neighbour sampling at pixel centres. Parts of the
/// square outside the frame are black.
Raster cut_tile(const Raster& frame, const Rect& square, int side = kModelSide);

}  // namespace attnpipe
