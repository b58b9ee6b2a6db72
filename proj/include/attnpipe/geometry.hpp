#pragma once

#include <cmath>
#include <compare>
#include <cstdint>
#include <iosfwd>
#include <vector>

namespace attnpipe {

/// Side of the square detector input, in pixels.
inline constexpr int kModelSide = 608;

/// Axis-aligned integer box in global frame pixels. Width and height are
/// always positive; the constructor rejects anything else.
class Rect {
public:
    Rect() = default;
    Rect(int x, int y, int w, int h);

    /// Builds from edge coordinates [x0, x1) x [y0, y1).
    static Rect from_edges(int x0, int y0, int x1, int y1);

    int x() const noexcept { return x_; }
    int y() const noexcept { return y_; }
    int w() const noexcept { return w_; }
    int h() const noexcept { return h_; }
    int right() const noexcept { return x_ + w_; }
    int bottom() const noexcept { return y_ + h_; }
    std::int64_t area() const noexcept { return std::int64_t{w_} * h_; }

    bool contains(int px, int py) const noexcept {
        return px >= x_ && px < right() && py >= y_ && py < bottom();
    }

    friend auto operator<=>(const Rect&, const Rect&) = default;

private:
    int x_ = 0;
    int y_ = 0;
    int w_ = 1;
    int h_ = 1;
};

std::ostream& operator<<(std::ostream& os, const Rect& r);

/// Real-valued box in the 608x608 crop-local model space.
struct BoxF {
    double x = 0;
    double y = 0;
    double w = 0;
    double h = 0;

    double right() const noexcept { return x + w; }
    double bottom() const noexcept { return y + h; }

    friend bool operator==(const BoxF&, const BoxF&) = default;
};

std::ostream& operator<<(std::ostream& os, const BoxF& b);

/// Grid parameterization: number of rows and overlap between neighbouring
/// cells, the overlap measured in model (608 px) space.
struct CropSettings {
    int rows = 1;
    int overlap_px = 20;

    friend bool operator==(const CropSettings&, const CropSettings&) = default;
};

/// Throws std::invalid_argument unless rows >= 1 and overlap in [0, 607].
void validate(const CropSettings& settings);

struct CropSpec {
    int crop_id = 0;
    int row = 0;
    int col = 0;
    Rect global_rect;
    /// crop side / 608
    double scale = 1.0;
    int frame_w = 0;
    int frame_h = 0;
};

struct GridSpec {
    int frame_w = 0;
    int frame_h = 0;
    CropSettings settings;
    int crop_side = 0;
    int rows = 0;
    int cols = 0;
    std::vector<CropSpec> crops;

    const CropSpec& at(int row, int col) const { return crops.at(static_cast<std::size_t>(row * cols + col)); }
};

/// Integer rounding used wherever real-valued geometry meets pixels.
inline long long round_half_up(double v) noexcept {
    return static_cast<long long>(std::floor(v + 0.5));
}

bool intersects(const Rect& a, const Rect& b) noexcept;
std::int64_t intersection_area(const Rect& a, const Rect& b) noexcept;
/// Overlapping region; only meaningful when intersects(a, b).
Rect intersection(const Rect& a, const Rect& b);
Rect union_rect(const Rect& a, const Rect& b);
double iou(const Rect& a, const Rect& b) noexcept;

/// Grows r by margin on all sides and clips it to the frame.
Rect dilate(const Rect& r, int margin, int frame_w, int frame_h);
/// Clips r to [0,frame_w) x [0,frame_h); throws if nothing is left.
Rect clip_to_frame(const Rect& r, int frame_w, int frame_h);

/// Side of one crop in global pixels for the given frame height.
int crop_side_px(int frame_h, const CropSettings& settings);

/// Minimal overlapping square tiling covering the frame.
GridSpec build_grid(int frame_w, int frame_h, const CropSettings& settings);

/// Global rect to crop-local model space, clipped to [0,608]^2.
/// Throws std::invalid_argument when r does not intersect the crop.
BoxF to_local(const Rect& r, const CropSpec& crop);

/// Crop-local box back to global pixels, clipped to the frame.
Rect to_global(const BoxF& r, const CropSpec& crop);

}  // namespace attnpipe
