#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "pseudovos/error.hpp"
#include "pseudovos/mask.hpp"

namespace pseudovos {

// Planar float image, channel-major then row-major. Intensities are in [0, 1].
class ImageTensor {
public:
    ImageTensor() = default;
    ImageTensor(int width, int height, int channels, float fill = 0.0f)
        : width_(width), height_(height), channels_(channels)
    {
        require(width >= 1 && height >= 1 && channels >= 1, ErrorCategory::validation,
                "image tensor dimensions must be positive");
        data_.assign(static_cast<std::size_t>(width) * height * channels, fill);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    int channels() const noexcept { return channels_; }

    float& at(int c, int x, int y) { return data_[index(c, x, y)]; }
    float at(int c, int x, int y) const { return data_[index(c, x, y)]; }

    const std::vector<float>& data() const noexcept { return data_; }

    friend bool operator==(const ImageTensor&, const ImageTensor&) = default;

private:
    std::size_t index(int c, int x, int y) const noexcept
    {
        return (static_cast<std::size_t>(c) * height_ + y) * width_ + x;
    }

    int width_ = 0;
    int height_ = 0;
    int channels_ = 0;
    std::vector<float> data_;
};

enum class Interp { nearest, bilinear };

// Grows the box by margin_frac of its own width/height on each side, clamped to the frame.
inline BoundingBox expand_box(const BoundingBox& box, double margin_frac, int width, int height)
{
    require_box_in(box, width, height);
    require(margin_frac >= 0.0, ErrorCategory::validation, "margin fraction must be non-negative");
    const double dx = margin_frac * box.width();
    const double dy = margin_frac * box.height();
    // Small slack keeps exact products like 0.25 * 4 from rounding outward.
    constexpr double eps = 1e-9;
    BoundingBox out{
        std::max(0, static_cast<int>(std::floor(box.x0 - dx + eps))),
        std::max(0, static_cast<int>(std::floor(box.y0 - dy + eps))),
        std::min(width, static_cast<int>(std::ceil(box.x1 + dx - eps))),
        std::min(height, static_cast<int>(std::ceil(box.y1 + dy - eps))),
    };
    require(out.width() >= 1 && out.height() >= 1, ErrorCategory::validation,
            "degenerate box after clamping: " + to_string(out));
    return out;
}

namespace detail {

// Source coordinate of a destination pixel center under pixel-center alignment.
inline double source_coord(int dst, int src_extent, int dst_extent)
{
    return (dst + 0.5) * static_cast<double>(src_extent) / dst_extent - 0.5;
}

inline int nearest_index(int dst, int src_extent, int dst_extent)
{
    const int i = static_cast<int>(std::floor((dst + 0.5) * static_cast<double>(src_extent) / dst_extent));
    return std::clamp(i, 0, src_extent - 1);
}

} // namespace detail

// Resamples `region` of `image` to out_w x out_h.
inline ImageTensor resample_region(const ImageTensor& image, const BoundingBox& region, int out_w, int out_h,
                                   Interp interp)
{
    require_box_in(region, image.width(), image.height());
    require(out_w >= 1 && out_h >= 1, ErrorCategory::validation, "output size must be positive");
    ImageTensor out(out_w, out_h, image.channels());
    const int rw = region.width();
    const int rh = region.height();
    for (int y = 0; y < out_h; ++y) {
        for (int x = 0; x < out_w; ++x) {
            if (interp == Interp::nearest) {
                const int sx = region.x0 + detail::nearest_index(x, rw, out_w);
                const int sy = region.y0 + detail::nearest_index(y, rh, out_h);
                for (int c = 0; c < image.channels(); ++c)
                    out.at(c, x, y) = image.at(c, sx, sy);
                continue;
            }
            const double fx = std::clamp(detail::source_coord(x, rw, out_w), 0.0, rw - 1.0);
            const double fy = std::clamp(detail::source_coord(y, rh, out_h), 0.0, rh - 1.0);
            const int ix = static_cast<int>(std::floor(fx));
            const int iy = static_cast<int>(std::floor(fy));
            const int jx = std::min(ix + 1, rw - 1);
            const int jy = std::min(iy + 1, rh - 1);
            const double ax = fx - ix;
            const double ay = fy - iy;
            for (int c = 0; c < image.channels(); ++c) {
                const double v00 = image.at(c, region.x0 + ix, region.y0 + iy);
                const double v10 = image.at(c, region.x0 + jx, region.y0 + iy);
                const double v01 = image.at(c, region.x0 + ix, region.y0 + jy);
                const double v11 = image.at(c, region.x0 + jx, region.y0 + jy);
                const double top = v00 + ax * (v10 - v00);
                const double bottom = v01 + ax * (v11 - v01);
                out.at(c, x, y) = static_cast<float>(top + ay * (bottom - top));
            }
        }
    }
    return out;
}

struct Crop {
    ImageTensor tensor;
    BoundingBox region; // expanded box in source coordinates
};

inline Crop crop_with_margin(const ImageTensor& image, const BoundingBox& box, double margin_frac, int out_size,
                             Interp interp = Interp::bilinear)
{
    require(out_size >= 1, ErrorCategory::validation, "crop output size must be positive");
    const BoundingBox region = expand_box(box, margin_frac, image.width(), image.height());
    return {resample_region(image, region, out_size, out_size, interp), region};
}

inline ImageTensor to_tensor(const Grid<std::uint8_t>& g)
{
    ImageTensor t(g.width(), g.height(), 1);
    for (int y = 0; y < g.height(); ++y)
        for (int x = 0; x < g.width(); ++x)
            t.at(0, x, y) = g.at(x, y);
    return t;
}

// Label grids always resample with nearest neighbour so values stay categorical.
template <typename GridT>
GridT crop_labels_with_margin(const GridT& labels, const BoundingBox& box, double margin_frac, int out_size)
{
    const Crop c = crop_with_margin(to_tensor(labels), box, margin_frac, out_size, Interp::nearest);
    GridT out(out_size, out_size);
    for (int y = 0; y < out_size; ++y)
        for (int x = 0; x < out_size; ++x)
            out.at(x, y) = static_cast<std::uint8_t>(c.tensor.at(0, x, y));
    return out;
}

} // namespace pseudovos
