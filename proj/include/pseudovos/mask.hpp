#pragma once

#include <algorithm>
#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "pseudovos/error.hpp"

namespace pseudovos {

inline constexpr std::uint8_t kBackground = 0;
inline constexpr std::uint8_t kIgnore = 255;
inline constexpr int kMaxObjectId = 254;

// Half-open pixel rectangle: [x0, x1) x [y0, y1).
struct BoundingBox {
    int x0 = 0;
    int y0 = 0;
    int x1 = 0;
    int y1 = 0;

    int width() const noexcept { return x1 - x0; }
    int height() const noexcept { return y1 - y0; }
    long area() const noexcept { return static_cast<long>(width()) * height(); }
    bool contains(int x, int y) const noexcept { return x >= x0 && x < x1 && y >= y0 && y < y1; }
    bool valid_in(int w, int h) const noexcept
    {
        return 0 <= x0 && x0 < x1 && x1 <= w && 0 <= y0 && y0 < y1 && y1 <= h;
    }

    friend bool operator==(const BoundingBox&, const BoundingBox&) = default;
};

inline std::string to_string(const BoundingBox& b)
{
    return "(" + std::to_string(b.x0) + "," + std::to_string(b.y0) + ")-(" + std::to_string(b.x1) + "," +
           std::to_string(b.y1) + ")";
}

inline void require_box_in(const BoundingBox& b, int w, int h)
{
    require(b.valid_in(w, h), ErrorCategory::validation,
            "bounding box " + to_string(b) + " outside " + std::to_string(w) + "x" + std::to_string(h) + " frame");
}

// Row-major grid of a single value type. Base for masks and label maps.
template <typename T>
class Grid {
public:
    Grid() = default;
    Grid(int width, int height, T fill = T{})
        : width_(width), height_(height)
    {
        require(width >= 1 && height >= 1, ErrorCategory::validation,
                "grid dimensions must be positive, got " + std::to_string(width) + "x" + std::to_string(height));
        data_.assign(static_cast<std::size_t>(width) * height, fill);
    }

    int width() const noexcept { return width_; }
    int height() const noexcept { return height_; }
    std::size_t size() const noexcept { return data_.size(); }
    bool same_shape(const Grid& o) const noexcept { return width_ == o.width_ && height_ == o.height_; }

    T& at(int x, int y) { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    const T& at(int x, int y) const { return data_[static_cast<std::size_t>(y) * width_ + x]; }
    T& operator[](std::size_t i) { return data_[i]; }
    const T& operator[](std::size_t i) const { return data_[i]; }

    std::vector<T>& data() noexcept { return data_; }
    const std::vector<T>& data() const noexcept { return data_; }

    friend bool operator==(const Grid&, const Grid&) = default;

protected:
    int width_ = 0;
    int height_ = 0;
    std::vector<T> data_;
};

class BinaryMask : public Grid<std::uint8_t> {
public:
    using Grid::Grid;

    static BinaryMask from_box(int width, int height, const BoundingBox& box)
    {
        require_box_in(box, width, height);
        BinaryMask m(width, height);
        for (int y = box.y0; y < box.y1; ++y)
            for (int x = box.x0; x < box.x1; ++x)
                m.at(x, y) = 1;
        return m;
    }

    bool test(int x, int y) const { return at(x, y) != 0; }
    void set(int x, int y, bool v = true) { at(x, y) = v ? 1 : 0; }

    std::size_t count() const
    {
        return static_cast<std::size_t>(std::count_if(data_.begin(), data_.end(), [](auto v) { return v != 0; }));
    }
    bool empty() const { return count() == 0; }

    std::optional<BoundingBox> tight_box() const
    {
        BoundingBox b{width_, height_, 0, 0};
        for (int y = 0; y < height_; ++y)
            for (int x = 0; x < width_; ++x)
                if (test(x, y)) {
                    b.x0 = std::min(b.x0, x);
                    b.y0 = std::min(b.y0, y);
                    b.x1 = std::max(b.x1, x + 1);
                    b.y1 = std::max(b.y1, y + 1);
                }
        if (b.x1 == 0)
            return std::nullopt;
        return b;
    }
};

// 0 = background, 1..254 = object ids, 255 = ignore.
class LabelMap : public Grid<std::uint8_t> {
public:
    using Grid::Grid;

    BinaryMask object_mask(int id) const
    {
        BinaryMask m(width_, height_);
        for (std::size_t i = 0; i < data_.size(); ++i)
            m[i] = data_[i] == id ? 1 : 0;
        return m;
    }

    std::size_t count(std::uint8_t label) const
    {
        return static_cast<std::size_t>(std::count(data_.begin(), data_.end(), label));
    }
};

// Column-major run lengths, alternating zeros and ones, starting with zeros.
struct RleMask {
    int width = 0;
    int height = 0;
    std::vector<std::uint32_t> counts;

    friend bool operator==(const RleMask&, const RleMask&) = default;
};

inline void require_same_shape(const BinaryMask& a, const BinaryMask& b)
{
    require(a.same_shape(b), ErrorCategory::validation,
            "mask dimension mismatch: " + std::to_string(a.width()) + "x" + std::to_string(a.height()) + " vs " +
                std::to_string(b.width()) + "x" + std::to_string(b.height()));
}

// Intersection over union. Two empty masks count as a perfect match.
inline double iou(const BinaryMask& a, const BinaryMask& b)
{
    require_same_shape(a, b);
    std::size_t inter = 0;
    std::size_t uni = 0;
    for (std::size_t i = 0; i < a.size(); ++i) {
        const bool pa = a[i] != 0;
        const bool pb = b[i] != 0;
        inter += (pa && pb) ? 1 : 0;
        uni += (pa || pb) ? 1 : 0;
    }
    if (uni == 0)
        return 1.0;
    return static_cast<double>(inter) / static_cast<double>(uni);
}

inline RleMask rle_encode(const BinaryMask& m)
{
    RleMask r{m.width(), m.height(), {}};
    std::uint8_t current = 0;
    std::uint32_t run = 0;
    for (int x = 0; x < m.width(); ++x) {
        for (int y = 0; y < m.height(); ++y) {
            const std::uint8_t v = m.test(x, y) ? 1 : 0;
            if (v != current) {
                r.counts.push_back(run);
                run = 0;
                current = v;
            }
            ++run;
        }
    }
    r.counts.push_back(run);
    return r;
}

inline void validate(const RleMask& r)
{
    require(r.width >= 1 && r.height >= 1, ErrorCategory::validation, "rle: dimensions must be positive");
    require(!r.counts.empty(), ErrorCategory::validation, "rle: empty counts");
    std::uint64_t total = 0;
    for (std::size_t i = 0; i < r.counts.size(); ++i) {
        require(i == 0 || r.counts[i] > 0, ErrorCategory::validation,
                "rle: zero run at interior position " + std::to_string(i));
        total += r.counts[i];
    }
    const std::uint64_t expected = static_cast<std::uint64_t>(r.width) * static_cast<std::uint64_t>(r.height);
    require(total == expected, ErrorCategory::validation,
            "rle: counts sum to " + std::to_string(total) + ", expected " + std::to_string(expected));
}

inline BinaryMask rle_decode(const RleMask& r)
{
    validate(r);
    BinaryMask m(r.width, r.height);
    std::size_t pos = 0;
    std::uint8_t v = 0;
    for (const auto run : r.counts) {
        for (std::uint32_t k = 0; k < run; ++k, ++pos) {
            const int x = static_cast<int>(pos / static_cast<std::size_t>(r.height));
            const int y = static_cast<int>(pos % static_cast<std::size_t>(r.height));
            m.at(x, y) = v;
        }
        v ^= 1;
    }
    return m;
}

inline LabelMap fill_ignore(LabelMap map, const BoundingBox& box)
{
    require_box_in(box, map.width(), map.height());
    for (int y = box.y0; y < box.y1; ++y)
        for (int x = box.x0; x < box.x1; ++x)
            map.at(x, y) = kIgnore;
    return map;
}

// JSON form follows the common {"size": [h, w], "counts": [...]} layout.
inline void to_json(nlohmann::json& j, const RleMask& r)
{
    j = nlohmann::json{{"size", {r.height, r.width}}, {"counts", r.counts}};
}

inline void from_json(const nlohmann::json& j, RleMask& r)
{
    const auto& size = j.at("size");
    require(size.is_array() && size.size() == 2, ErrorCategory::parse, "rle: size must be [height, width]");
    r.height = size[0].get<int>();
    r.width = size[1].get<int>();
    r.counts = j.at("counts").get<std::vector<std::uint32_t>>();
    validate(r);
}

inline void to_json(nlohmann::json& j, const BoundingBox& b) { j = nlohmann::json{b.x0, b.y0, b.x1, b.y1}; }

inline void from_json(const nlohmann::json& j, BoundingBox& b)
{
    require(j.is_array() && j.size() == 4, ErrorCategory::parse, "box must be [x0, y0, x1, y1]");
    b = {j[0].get<int>(), j[1].get<int>(), j[2].get<int>(), j[3].get<int>()};
}

} // namespace pseudovos
