#pragma once

#include <cctype>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <vector>

#include "pseudovos/error.hpp"
#include "pseudovos/image.hpp"
#include "pseudovos/mask.hpp"

// Binary PGM (P5) and PPM (P6) with maxval 255. Label maps are stored as PGM
// where the pixel value is the label id (255 = ignore).
namespace pseudovos::netpbm {

namespace detail {

inline std::string read_token(std::istream& in)
{
    std::string tok;
    char ch = 0;
    while (in.get(ch)) {
        if (ch == '#') {
            std::string skip;
            std::getline(in, skip);
            continue;
        }
        if (std::isspace(static_cast<unsigned char>(ch))) {
            if (!tok.empty())
                break;
            continue;
        }
        tok.push_back(ch);
    }
    return tok;
}

struct Raster {
    int width = 0;
    int height = 0;
    int channels = 0;
    std::vector<std::uint8_t> bytes;
};

inline Raster read_raster(const std::filesystem::path& path)
{
    std::ifstream in(path, std::ios::binary);
    require(static_cast<bool>(in), ErrorCategory::io, "cannot open image " + path.string());
    const std::string magic = read_token(in);
    require(magic == "P5" || magic == "P6", ErrorCategory::parse,
            path.string() + ": unsupported image format '" + magic + "' (expected P5 or P6)");
    Raster r;
    try {
        r.width = std::stoi(read_token(in));
        r.height = std::stoi(read_token(in));
        const int maxval = std::stoi(read_token(in));
        require(maxval == 255, ErrorCategory::parse, path.string() + ": only maxval 255 supported");
    } catch (const std::logic_error&) {
        fail(ErrorCategory::parse, path.string() + ": malformed header");
    }
    require(r.width >= 1 && r.height >= 1, ErrorCategory::parse, path.string() + ": bad dimensions");
    r.channels = magic == "P5" ? 1 : 3;
    r.bytes.resize(static_cast<std::size_t>(r.width) * r.height * r.channels);
    in.read(reinterpret_cast<char*>(r.bytes.data()), static_cast<std::streamsize>(r.bytes.size()));
    require(in.gcount() == static_cast<std::streamsize>(r.bytes.size()), ErrorCategory::parse,
            path.string() + ": truncated pixel data");
    return r;
}

inline void write_raster(const std::filesystem::path& path, int width, int height, int channels,
                         const std::vector<std::uint8_t>& bytes)
{
    if (path.has_parent_path())
        std::filesystem::create_directories(path.parent_path());
    std::ofstream out(path, std::ios::binary);
    require(static_cast<bool>(out), ErrorCategory::io, "cannot write image " + path.string());
    out << (channels == 1 ? "P5" : "P6") << '\n' << width << ' ' << height << "\n255\n";
    out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
    require(static_cast<bool>(out), ErrorCategory::io, "short write to " + path.string());
}

} // namespace detail

inline LabelMap read_label_map(const std::filesystem::path& path)
{
    auto r = detail::read_raster(path);
    require(r.channels == 1, ErrorCategory::parse, path.string() + ": label map must be single-channel (P5)");
    LabelMap m(r.width, r.height);
    m.data() = std::move(r.bytes);
    return m;
}

inline void write_label_map(const std::filesystem::path& path, const Grid<std::uint8_t>& map)
{
    detail::write_raster(path, map.width(), map.height(), 1, map.data());
}

inline BinaryMask read_mask(const std::filesystem::path& path, int label = -1)
{
    const LabelMap m = read_label_map(path);
    BinaryMask out(m.width(), m.height());
    for (std::size_t i = 0; i < m.size(); ++i)
        out[i] = label < 0 ? (m[i] != 0 && m[i] != kIgnore) : (m[i] == label);
    return out;
}

inline ImageTensor read_image(const std::filesystem::path& path)
{
    const auto r = detail::read_raster(path);
    ImageTensor t(r.width, r.height, r.channels);
    for (int y = 0; y < r.height; ++y)
        for (int x = 0; x < r.width; ++x)
            for (int c = 0; c < r.channels; ++c)
                t.at(c, x, y) = r.bytes[(static_cast<std::size_t>(y) * r.width + x) * r.channels + c] / 255.0f;
    return t;
}

inline void write_image(const std::filesystem::path& path, const ImageTensor& t)
{
    require(t.channels() == 1 || t.channels() == 3, ErrorCategory::validation, "only 1 or 3 channel images");
    std::vector<std::uint8_t> bytes(static_cast<std::size_t>(t.width()) * t.height() * t.channels());
    for (int y = 0; y < t.height(); ++y)
        for (int x = 0; x < t.width(); ++x)
            for (int c = 0; c < t.channels(); ++c) {
                const float v = std::clamp(t.at(c, x, y), 0.0f, 1.0f);
                bytes[(static_cast<std::size_t>(y) * t.width() + x) * t.channels() + c] =
                    static_cast<std::uint8_t>(std::lround(v * 255.0f));
            }
    detail::write_raster(path, t.width(), t.height(), t.channels(), bytes);
}

} // namespace pseudovos::netpbm
