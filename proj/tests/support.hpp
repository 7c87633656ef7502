#pragma once

#include <atomic>
#include <cstdint>
#include <filesystem>
#include <random>
#include <string>

#include "pseudovos/mask.hpp"

namespace testing_support {

inline std::filesystem::path fixture(const std::string& rel) { return std::filesystem::path(PSEUDOVOS_FIXTURE_DIR) / rel; }

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
public:
    TempDir()
    {
        static std::atomic<int> counter{0};
        std::random_device rd;
        path_ = std::filesystem::temp_directory_path() /
                ("pseudovos-test-" + std::to_string(rd()) + "-" + std::to_string(counter++));
        std::filesystem::create_directories(path_);
    }
    ~TempDir()
    {
        std::error_code ec;
        std::filesystem::remove_all(path_, ec);
    }
    TempDir(const TempDir&) = delete;
    TempDir& operator=(const TempDir&) = delete;

    const std::filesystem::path& path() const noexcept { return path_; }
    std::filesystem::path operator/(const std::string& rel) const { return path_ / rel; }

private:
    std::filesystem::path path_;
};

// Union of up to three random rectangles and ellipses; sometimes empty or full.
inline pseudovos::BinaryMask random_blob_mask(std::mt19937_64& rng, int w, int h)
{
    pseudovos::BinaryMask m(w, h);
    std::uniform_int_distribution<int> kind(0, 19);
    const int k = kind(rng);
    if (k == 0)
        return m;
    if (k == 1) {
        for (std::size_t i = 0; i < m.size(); ++i)
            m[i] = 1;
        return m;
    }
    std::uniform_real_distribution<double> ux(0.0, w), uy(0.0, h), unit(0.0, 1.0);
    std::uniform_int_distribution<int> shapes(1, 3);
    const int n = shapes(rng);
    for (int s = 0; s < n; ++s) {
        const double cx = ux(rng), cy = uy(rng);
        const double rx = 0.5 + unit(rng) * w / 3.0, ry = 0.5 + unit(rng) * h / 3.0;
        const bool ellipse = unit(rng) < 0.5;
        for (int y = 0; y < h; ++y)
            for (int x = 0; x < w; ++x) {
                const double dx = (x + 0.5 - cx) / rx, dy = (y + 0.5 - cy) / ry;
                const bool in = ellipse ? dx * dx + dy * dy <= 1.0 : std::abs(dx) <= 1.0 && std::abs(dy) <= 1.0;
                if (in)
                    m.set(x, y);
            }
    }
    return m;
}

// Independent pixel noise; density drawn per mask.
inline pseudovos::BinaryMask random_noise_mask(std::mt19937_64& rng, int w, int h)
{
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const double density = unit(rng);
    pseudovos::BinaryMask m(w, h);
    for (std::size_t i = 0; i < m.size(); ++i)
        m[i] = unit(rng) < density ? 1 : 0;
    return m;
}

} // namespace testing_support
