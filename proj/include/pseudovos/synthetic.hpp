#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <map>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pseudovos/dataset.hpp"
#include "pseudovos/image.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/netpbm.hpp"
#include "pseudovos/pseudolabel.hpp"

// Procedural video corpus: textured backgrounds with moving superellipse objects
// whose colour and shape drift over the sequence. Ground-truth masks are exact.
namespace pseudovos::synthetic {

struct CorpusSpec {
    int sequences = 4;
    int frames = 12;
    int width = 96;
    int height = 72;
    int min_objects = 1;
    int max_objects = 2;
    double native_fps = 30.0;
    // Fraction of the RGB cube the object colour travels over the sequence.
    double colour_drift = 0.4;
    // Change of the superellipse exponent over the sequence.
    double shape_drift = 2.0;
    double texture_noise = 0.05;
    std::uint64_t seed = 1;

    void validate() const
    {
        require(sequences >= 0 && frames >= 1 && width >= 16 && height >= 16, ErrorCategory::validation,
                "corpus spec: need >= 1 frame and frames of at least 16x16");
        require(min_objects >= 1 && max_objects >= min_objects && max_objects <= kMaxObjectId,
                ErrorCategory::validation, "corpus spec: bad object count range");
    }
};

inline void to_json(nlohmann::json& j, const CorpusSpec& s)
{
    j = {{"sequences", s.sequences},       {"frames", s.frames},           {"width", s.width},
         {"height", s.height},             {"min_objects", s.min_objects}, {"max_objects", s.max_objects},
         {"native_fps", s.native_fps},     {"colour_drift", s.colour_drift}, {"shape_drift", s.shape_drift},
         {"texture_noise", s.texture_noise}, {"seed", s.seed}};
}

inline void from_json(const nlohmann::json& j, CorpusSpec& s)
{
    CorpusSpec d;
    s.sequences = j.value("sequences", d.sequences);
    s.frames = j.value("frames", d.frames);
    s.width = j.value("width", d.width);
    s.height = j.value("height", d.height);
    s.min_objects = j.value("min_objects", d.min_objects);
    s.max_objects = j.value("max_objects", d.max_objects);
    s.native_fps = j.value("native_fps", d.native_fps);
    s.colour_drift = j.value("colour_drift", d.colour_drift);
    s.shape_drift = j.value("shape_drift", d.shape_drift);
    s.texture_noise = j.value("texture_noise", d.texture_noise);
    s.seed = j.value("seed", d.seed);
}

struct Corpus {
    DatasetManifest manifest;
    std::map<std::string, std::vector<ImageTensor>> images;

    ImageLoader loader() const
    {
        return [this](const DatasetManifest&, const SequenceRecord& seq, int frame) {
            return images.at(seq.id).at(static_cast<std::size_t>(frame));
        };
    }

    // Writes frames as PPM next to a manifest.json; returns the manifest path.
    std::filesystem::path write(const std::filesystem::path& dir) const
    {
        for (const auto& seq : manifest.sequences)
            for (int f = 0; f < seq.frame_count(); ++f)
                netpbm::write_image(dir / seq.frame_paths[static_cast<std::size_t>(f)],
                                    images.at(seq.id)[static_cast<std::size_t>(f)]);
        const auto path = dir / "manifest.json";
        save_manifest(path, manifest);
        return path;
    }
};

namespace detail {

using Rgb = std::array<double, 3>;

inline Rgb lerp(const Rgb& a, const Rgb& b, double s)
{
    return {a[0] + s * (b[0] - a[0]), a[1] + s * (b[1] - a[1]), a[2] + s * (b[2] - a[2])};
}

inline double distance(const Rgb& a, const Rgb& b)
{
    return std::sqrt((a[0] - b[0]) * (a[0] - b[0]) + (a[1] - b[1]) * (a[1] - b[1]) + (a[2] - b[2]) * (a[2] - b[2]));
}

struct ObjectPlan {
    double cx0, cy0, cx1, cy1; // centre at start and end
    double ax, ay;             // semi-axes at start
    double grow;               // relative size change over the sequence
    double exponent;           // superellipse exponent at start
    Rgb colour0, colour1;
};

} // namespace detail

inline Corpus make_corpus(const CorpusSpec& spec, const std::string& name = "synthetic")
{
    spec.validate();
    std::mt19937_64 rng(spec.seed);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    std::normal_distribution<double> gauss(0.0, 1.0);
    auto uniform = [&](double lo, double hi) { return lo + (hi - lo) * unit(rng); };

    Corpus corpus;
    corpus.manifest.name = name;
    corpus.manifest.split = Split::train;
    corpus.manifest.fps_annotation = spec.native_fps;

    const double w = spec.width;
    const double h = spec.height;
    for (int s = 0; s < spec.sequences; ++s) {
        char sid[32];
        std::snprintf(sid, sizeof sid, "seq%03d", s);
        SequenceRecord seq;
        seq.id = sid;
        seq.width = spec.width;
        seq.height = spec.height;
        seq.native_fps = spec.native_fps;

        const detail::Rgb bg0{uniform(0.1, 0.9), uniform(0.1, 0.9), uniform(0.1, 0.9)};
        const detail::Rgb bg1{uniform(0.1, 0.9), uniform(0.1, 0.9), uniform(0.1, 0.9)};
        const int n_obj = spec.min_objects + static_cast<int>(unit(rng) * (spec.max_objects - spec.min_objects + 1));
        std::vector<detail::ObjectPlan> plans;
        for (int o = 0; o < std::min(n_obj, spec.max_objects); ++o) {
            detail::ObjectPlan p{};
            p.ax = uniform(0.12, 0.22) * w;
            p.ay = uniform(0.14, 0.26) * h;
            p.grow = uniform(-0.25, 0.25);
            const double mx = 1.3 * p.ax + 1.0;
            const double my = 1.3 * p.ay + 1.0;
            p.cx0 = uniform(mx, w - mx);
            p.cy0 = uniform(my, h - my);
            p.cx1 = std::clamp(p.cx0 + uniform(-0.3, 0.3) * w, mx, w - mx);
            p.cy1 = std::clamp(p.cy0 + uniform(-0.3, 0.3) * h, my, h - my);
            p.exponent = uniform(1.2, 4.5);
            // Object colours keep their distance from the background palette.
            do {
                p.colour0 = {unit(rng), unit(rng), unit(rng)};
            } while (detail::distance(p.colour0, bg0) < 0.45 || detail::distance(p.colour0, bg1) < 0.45);
            detail::Rgb dir{gauss(rng), gauss(rng), gauss(rng)};
            const double norm = std::max(1e-9, std::sqrt(dir[0] * dir[0] + dir[1] * dir[1] + dir[2] * dir[2]));
            for (int c = 0; c < 3; ++c)
                p.colour1[static_cast<std::size_t>(c)] =
                    std::clamp(p.colour0[static_cast<std::size_t>(c)] + spec.colour_drift * std::sqrt(3.0) *
                                                                          dir[static_cast<std::size_t>(c)] / norm,
                               0.0, 1.0);
            plans.push_back(p);
        }

        std::vector<ObjectTrack> tracks(plans.size());
        for (std::size_t o = 0; o < plans.size(); ++o) {
            tracks[o].id = static_cast<int>(o) + 1;
            tracks[o].category = "blob";
        }
        auto& frames = corpus.images[seq.id];
        for (int f = 0; f < spec.frames; ++f) {
            const double t = spec.frames == 1 ? 0.5 : static_cast<double>(f) / (spec.frames - 1);
            ImageTensor img(spec.width, spec.height, 3);
            const double phase = uniform(0.0, 6.283);
            for (int y = 0; y < spec.height; ++y)
                for (int x = 0; x < spec.width; ++x) {
                    const double g = 0.5 + 0.5 * std::sin(0.07 * x + 0.05 * y + phase);
                    const auto c = detail::lerp(bg0, bg1, g);
                    for (int k = 0; k < 3; ++k)
                        img.at(k, x, y) = static_cast<float>(std::clamp(
                            c[static_cast<std::size_t>(k)] + spec.texture_noise * gauss(rng), 0.0, 1.0));
                }
            LabelMap owner(spec.width, spec.height, kBackground);
            for (std::size_t o = 0; o < plans.size(); ++o) {
                const auto& p = plans[o];
                const double cx = p.cx0 + t * (p.cx1 - p.cx0);
                const double cy = p.cy0 + t * (p.cy1 - p.cy0);
                const double scale = 1.0 + p.grow * (t - 0.5);
                const double ax = p.ax * scale;
                const double ay = p.ay * scale;
                const double n = std::max(1.0, p.exponent + spec.shape_drift * (t - 0.5));
                const auto colour = detail::lerp(p.colour0, p.colour1, t);
                for (int y = 0; y < spec.height; ++y)
                    for (int x = 0; x < spec.width; ++x) {
                        const double dx = std::abs((x + 0.5 - cx) / ax);
                        const double dy = std::abs((y + 0.5 - cy) / ay);
                        if (std::pow(dx, n) + std::pow(dy, n) > 1.0)
                            continue;
                        owner.at(x, y) = static_cast<std::uint8_t>(o + 1);
                        for (int k = 0; k < 3; ++k)
                            img.at(k, x, y) = static_cast<float>(std::clamp(
                                colour[static_cast<std::size_t>(k)] + spec.texture_noise * gauss(rng), 0.0, 1.0));
                    }
            }
            for (auto& track : tracks) {
                const BinaryMask m = owner.object_mask(track.id);
                if (const auto box = m.tight_box()) {
                    track.boxes.emplace(f, *box);
                    track.gt_masks.emplace(f, rle_encode(m));
                }
            }
            char path[64];
            std::snprintf(path, sizeof path, "%s/%05d.ppm", sid, f);
            seq.frame_paths.emplace_back(path);
            frames.push_back(std::move(img));
        }
        for (auto& track : tracks)
            if (!track.boxes.empty())
                seq.objects.push_back(std::move(track));
        corpus.manifest.sequences.push_back(std::move(seq));
    }
    validate(corpus.manifest);
    return corpus;
}

} // namespace pseudovos::synthetic
