#pragma once

// Brute-force reference implementations. They share no code with the library
// beyond the mask containers.

#include <cmath>
#include <cstdlib>
#include <map>
#include <set>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "pseudovos/dataset.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/metrics.hpp"
#include "support.hpp"

namespace oracle {

using pseudovos::BinaryMask;

inline double iou(const BinaryMask& a, const BinaryMask& b)
{
    long inter = 0, a_n = 0, b_n = 0;
    for (int y = 0; y < a.height(); ++y)
        for (int x = 0; x < a.width(); ++x) {
            a_n += a.test(x, y);
            b_n += b.test(x, y);
            inter += a.test(x, y) && b.test(x, y);
        }
    const long uni = a_n + b_n - inter;
    return uni == 0 ? 1.0 : static_cast<double>(inter) / static_cast<double>(uni);
}

using PixelList = std::vector<std::pair<int, int>>;

inline PixelList boundary(const BinaryMask& m)
{
    PixelList out;
    const auto fg = [&](int x, int y) { return x >= 0 && y >= 0 && x < m.width() && y < m.height() && m.test(x, y); };
    for (int y = 0; y < m.height(); ++y)
        for (int x = 0; x < m.width(); ++x)
            if (fg(x, y) && !(fg(x - 1, y) && fg(x + 1, y) && fg(x, y - 1) && fg(x, y + 1)))
                out.emplace_back(x, y);
    return out;
}

// Fraction of `from` pixels within Chebyshev distance `tol` of some `to` pixel.
inline double matched_fraction(const PixelList& from, const PixelList& to, int tol)
{
    long hit = 0;
    for (const auto& [x, y] : from)
        for (const auto& [u, v] : to)
            if (std::max(std::abs(x - u), std::abs(y - v)) <= tol) {
                ++hit;
                break;
            }
    return static_cast<double>(hit) / static_cast<double>(from.size());
}

inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tol)
{
    const auto pb = boundary(pred), gb = boundary(gt);
    if (pb.empty() && gb.empty())
        return 1.0;
    if (pb.empty() || gb.empty())
        return 0.0;
    const double p = matched_fraction(pb, gb, tol);
    const double r = matched_fraction(gb, pb, tol);
    return p + r == 0.0 ? 0.0 : 2.0 * p * r / (p + r);
}

inline double recall(const std::vector<double>& ious, double t)
{
    long hits = 0;
    for (double v : ious)
        hits += v >= t ? 1 : 0;
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

// Random evaluation problem: each frame is two side-by-side halves, one per
// object; an empty ground-truth half means the object is absent there.
struct EvalCase {
    pseudovos::DatasetManifest manifest;
    pseudovos::Prediction prediction;
    // key "seq/id" -> frame -> (pred, gt) over the full frame, for every frame the object has a mask
    std::map<std::string, std::map<int, std::pair<BinaryMask, BinaryMask>>> annotated;
    std::map<std::string, std::vector<int>> eval_frames; // per sequence
};

inline BinaryMask place(const BinaryMask& half, int offset, int width)
{
    BinaryMask out(width, half.height());
    for (int y = 0; y < half.height(); ++y)
        for (int x = 0; x < half.width(); ++x)
            if (half.test(x, y))
                out.set(x + offset, y);
    return out;
}

// Consumes pairs (pred, gt) two per frame, `frames` frames per sequence.
inline EvalCase make_eval_case(const std::vector<std::pair<BinaryMask, BinaryMask>>& pairs, int frames)
{
    EvalCase c;
    c.manifest.name = "oracle";
    c.manifest.fps_annotation = 1;
    const int per_seq = 2 * frames;
    for (std::size_t start = 0; start + per_seq <= pairs.size(); start += per_seq) {
        const int w = pairs[start].first.width(), h = pairs[start].first.height();
        pseudovos::SequenceRecord seq;
        seq.id = "s" + std::to_string(start / per_seq);
        seq.width = 2 * w;
        seq.height = h;
        seq.native_fps = 1;
        for (int f = 0; f < frames; ++f)
            seq.frame_paths.push_back("unused");
        std::map<int, pseudovos::LabelMap> maps;
        for (int id = 1; id <= 2; ++id) {
            pseudovos::ObjectTrack track;
            track.id = id;
            for (int f = 0; f < frames; ++f) {
                const auto& [pred_half, gt_half] = pairs[start + 2 * f + (id - 1)];
                const BinaryMask pred = place(pred_half, (id - 1) * w, 2 * w);
                const BinaryMask gt = place(gt_half, (id - 1) * w, 2 * w);
                auto& map = maps.try_emplace(f, 2 * w, h).first->second;
                for (std::size_t i = 0; i < pred.size(); ++i)
                    if (pred[i])
                        map[i] = static_cast<std::uint8_t>(id);
                if (auto box = gt.tight_box()) {
                    track.boxes[f] = *box;
                    track.gt_masks[f] = pseudovos::rle_encode(gt);
                    c.annotated[seq.id + "/" + std::to_string(id)][f] = {pred, gt};
                }
            }
            if (!track.boxes.empty())
                seq.objects.push_back(track);
        }
        std::set<int> eval;
        for (const auto& o : seq.objects)
            for (const auto& [f, m] : o.gt_masks)
                eval.insert(f);
        c.eval_frames[seq.id] = {eval.begin(), eval.end()};
        c.prediction[seq.id] = std::move(maps);
        c.manifest.sequences.push_back(std::move(seq));
    }
    return c;
}

struct ObjectExpectation {
    double J = 0.0;
    double F = 0.0;
    std::vector<double> ious;
};

struct EvalExpectation {
    std::map<std::string, ObjectExpectation> objects;
    double J = 0.0, F = 0.0;
    std::map<double, double> recall;
};

inline EvalExpectation expected_report(const EvalCase& c, bool present_only, double tol_frac,
                                       const std::vector<double>& thresholds)
{
    EvalExpectation e;
    std::vector<double> pooled;
    for (const auto& seq : c.manifest.sequences) {
        const int tol = static_cast<int>(std::ceil(tol_frac * std::sqrt(double(seq.width) * seq.width + double(seq.height) * seq.height)));
        for (const auto& o : seq.objects) {
            const std::string key = seq.id + "/" + std::to_string(o.id);
            const auto& ann = c.annotated.at(key);
            ObjectExpectation oe;
            double fsum = 0.0;
            for (int f : c.eval_frames.at(seq.id)) {
                auto it = ann.find(f);
                BinaryMask gt(seq.width, seq.height);
                BinaryMask pred = c.prediction.at(seq.id).at(f).object_mask(o.id);
                if (it != ann.end())
                    gt = it->second.second;
                const bool present = it != ann.end();
                if (present_only && !present)
                    continue;
                const double j = oracle::iou(pred, gt);
                oe.ious.push_back(j);
                if (present)
                    pooled.push_back(j);
                fsum += oracle::boundary_f(pred, gt, tol);
            }
            double jsum = 0.0;
            for (double v : oe.ious)
                jsum += v;
            oe.J = jsum / static_cast<double>(oe.ious.size());
            oe.F = fsum / static_cast<double>(oe.ious.size());
            e.objects[key] = oe;
        }
    }
    for (const auto& [k, o] : e.objects) {
        e.J += o.J;
        e.F += o.F;
    }
    e.J /= static_cast<double>(e.objects.size());
    e.F /= static_cast<double>(e.objects.size());
    for (double t : thresholds)
        e.recall[t] = oracle::recall(pooled, t);
    return e;
}

// Random (pred, gt) pairs: gt is a blob mask, pred perturbs it or is independent.
inline std::vector<std::pair<BinaryMask, BinaryMask>> random_pairs(std::mt19937_64& rng, std::size_t n, int w, int h)
{
    std::vector<std::pair<BinaryMask, BinaryMask>> out;
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    for (std::size_t i = 0; i < n; ++i) {
        BinaryMask gt = testing_support::random_blob_mask(rng, w, h);
        BinaryMask pred = gt;
        const double r = unit(rng);
        if (r < 0.3) {
            pred = testing_support::random_blob_mask(rng, w, h);
        } else if (r < 0.8) {
            for (std::size_t k = 0; k < pred.size(); ++k)
                if (unit(rng) < 0.05)
                    pred[k] = static_cast<std::uint8_t>(1 - pred[k]);
        } else if (r < 0.9) {
            pred = BinaryMask(w, h);
        }
        out.emplace_back(std::move(pred), std::move(gt));
    }
    return out;
}

} // namespace oracle
