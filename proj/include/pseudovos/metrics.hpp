#pragma once

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <map>
#include <string>
#include <vector>

#include "json.hpp"
#include "pseudovos/dataset.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/mask.hpp"

namespace pseudovos {

enum class EvalMode {
    conventional, // absent frames count; empty prediction there scores 1.0
    present_only, // only frames with a non-empty ground-truth mask count
};

inline std::string to_string(EvalMode m) { return m == EvalMode::conventional ? "conventional" : "present_only"; }

inline EvalMode parse_eval_mode(const std::string& s)
{
    if (s == "conventional")
        return EvalMode::conventional;
    if (s == "present_only")
        return EvalMode::present_only;
    fail(ErrorCategory::usage, "unknown eval mode '" + s + "' (expected conventional or present_only)");
}

struct EvalConfig {
    EvalMode mode = EvalMode::present_only;
    double boundary_tolerance_frac = 0.008;
    std::vector<double> recall_thresholds{0.5, 0.7};

    void validate() const
    {
        require(boundary_tolerance_frac > 0.0, ErrorCategory::validation, "boundary tolerance must be positive");
        for (double t : recall_thresholds)
            require(t > 0.0 && t < 1.0, ErrorCategory::validation, "recall thresholds must lie in (0, 1)");
    }

    int tolerance_px(int width, int height) const
    {
        return static_cast<int>(std::ceil(boundary_tolerance_frac * std::hypot(width, height)));
    }
};

// Foreground pixels with a 4-neighbour that is background or outside the image.
inline BinaryMask boundary_pixels(const BinaryMask& m)
{
    BinaryMask b(m.width(), m.height());
    const int w = m.width();
    const int h = m.height();
    for (int y = 0; y < h; ++y)
        for (int x = 0; x < w; ++x) {
            if (!m.test(x, y))
                continue;
            const bool edge = x == 0 || y == 0 || x == w - 1 || y == h - 1 || !m.test(x - 1, y) ||
                              !m.test(x + 1, y) || !m.test(x, y - 1) || !m.test(x, y + 1);
            b.set(x, y, edge);
        }
    return b;
}

// Square (Chebyshev) dilation with the given radius, done separably.
inline BinaryMask dilate_square(const BinaryMask& m, int radius)
{
    if (radius <= 0)
        return m;
    const int w = m.width();
    const int h = m.height();
    BinaryMask rows(w, h);
    for (int y = 0; y < h; ++y) {
        int last = -radius - 1; // most recent set column seen so far
        std::vector<int> next(static_cast<std::size_t>(w) + 1, w + radius + 1);
        for (int x = w - 1; x >= 0; --x)
            next[static_cast<std::size_t>(x)] = m.test(x, y) ? x : next[static_cast<std::size_t>(x) + 1];
        for (int x = 0; x < w; ++x) {
            if (m.test(x, y))
                last = x;
            const int nx = next[static_cast<std::size_t>(x)];
            rows.set(x, y, x - last <= radius || nx - x <= radius);
        }
    }
    BinaryMask out(w, h);
    for (int x = 0; x < w; ++x) {
        int last = -radius - 1;
        std::vector<int> next(static_cast<std::size_t>(h) + 1, h + radius + 1);
        for (int y = h - 1; y >= 0; --y)
            next[static_cast<std::size_t>(y)] = rows.test(x, y) ? y : next[static_cast<std::size_t>(y) + 1];
        for (int y = 0; y < h; ++y) {
            if (rows.test(x, y))
                last = y;
            out.set(x, y, y - last <= radius || next[static_cast<std::size_t>(y)] - y <= radius);
        }
    }
    return out;
}

// Contour F-measure with a Chebyshev tolerance in pixels.
inline double boundary_f(const BinaryMask& pred, const BinaryMask& gt, int tolerance)
{
    require_same_shape(pred, gt);
    require(tolerance >= 0, ErrorCategory::validation, "boundary tolerance must be non-negative");
    const BinaryMask pb = boundary_pixels(pred);
    const BinaryMask gb = boundary_pixels(gt);
    const std::size_t np = pb.count();
    const std::size_t ng = gb.count();
    if (np == 0 && ng == 0)
        return 1.0;
    if (np == 0 || ng == 0)
        return 0.0;
    const BinaryMask pd = dilate_square(pb, tolerance);
    const BinaryMask gd = dilate_square(gb, tolerance);
    std::size_t pred_hit = 0;
    std::size_t gt_hit = 0;
    for (std::size_t i = 0; i < pb.size(); ++i) {
        pred_hit += (pb[i] && gd[i]) ? 1 : 0;
        gt_hit += (gb[i] && pd[i]) ? 1 : 0;
    }
    const double precision = static_cast<double>(pred_hit) / static_cast<double>(np);
    const double recall = static_cast<double>(gt_hit) / static_cast<double>(ng);
    if (precision + recall == 0.0)
        return 0.0;
    return 2.0 * precision * recall / (precision + recall);
}

inline double recall_at(const std::vector<double>& ious, double threshold)
{
    require(!ious.empty(), ErrorCategory::validation, "recall_at: empty IoU list");
    require(threshold > 0.0 && threshold < 1.0, ErrorCategory::validation, "recall_at: threshold must lie in (0, 1)");
    const auto hits = std::count_if(ious.begin(), ious.end(), [&](double v) { return v >= threshold; });
    return static_cast<double>(hits) / static_cast<double>(ious.size());
}

using FrameMasks = std::map<int, BinaryMask>;

struct ObjectScore {
    double J = 0.0;
    double F = 0.0;
    std::vector<int> frames;          // contributing frames, ascending
    std::vector<double> per_frame_ious;
    std::vector<double> present_ious; // IoUs on frames with non-empty ground truth
};

// Scores one object. Ground-truth keys define the evaluated frames; an empty
// ground-truth mask marks a frame where the object is absent.
inline ObjectScore score_object(const FrameMasks& pred, const FrameMasks& gt, const EvalConfig& cfg)
{
    ObjectScore s;
    double f_sum = 0.0;
    double j_sum = 0.0;
    for (const auto& [frame, g] : gt) {
        auto it = pred.find(frame);
        require(it != pred.end(), ErrorCategory::validation, "missing prediction for frame " + std::to_string(frame));
        const BinaryMask& p = it->second;
        const bool present = !g.empty();
        if (cfg.mode == EvalMode::present_only && !present)
            continue;
        const double j = iou(p, g);
        s.frames.push_back(frame);
        s.per_frame_ious.push_back(j);
        if (present)
            s.present_ious.push_back(j);
        j_sum += j;
        f_sum += boundary_f(p, g, cfg.tolerance_px(g.width(), g.height()));
    }
    require(!s.frames.empty(), ErrorCategory::validation, "no contributing frames for object");
    s.J = j_sum / static_cast<double>(s.frames.size());
    s.F = f_sum / static_cast<double>(s.frames.size());
    return s;
}

inline double region_j(const FrameMasks& pred, const FrameMasks& gt, const EvalConfig& cfg)
{
    return score_object(pred, gt, cfg).J;
}

struct EvalReport {
    EvalMode mode = EvalMode::present_only;
    std::map<std::string, ObjectScore> per_object; // key "<sequence>/<object id>"
    double J_mean = 0.0;
    double F_mean = 0.0;
    double JF_mean = 0.0;
    std::map<double, double> recall_at;
};

// Dataset-level means: average per-object scores, recall pooled over present frames.
inline EvalReport aggregate(std::map<std::string, ObjectScore> per_object, const EvalConfig& cfg)
{
    require(!per_object.empty(), ErrorCategory::validation, "nothing to evaluate");
    EvalReport r;
    r.mode = cfg.mode;
    std::vector<double> pooled;
    for (const auto& [key, s] : per_object) {
        r.J_mean += s.J;
        r.F_mean += s.F;
        pooled.insert(pooled.end(), s.present_ious.begin(), s.present_ious.end());
    }
    const auto n = static_cast<double>(per_object.size());
    r.J_mean /= n;
    r.F_mean /= n;
    r.JF_mean = (r.J_mean + r.F_mean) / 2.0;
    if (!pooled.empty())
        for (double t : cfg.recall_thresholds)
            r.recall_at[t] = pseudovos::recall_at(pooled, t);
    r.per_object = std::move(per_object);
    return r;
}

// Predictions for one sequence, indexed by frame.
using SequencePrediction = std::map<int, LabelMap>;
using Prediction = std::map<std::string, SequencePrediction>;

inline EvalReport evaluate(const Prediction& pred, const DatasetManifest& manifest, const EvalConfig& cfg)
{
    cfg.validate();
    std::map<std::string, ObjectScore> scores;
    for (const auto& seq : manifest.sequences) {
        std::set<int> frames;
        for (const auto& o : seq.objects)
            for (const auto& [f, ref] : o.gt_masks)
                frames.insert(f);
        if (frames.empty())
            continue;
        auto sp = pred.find(seq.id);
        require(sp != pred.end(), ErrorCategory::validation, "missing prediction for sequence '" + seq.id + "'");
        for (int f : frames) {
            auto it = sp->second.find(f);
            require(it != sp->second.end(), ErrorCategory::validation,
                    "missing prediction for sequence '" + seq.id + "' frame " + std::to_string(f));
            require(it->second.width() == seq.width && it->second.height() == seq.height, ErrorCategory::validation,
                    "prediction size mismatch for sequence '" + seq.id + "' frame " + std::to_string(f));
        }
        for (const auto& o : seq.objects) {
            if (o.gt_masks.empty())
                continue;
            FrameMasks gt;
            FrameMasks pm;
            for (int f : frames) {
                const auto ref = o.gt_masks.find(f);
                if (ref != o.gt_masks.end())
                    gt.emplace(f, resolve_mask(manifest, seq, ref->second));
                else if (o.boxes.count(f) == 0)
                    gt.emplace(f, BinaryMask(seq.width, seq.height));
                else
                    continue; // present but unannotated: unknown ground truth
                pm.emplace(f, sp->second.at(f).object_mask(o.id));
            }
            try {
                scores.emplace(seq.id + "/" + std::to_string(o.id), score_object(pm, gt, cfg));
            } catch (const Error& e) {
                throw Error(e.category(), "sequence '" + seq.id + "' object " + std::to_string(o.id) + ": " + e.what());
            }
        }
    }
    return aggregate(std::move(scores), cfg);
}

inline std::string threshold_key(double t)
{
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", t);
    return buf;
}

inline nlohmann::json report_to_json(const EvalReport& r)
{
    nlohmann::json objects = nlohmann::json::array();
    for (const auto& [key, s] : r.per_object)
        objects.push_back({{"object", key}, {"J", s.J}, {"F", s.F}, {"frames", s.frames}, {"per_frame_ious", s.per_frame_ious}});
    nlohmann::json recall = nlohmann::json::object();
    nlohmann::json summary{{"J", fixed(100.0 * r.J_mean, 1)},
                           {"F", fixed(100.0 * r.F_mean, 1)},
                           {"J&F", fixed(100.0 * r.JF_mean, 1)}};
    for (const auto& [t, v] : r.recall_at) {
        recall[threshold_key(t)] = v;
        summary["recall@" + fixed(100.0 * t, 0) + "%"] = fixed(100.0 * v, 1);
    }
    return {{"mode", to_string(r.mode)},
            {"J_mean", r.J_mean},
            {"F_mean", r.F_mean},
            {"JF_mean", r.JF_mean},
            {"recall_at", recall},
            {"summary", summary},
            {"objects", objects}};
}

} // namespace pseudovos
