#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "json.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/loss.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/pseudolabel.hpp"
#include "pseudovos/synthetic.hpp"
#include "pseudovos/toy_model.hpp"

namespace pseudovos {

enum class NoiseKind {
    pixel_flip,   // every non-ignore pixel flips independently with probability rate
    mask_corrupt, // the whole sample is replaced by its box fill with probability rate
};

inline std::string to_string(NoiseKind k) { return k == NoiseKind::pixel_flip ? "pixel_flip" : "mask_corrupt"; }

inline NoiseKind parse_noise_kind(const std::string& s)
{
    if (s == "pixel_flip")
        return NoiseKind::pixel_flip;
    if (s == "mask_corrupt")
        return NoiseKind::mask_corrupt;
    fail(ErrorCategory::usage, "unknown noise kind '" + s + "' (expected pixel_flip or mask_corrupt)");
}

struct NoiseSpec {
    NoiseKind kind = NoiseKind::pixel_flip;
    double rate = 0.0;
    std::uint64_t seed = 0;

    void validate() const
    {
        require(rate >= 0.0 && rate <= 1.0, ErrorCategory::validation, "noise rate must lie in [0, 1]");
    }
};

// `box_channel` marks the box interior in the same frame as `labels` (used by mask_corrupt).
inline TargetMap apply_noise(TargetMap labels, const BinaryMask& box_channel, NoiseKind kind, double rate,
                             std::mt19937_64& rng)
{
    std::bernoulli_distribution coin(rate);
    if (kind == NoiseKind::pixel_flip) {
        for (auto& v : labels.data()) {
            if (v == kIgnore)
                continue;
            if (coin(rng))
                v = v == kBackground ? 1 : kBackground;
        }
        return labels;
    }
    require(box_channel.width() == labels.width() && box_channel.height() == labels.height(),
            ErrorCategory::validation, "box channel does not match the labels");
    if (coin(rng))
        for (std::size_t i = 0; i < labels.size(); ++i)
            if (labels[i] != kIgnore)
                labels[i] = box_channel[i] ? 1 : kBackground;
    return labels;
}

struct NoiseExperimentConfig {
    synthetic::CorpusSpec train_corpus{.sequences = 12, .frames = 1, .min_objects = 1, .max_objects = 1};
    synthetic::CorpusSpec val_corpus{.sequences = 12, .frames = 1, .min_objects = 1, .max_objects = 1};
    NoiseSpec noise;
    std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double tau = 3.0;
    int steps = 300;
    double learning_rate = 1.0;
    double margin_frac = 0.2;
    int crop_size = 32;
};

struct NoiseArmRow {
    std::uint64_t seed = 0;
    double j_plain = 0.0;
    double j_robust = 0.0;
    double delta() const { return j_robust - j_plain; }
    double final_loss_plain = 0.0;
    double final_loss_robust = 0.0;
};

struct NoiseReport {
    NoiseSpec noise;
    double tau = 3.0;
    std::vector<NoiseArmRow> rows;
    double mean_plain = 0.0;
    double mean_robust = 0.0;
    double mean_delta() const { return mean_robust - mean_plain; }
};

namespace detail {

struct CropSample {
    TrainingSample sample;
    BinaryMask box_channel;
};

inline std::vector<CropSample> crop_samples(const synthetic::Corpus& corpus, double margin_frac, int crop_size)
{
    BoxToMaskConverter conv;
    conv.margin_frac = margin_frac;
    conv.crop_size = crop_size;
    std::vector<CropSample> out;
    for (const auto& seq : corpus.manifest.sequences)
        for (const auto& obj : seq.objects)
            for (const auto& [f, box] : obj.boxes) {
                const ImageTensor& img = corpus.images.at(seq.id).at(static_cast<std::size_t>(f));
                const BinaryMask gt = resolve_mask(corpus.manifest, seq, obj.gt_masks.at(f));
                TrainingSample s = training_sample(conv, img, box, gt);
                BinaryMask bc(crop_size, crop_size);
                const int box_feature = s.features.dim - 1;
                for (std::size_t i = 0; i < bc.size(); ++i)
                    bc[i] = s.features.values[i * static_cast<std::size_t>(s.features.dim) + box_feature] > 0.5;
                out.push_back({std::move(s), std::move(bc)});
            }
    return out;
}

// Mean IoU of thresholded predictions against clean crop labels.
inline double mean_crop_iou(const ToyModel& model, const std::vector<CropSample>& samples)
{
    double sum = 0.0;
    for (const auto& cs : samples) {
        const Grid<double> p = predict_foreground(model, cs.sample.features);
        BinaryMask pred(p.width(), p.height());
        BinaryMask gt(p.width(), p.height());
        for (std::size_t i = 0; i < p.size(); ++i) {
            pred[i] = p[i] >= 0.5;
            gt[i] = cs.sample.labels[i] != kBackground && cs.sample.labels[i] != kIgnore;
        }
        sum += iou(pred, gt);
    }
    return samples.empty() ? 0.0 : sum / static_cast<double>(samples.size());
}

} // namespace detail

// Trains the toy model on noise-corrupted crop labels with plain and with partially
// Huberised cross entropy, then scores both on clean held-out crops.
inline NoiseReport noise_experiment(const NoiseExperimentConfig& cfg)
{
    cfg.noise.validate();
    require(!cfg.seeds.empty(), ErrorCategory::validation, "noise experiment needs at least one seed");
    NoiseReport report;
    report.noise = cfg.noise;
    report.tau = cfg.tau;
    report.rows.resize(cfg.seeds.size());
    for (std::size_t i = 0; i < cfg.seeds.size(); ++i)
        report.rows[i].seed = cfg.seeds[i];

    // One job per (seed, loss kind); each arm owns its data and model.
    detail::parallel_for(cfg.seeds.size() * 2, [&](std::size_t job) {
        const std::size_t si = job / 2;
        const bool robust = job % 2 == 1;
        const std::uint64_t seed = cfg.seeds[si];
        auto train_spec = cfg.train_corpus;
        auto val_spec = cfg.val_corpus;
        train_spec.seed = seed * 7919 + 1;
        val_spec.seed = seed * 7919 + 2;
        const auto train_corpus = synthetic::make_corpus(train_spec, "noise-train");
        const auto val_corpus = synthetic::make_corpus(val_spec, "noise-val");
        auto train_set = detail::crop_samples(train_corpus, cfg.margin_frac, cfg.crop_size);
        const auto val_set = detail::crop_samples(val_corpus, cfg.margin_frac, cfg.crop_size);
        require(!train_set.empty() && !val_set.empty(), ErrorCategory::validation, "noise experiment: empty corpus");

        // Both arms see the identical corruption for a given seed.
        std::mt19937_64 rng(cfg.noise.seed ^ (seed * 0x9E3779B97F4A7C15ull));
        std::vector<TrainingSample> noisy;
        for (auto& cs : train_set) {
            TrainingSample s = cs.sample;
            s.labels = apply_noise(std::move(s.labels), cs.box_channel, cfg.noise.kind, cfg.noise.rate, rng);
            noisy.push_back(std::move(s));
        }

        const LossConfig loss{robust ? LossKind::partially_huberised_ce : LossKind::plain_ce, cfg.tau};
        const int dim = noisy.front().features.dim;
        const auto result = train(ToyModel(dim), noisy, loss, {cfg.steps, cfg.learning_rate, false});
        const double j = detail::mean_crop_iou(result.model, val_set);
        auto& row = report.rows[si];
        (robust ? row.j_robust : row.j_plain) = j;
        (robust ? row.final_loss_robust : row.final_loss_plain) = result.loss_trace.back();
    });

    for (const auto& r : report.rows) {
        report.mean_plain += r.j_plain;
        report.mean_robust += r.j_robust;
    }
    report.mean_plain /= static_cast<double>(report.rows.size());
    report.mean_robust /= static_cast<double>(report.rows.size());
    return report;
}

inline nlohmann::json noise_report_to_json(const NoiseReport& r)
{
    nlohmann::json rows = nlohmann::json::array();
    for (const auto& row : r.rows)
        rows.push_back({{"seed", row.seed},
                        {"J_plain", row.j_plain},
                        {"J_robust", row.j_robust},
                        {"delta", row.delta()},
                        {"final_loss_plain", row.final_loss_plain},
                        {"final_loss_robust", row.final_loss_robust}});
    return {{"noise", {{"kind", to_string(r.noise.kind)}, {"rate", r.noise.rate}, {"seed", r.noise.seed}}},
            {"tau", r.tau},
            {"rows", rows},
            {"mean_J_plain", r.mean_plain},
            {"mean_J_robust", r.mean_robust},
            {"mean_delta", r.mean_delta()}};
}

} // namespace pseudovos
