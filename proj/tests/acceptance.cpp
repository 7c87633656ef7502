// Acceptance checks: one PASS/FAIL line per criterion; exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "oracles.hpp"
#include "filter_fixture.hpp"
#include "pseudovos/gradcheck.hpp"
#include "pseudovos/loss.hpp"
#include "pseudovos/metrics.hpp"
#include "pseudovos/noise.hpp"
#include "pseudovos/pseudolabel.hpp"
#include "pseudovos/synthetic.hpp"
#include "support.hpp"

using namespace pseudovos;

namespace {

struct Outcome {
    bool pass = false;
    std::string detail;
};

int failures = 0;

void criterion(const std::string& name, double time_limit_s, const std::function<Outcome()>& body)
{
    const auto start = std::chrono::steady_clock::now();
    Outcome o;
    try {
        o = body();
    } catch (const std::exception& e) {
        o = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs < time_limit_s;
    const bool pass = o.pass && in_time;
    failures += pass ? 0 : 1;
    std::printf("%s  %-28s %s [%.2fs / limit %.0fs%s]\n", pass ? "PASS" : "FAIL", name.c_str(), o.detail.c_str(), secs,
                time_limit_s, in_time ? "" : ", too slow");
    std::fflush(stdout);
}

std::string fmt(const char* f, double a, double b = 0.0, double c = 0.0)
{
    char buf[256];
    std::snprintf(buf, sizeof buf, f, a, b, c);
    return buf;
}

Outcome loss_correctness()
{
    const double tau = 3.0;
    const double p = 1.0 / tau;
    const double linear = -tau * p + std::log(tau) + 1.0;
    const double ce = -std::log(p);
    const double value = loss_phuber(p, tau);
    const double err = std::max({std::abs(linear - std::log(3.0)), std::abs(ce - std::log(3.0)), std::abs(value - std::log(3.0))});

    const LossConfig cfg{LossKind::partially_huberised_ce, tau};
    double max_grad = 0.0;
    const int n = 1'000'000;
    for (int i = 1; i <= n; ++i)
        max_grad = std::max(max_grad, std::abs(loss_gradient(static_cast<double>(i) / n, cfg)));

    // One-sided slopes and values on either side of the branch point.
    const double h = 1e-9;
    const double left_slope = loss_gradient(p - h, cfg), right_slope = loss_gradient(p + h, cfg);
    const double value_gap = std::abs(loss_phuber(p - h, tau) - loss_phuber(p + h, tau));
    const double slope_gap = std::abs(left_slope - right_slope);
    const bool pass = err <= 1e-12 && max_grad <= tau && slope_gap <= 1e-6 && value_gap <= 1e-6;
    return {pass, fmt("|L(1/3)-ln3|=%.1e max|g|=%.6f slope gap=%.1e", err, max_grad, slope_gap)};
}

Outcome gradient_fidelity()
{
    std::mt19937_64 rng(2024);
    double worst = 0.0;
    double ignore_effect = 0.0;
    int with_ignore = 0;
    for (int i = 0; i < 100; ++i) {
        const auto inst = random_instance(rng, 8, 3, 0.2);
        for (LossKind kind : {LossKind::plain_ce, LossKind::partially_huberised_ce}) {
            const LossConfig cfg{kind, 3.0};
            worst = std::max(worst, finite_difference_check(inst.model, inst.sample, cfg).max_relative_error);

            // Perturbing the features of ignored pixels must leave loss and gradient unchanged.
            TrainingSample moved = inst.sample;
            bool any = false;
            std::normal_distribution<double> gauss(0.0, 5.0);
            for (std::size_t px = 0; px < moved.labels.size(); ++px)
                if (moved.labels[px] == kIgnore) {
                    any = true;
                    for (int d = 0; d < moved.features.dim; ++d)
                        moved.features.values[px * static_cast<std::size_t>(moved.features.dim) + static_cast<std::size_t>(d)] +=
                            gauss(rng);
                }
            with_ignore += any ? 1 : 0;
            const auto a = batch_loss(inst.model, inst.sample.features, inst.sample.labels, cfg);
            const auto b = batch_loss(inst.model, moved.features, moved.labels, cfg);
            ignore_effect = std::max(ignore_effect, std::abs(a.loss - b.loss));
            for (std::size_t k = 0; k < a.gradient.size(); ++k)
                ignore_effect = std::max(ignore_effect, std::abs(a.gradient[k] - b.gradient[k]));
        }
    }
    const bool pass = worst < 1e-4 && ignore_effect == 0.0 && with_ignore > 0;
    return {pass, fmt("max rel err=%.2e, ignore perturbation effect=%.1e, %.0f loss/instance pairs with ignore", worst,
                      ignore_effect, with_ignore)};
}

Outcome metric_oracles()
{
    std::mt19937_64 rng(77);
    std::uniform_int_distribution<int> dim(1, 64);
    std::size_t iou_mismatch = 0, recall_mismatch = 0;
    double f_err = 0.0;
    std::vector<double> ious;
    for (int i = 0; i < 500; ++i) {
        const int w = dim(rng), h = dim(rng);
        const auto pair = oracle::random_pairs(rng, 1, w, h).front();
        const double j = iou(pair.first, pair.second);
        iou_mismatch += j != oracle::iou(pair.first, pair.second);
        ious.push_back(j);
        const int tol = static_cast<int>(std::ceil(0.008 * std::hypot(w, h)));
        for (int t : {tol, 0, 3})
            f_err = std::max(f_err, std::abs(boundary_f(pair.first, pair.second, t) - oracle::boundary_f(pair.first, pair.second, t)));
    }
    for (double t : {0.1, 0.3, 0.5, 0.7, 0.9, 0.999})
        recall_mismatch += recall_at(ious, t) != oracle::recall(ious, t);

    // evaluate() on 500 pairs arranged as 50 two-object sequences of 5 frames, halves up to 32x64.
    std::size_t eval_mismatch = 0;
    double eval_f_err = 0.0;
    std::uniform_int_distribution<int> half_w(1, 32);
    for (int chunk = 0; chunk < 50; ++chunk) {
        const auto c = oracle::make_eval_case(oracle::random_pairs(rng, 10, half_w(rng), dim(rng)), 5);
        for (auto mode : {EvalMode::present_only, EvalMode::conventional}) {
            const EvalConfig cfg{mode, 0.008, {0.5, 0.7}};
            const auto r = evaluate(c.prediction, c.manifest, cfg);
            const auto e = oracle::expected_report(c, mode == EvalMode::present_only, 0.008, {0.5, 0.7});
            if (r.per_object.size() != e.objects.size() || r.recall_at != e.recall) {
                ++eval_mismatch;
                continue;
            }
            for (const auto& [key, o] : e.objects) {
                const auto& got = r.per_object.at(key);
                eval_mismatch += got.per_frame_ious != o.ious;
                eval_f_err = std::max(eval_f_err, std::abs(got.F - o.F));
            }
            eval_f_err = std::max({eval_f_err, std::abs(r.J_mean - e.J), std::abs(r.F_mean - e.F)});
        }
    }
    const bool pass = iou_mismatch == 0 && recall_mismatch == 0 && f_err <= 1e-12 && eval_mismatch == 0 && eval_f_err <= 1e-12;
    return {pass, "iou/recall/evaluate mismatches=" + std::to_string(iou_mismatch + recall_mismatch + eval_mismatch) +
                      fmt(", max F err=%.1e, evaluate mean err=%.1e", f_err, eval_f_err)};
}

Outcome rle_round_trip()
{
    std::mt19937_64 rng(31);
    std::uniform_int_distribution<int> dim(1, 64);
    int failures_seen = 0, zero = 0, one = 0;
    for (int i = 0; i < 1000; ++i) {
        const int w = dim(rng), h = dim(rng);
        BinaryMask m;
        if (i % 10 == 0)
            m = BinaryMask(w, h);
        else if (i % 10 == 1)
            m = BinaryMask(w, h, 1);
        else
            m = i % 2 ? testing_support::random_noise_mask(rng, w, h) : testing_support::random_blob_mask(rng, w, h);
        zero += m.count() == 0;
        one += m.count() == m.size();
        failures_seen += rle_decode(rle_encode(m)) != m;
    }
    return {failures_seen == 0 && zero > 0 && one > 0,
            std::to_string(failures_seen) + " failures over 1000 masks (" + std::to_string(zero) + " all-zero, " +
                std::to_string(one) + " all-one)"};
}

Outcome effort()
{
    const auto full = effort_report(159976, 6459);
    const auto val = effort_report(59200, 12513);
    const std::string a = format_percent(full.manual_fraction, 1);
    const std::string b = full.reduction_factor ? fixed(*full.reduction_factor, 1) : "n/a";
    const std::string c = format_percent(val.manual_fraction, 1);
    return {a == "4.0%" && b == "24.8" && c == "21.1%", a + ", " + b + "x, " + c};
}

Outcome noise_direction()
{
    NoiseExperimentConfig cfg;
    cfg.noise = {NoiseKind::pixel_flip, 0.3, 0};
    const auto noisy = noise_experiment(cfg);
    cfg.noise.rate = 0.0;
    const auto clean = noise_experiment(cfg);
    const bool pass = cfg.seeds.size() >= 5 && noisy.mean_delta() >= 0.02 && std::abs(clean.mean_delta()) <= 0.02;
    return {pass, fmt("eta=0.3 delta=%+.4f (plain %.4f); eta=0 delta=%+.4f", noisy.mean_delta(), noisy.mean_plain,
                      clean.mean_delta())};
}

Outcome fine_tune_ordering()
{
    const std::vector<std::uint64_t> seeds{1, 2, 3, 4, 5};
    double j_none = 0.0, j_first = 0.0, j_middle = 0.0;
    const EvalConfig eval_cfg;
    for (auto seed : seeds) {
        synthetic::CorpusSpec spec;
        spec.seed = seed;
        const auto corpus = synthetic::make_corpus(spec);
        auto conv = BoxToMaskConverter::toy(3);
        conv.crop_size = 32;
        auto j_of = [&](GenerateStrategy s) {
            return evaluate(to_prediction(generate(corpus.manifest, conv, s, corpus.loader())), corpus.manifest, eval_cfg).J_mean;
        };
        j_none += j_of(GenerateStrategy::none);
        j_first += j_of(GenerateStrategy::first_frame_ft);
        j_middle += j_of(GenerateStrategy::middle_frame_ft);
    }
    const double n = static_cast<double>(seeds.size());
    j_none /= n;
    j_first /= n;
    j_middle /= n;
    return {j_middle >= j_first && j_first >= j_none,
            fmt("mean J middle=%.4f first=%.4f none=%.4f", j_middle, j_first, j_none)};
}

Outcome filtering()
{
    const auto fx = make_filter_fixture();
    const auto verdicts = oracle_verdicts(fx.labels, fx.manifest);
    const auto filtered = filter_labels(fx.labels, verdicts, 0.5);

    std::size_t ignored_objects = 0;
    for (const auto& [k, p] : filtered.provenance)
        ignored_objects += p.ignored;
    const LabelMap& map = filtered.frame("fx", 0);
    // Ignore pixels must form exactly the bad object's box.
    const auto ignore_box = map.object_mask(kIgnore).tight_box();
    const bool one_box = ignored_objects == 1 && filtered.provenance.at({"fx", 2, 0}).ignored && ignore_box &&
                         *ignore_box == fx.box2 && map.count(kIgnore) == static_cast<std::size_t>(fx.box2.area()) &&
                         map.object_mask(1) == fx.labels.frame("fx", 0).object_mask(1);

    // Training on the filtered frame: ignore pixels contribute exactly zero gradient.
    std::mt19937_64 rng(5);
    std::normal_distribution<double> gauss(0.0, 1.0);
    const int dim = feature_dim(3);
    FeatureMap f{map.width(), map.height(), dim, {}};
    f.values.resize(f.pixels() * static_cast<std::size_t>(dim));
    for (auto& v : f.values)
        v = gauss(rng);
    ToyModel model(dim);
    for (auto& p : model.params())
        p = gauss(rng);
    TargetMap target(map.width(), map.height());
    for (std::size_t i = 0; i < map.size(); ++i)
        target[i] = map[i] == kIgnore ? kIgnore : map[i] == kBackground ? kBackground : 1;
    double effect = 0.0;
    for (LossKind kind : {LossKind::plain_ce, LossKind::partially_huberised_ce}) {
        const LossConfig cfg{kind, 3.0};
        const auto base = batch_loss(model, f, target, cfg);
        FeatureMap moved = f;
        for (std::size_t i = 0; i < target.size(); ++i)
            if (target[i] == kIgnore)
                for (int d = 0; d < dim; ++d)
                    moved.values[i * static_cast<std::size_t>(dim) + static_cast<std::size_t>(d)] += 10.0 * gauss(rng);
        const auto other = batch_loss(model, moved, target, cfg);
        for (std::size_t k = 0; k < base.gradient.size(); ++k)
            effect = std::max(effect, std::abs(base.gradient[k] - other.gradient[k]));
        effect = std::max(effect, std::abs(base.loss - other.loss));
    }

    const bool idempotent = filter_labels(filtered, verdicts, 0.5) == filtered;
    return {one_box && effect == 0.0 && idempotent,
            std::string("ignore boxes=") + std::to_string(ignored_objects) + fmt(", ignore-pixel effect=%.1e", effect) +
                (idempotent ? ", idempotent" : ", NOT idempotent")};
}

Outcome primary_only_build()
{
    namespace fs = std::filesystem;
    const fs::path source(PSEUDOVOS_SOURCE_DIR), build(PSEUDOVOS_BINARY_DIR);
    bool secondary = false;
    for (const char* name : {"review-ui", "review_ui", "node_modules"})
        secondary = secondary || fs::exists(source / name) || fs::exists(build / name);
    return {!secondary, secondary ? "secondary component present" : "no review-ui sources or build products"};
}

} // namespace

int main()
{
    criterion("loss correctness", 1.0, loss_correctness);
    criterion("gradient fidelity", 10.0, gradient_fidelity);
    criterion("metric oracle equivalence", 30.0, metric_oracles);
    criterion("rle round-trip", 5.0, rle_round_trip);
    criterion("effort arithmetic", 1.0, effort);
    criterion("noise-robustness direction", 300.0, noise_direction);
    criterion("fine-tuning direction", 300.0, fine_tune_ordering);
    criterion("filtering semantics", 5.0, filtering);
    criterion("primary suite without secondary", 1.0, primary_only_build);
    std::printf("%s: %d criterion(s) failed\n", failures == 0 ? "ACCEPTED" : "REJECTED", failures);
    return failures == 0 ? 0 : 1;
}
