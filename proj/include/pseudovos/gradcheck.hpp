#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <random>
#include <vector>

#include "pseudovos/loss.hpp"
#include "pseudovos/mask.hpp"
#include "pseudovos/toy_model.hpp"

namespace pseudovos {

struct GradcheckInstance {
    ToyModel model;
    TrainingSample sample;
};

// Random model, features and labels on a size x size grid; about ignore_rate of
// the pixels carry the ignore label, and at least one pixel never does.
inline GradcheckInstance random_instance(std::mt19937_64& rng, int size = 8, int channels = 3,
                                         double ignore_rate = 0.2)
{
    std::normal_distribution<double> gauss(0.0, 1.0);
    std::uniform_real_distribution<double> unit(0.0, 1.0);
    const int dim = feature_dim(channels);
    GradcheckInstance inst{ToyModel(dim), {FeatureMap{size, size, dim, {}}, TargetMap(size, size)}};
    for (auto& p : inst.model.params())
        p = gauss(rng);
    auto& f = inst.sample.features;
    f.values.resize(f.pixels() * static_cast<std::size_t>(dim));
    for (auto& v : f.values)
        v = gauss(rng);
    auto& labels = inst.sample.labels;
    for (std::size_t i = 0; i < labels.size(); ++i) {
        const double r = unit(rng);
        labels[i] = r < ignore_rate ? kIgnore : (unit(rng) < 0.5 ? kBackground : 1);
    }
    if (labels[0] == kIgnore)
        labels[0] = 1;
    return inst;
}

struct GradcheckResult {
    double max_relative_error = 0.0;
    double max_absolute_error = 0.0;
    std::size_t parameters = 0;
};

// Relative error uses max(|analytic|, |numeric|, 1e-6) as the denominator.
inline GradcheckResult finite_difference_check(const ToyModel& model, const TrainingSample& sample,
                                               const LossConfig& cfg, double step = 1e-5)
{
    const auto analytic = batch_loss(model, sample.features, sample.labels, cfg).gradient;
    GradcheckResult r;
    r.parameters = analytic.size();
    ToyModel probe = model;
    for (std::size_t k = 0; k < analytic.size(); ++k) {
        const double orig = probe.params()[k];
        probe.params()[k] = orig + step;
        const double up = batch_loss(probe, sample.features, sample.labels, cfg).loss;
        probe.params()[k] = orig - step;
        const double down = batch_loss(probe, sample.features, sample.labels, cfg).loss;
        probe.params()[k] = orig;
        const double numeric = (up - down) / (2.0 * step);
        const double abs_err = std::abs(numeric - analytic[k]);
        const double denom = std::max({std::abs(numeric), std::abs(analytic[k]), 1e-6});
        r.max_absolute_error = std::max(r.max_absolute_error, abs_err);
        r.max_relative_error = std::max(r.max_relative_error, abs_err / denom);
    }
    return r;
}

} // namespace pseudovos
