#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "pseudovos/error.hpp"
#include "pseudovos/image.hpp"
#include "pseudovos/loss.hpp"
#include "pseudovos/mask.hpp"

namespace pseudovos {

// Per-pixel features, pixel-major: features[i * dim + k].
//
// Layout for an image with C channels:
//   [0, C)   intensities
//   C + 0    u  (horizontal position, -1..1 across the box)
//   C + 1    v  (vertical position, -1..1 across the box)
//   C + 2    u^2
//   C + 3    v^2
//   C + 4    u*v
//   C + 5    box channel (1 inside the box, 0 in the margin)
struct FeatureMap {
    int width = 0;
    int height = 0;
    int dim = 0;
    std::vector<double> values;

    std::size_t pixels() const noexcept { return static_cast<std::size_t>(width) * height; }
    std::span<const double> pixel(std::size_t i) const
    {
        return {values.data() + i * static_cast<std::size_t>(dim), static_cast<std::size_t>(dim)};
    }
};

inline constexpr int kGeometricFeatures = 6;

inline int feature_dim(int channels) { return channels + kGeometricFeatures; }

// `crop` holds the image channels followed by one box channel as produced by
// stacking the box mask onto the image before cropping.
inline FeatureMap extract_features(const ImageTensor& crop)
{
    require(crop.channels() >= 2, ErrorCategory::validation, "crop needs image channels plus a box channel");
    const int c_img = crop.channels() - 1;
    FeatureMap f{crop.width(), crop.height(), feature_dim(c_img), {}};
    f.values.resize(f.pixels() * static_cast<std::size_t>(f.dim));

    // Box extent inside the crop, from the box channel.
    int bx0 = crop.width(), by0 = crop.height(), bx1 = 0, by1 = 0;
    for (int y = 0; y < crop.height(); ++y)
        for (int x = 0; x < crop.width(); ++x)
            if (crop.at(c_img, x, y) > 0.5f) {
                bx0 = std::min(bx0, x);
                by0 = std::min(by0, y);
                bx1 = std::max(bx1, x + 1);
                by1 = std::max(by1, y + 1);
            }
    if (bx1 == 0) { // box vanished under resampling: fall back to the whole crop
        bx0 = by0 = 0;
        bx1 = crop.width();
        by1 = crop.height();
    }
    const double cx = 0.5 * (bx0 + bx1);
    const double cy = 0.5 * (by0 + by1);
    const double hx = 0.5 * (bx1 - bx0);
    const double hy = 0.5 * (by1 - by0);

    for (int y = 0; y < crop.height(); ++y)
        for (int x = 0; x < crop.width(); ++x) {
            double* v = f.values.data() + (static_cast<std::size_t>(y) * crop.width() + x) * f.dim;
            for (int c = 0; c < c_img; ++c)
                v[c] = crop.at(c, x, y);
            const double u = (x + 0.5 - cx) / hx;
            const double w = (y + 0.5 - cy) / hy;
            v[c_img + 0] = u;
            v[c_img + 1] = w;
            v[c_img + 2] = u * u;
            v[c_img + 3] = w * w;
            v[c_img + 4] = u * w;
            v[c_img + 5] = crop.at(c_img, x, y) > 0.5f ? 1.0 : 0.0;
        }
    return f;
}

// Two-class (background, foreground) softmax over a linear function of the features.
// Parameters are laid out per class as [weights..., bias].
class ToyModel {
public:
    static constexpr int kClasses = 2;

    ToyModel() = default;
    explicit ToyModel(int dim)
        : dim_(dim), params_(static_cast<std::size_t>(kClasses) * (dim + 1), 0.0)
    {
        require(dim >= 1, ErrorCategory::validation, "feature dimension must be positive");
    }

    // Logit gap sharpness * (1 - u^2 - v^2): the ellipse inscribed in the box.
    static ToyModel ellipse_prior(int channels, double sharpness = 4.0)
    {
        ToyModel m(feature_dim(channels));
        m.weight(1, channels + 2) = -sharpness;
        m.weight(1, channels + 3) = -sharpness;
        m.bias(1) = sharpness;
        return m;
    }

    int dim() const noexcept { return dim_; }
    int channels() const noexcept { return dim_ - kGeometricFeatures; }
    std::size_t num_params() const noexcept { return params_.size(); }

    double& weight(int cls, int k) { return params_[index(cls, k)]; }
    double weight(int cls, int k) const { return params_[index(cls, k)]; }
    double& bias(int cls) { return params_[index(cls, dim_)]; }
    double bias(int cls) const { return params_[index(cls, dim_)]; }

    std::vector<double>& params() noexcept { return params_; }
    const std::vector<double>& params() const noexcept { return params_; }

    std::array<double, kClasses> logits(std::span<const double> x) const
    {
        std::array<double, kClasses> z{};
        for (int c = 0; c < kClasses; ++c) {
            double acc = bias(c);
            const double* w = params_.data() + index(c, 0);
            for (int k = 0; k < dim_; ++k)
                acc += w[k] * x[static_cast<std::size_t>(k)];
            z[static_cast<std::size_t>(c)] = acc;
        }
        return z;
    }

    std::array<double, kClasses> probabilities(std::span<const double> x) const
    {
        const auto z = logits(x);
        const double m = std::max(z[0], z[1]);
        const double e0 = std::exp(z[0] - m);
        const double e1 = std::exp(z[1] - m);
        const double s = e0 + e1;
        return {e0 / s, e1 / s};
    }

    double foreground_probability(std::span<const double> x) const { return probabilities(x)[1]; }

    bool finite() const
    {
        return std::all_of(params_.begin(), params_.end(), [](double v) { return std::isfinite(v); });
    }

    friend bool operator==(const ToyModel&, const ToyModel&) = default;

private:
    std::size_t index(int cls, int k) const noexcept
    {
        return static_cast<std::size_t>(cls) * (dim_ + 1) + static_cast<std::size_t>(k);
    }

    int dim_ = 0;
    std::vector<double> params_;
};

inline void to_json(nlohmann::json& j, const ToyModel& m) { j = {{"dim", m.dim()}, {"params", m.params()}}; }

inline void from_json(const nlohmann::json& j, ToyModel& m)
{
    m = ToyModel(j.at("dim").get<int>());
    auto p = j.at("params").get<std::vector<double>>();
    require(p.size() == m.num_params(), ErrorCategory::parse, "toy model: parameter count mismatch");
    m.params() = std::move(p);
}

inline Grid<double> predict_foreground(const ToyModel& model, const FeatureMap& f)
{
    require(f.dim == model.dim(), ErrorCategory::validation, "feature dimension does not match the model");
    Grid<double> out(f.width, f.height);
    for (std::size_t i = 0; i < f.pixels(); ++i)
        out[i] = model.foreground_probability(f.pixel(i));
    return out;
}

// Target labels for the two-class model: 0 background, 255 ignore, anything else foreground.
using TargetMap = Grid<std::uint8_t>;

struct LossAndGradient {
    double loss = 0.0;
    std::vector<double> gradient; // same layout as ToyModel::params()
    std::size_t counted_pixels = 0;
};

namespace detail {

// Accumulates the summed loss and gradient over the non-ignore pixels of one sample.
inline void accumulate_loss(const ToyModel& model, const FeatureMap& f, const TargetMap& labels, const LossConfig& cfg,
                            LossAndGradient& acc)
{
    require(f.dim == model.dim(), ErrorCategory::validation, "feature dimension does not match the model");
    require(labels.width() == f.width && labels.height() == f.height, ErrorCategory::validation,
            "labels and features are not aligned");
    const int dim = model.dim();
    for (std::size_t i = 0; i < f.pixels(); ++i) {
        const std::uint8_t label = labels[i];
        if (label == kIgnore)
            continue;
        const int y = label == kBackground ? 0 : 1;
        const auto x = f.pixel(i);
        const auto p = model.probabilities(x);
        const double py = p[static_cast<std::size_t>(y)];
        ++acc.counted_pixels;

        // dl/dz_k = dl/dp_y * p_y * (delta_ky - p_k)
        double scale = 0.0;
        if (cfg.kind == LossKind::plain_ce) {
            acc.loss += -std::log(std::max(py, kProbabilityFloor));
            scale = py < kProbabilityFloor ? 0.0 : -1.0;
        } else if (py <= 1.0 / cfg.tau) {
            acc.loss += -cfg.tau * py + std::log(cfg.tau) + 1.0;
            scale = -cfg.tau * py;
        } else {
            acc.loss += -std::log(py);
            scale = -1.0;
        }
        if (scale == 0.0)
            continue;
        for (int k = 0; k < ToyModel::kClasses; ++k) {
            const double dz = scale * ((k == y ? 1.0 : 0.0) - p[static_cast<std::size_t>(k)]);
            double* g = acc.gradient.data() + static_cast<std::size_t>(k) * (dim + 1);
            for (int d = 0; d < dim; ++d)
                g[d] += dz * x[static_cast<std::size_t>(d)];
            g[dim] += dz;
        }
    }
}

} // namespace detail

struct TrainingSample {
    FeatureMap features;
    TargetMap labels;
};

// Mean loss over all non-ignore pixels of all samples, with its parameter gradient.
inline LossAndGradient batch_loss(const ToyModel& model, std::span<const TrainingSample> samples,
                                  const LossConfig& cfg)
{
    cfg.validate();
    LossAndGradient acc;
    acc.gradient.assign(model.num_params(), 0.0);
    for (const auto& s : samples)
        detail::accumulate_loss(model, s.features, s.labels, cfg, acc);
    require(acc.counted_pixels > 0, ErrorCategory::validation, "batch_loss: every pixel is ignored");
    const double n = static_cast<double>(acc.counted_pixels);
    acc.loss /= n;
    for (auto& g : acc.gradient)
        g /= n;
    return acc;
}

inline LossAndGradient batch_loss(const ToyModel& model, const FeatureMap& f, const TargetMap& labels,
                                  const LossConfig& cfg)
{
    const TrainingSample s{f, labels};
    return batch_loss(model, std::span<const TrainingSample>(&s, 1), cfg);
}

struct TrainResult {
    ToyModel model;
    std::vector<double> loss_trace; // loss before each step, then the final loss
};

struct TrainOptions {
    int steps = 300;
    double learning_rate = 0.5;
    // Return the lowest-loss parameters seen instead of the last iterate.
    bool keep_best = false;
};

// Full-batch gradient descent with a fixed learning rate.
inline TrainResult train(ToyModel model, std::span<const TrainingSample> samples, const LossConfig& cfg,
                         const TrainOptions& opt)
{
    require(!samples.empty(), ErrorCategory::validation, "train: empty dataset");
    require(opt.steps >= 0, ErrorCategory::validation, "train: steps must be non-negative");
    require(opt.learning_rate > 0.0, ErrorCategory::validation, "train: learning rate must be positive");
    TrainResult r;
    r.loss_trace.reserve(static_cast<std::size_t>(opt.steps) + 1);
    ToyModel best = model;
    double best_loss = 0.0;
    for (int step = 0; step <= opt.steps; ++step) {
        const auto lg = batch_loss(model, samples, cfg);
        if (!std::isfinite(lg.loss))
            fail(ErrorCategory::numeric, "train: loss became non-finite at step " + std::to_string(step) +
                                             " (learning rate " + std::to_string(opt.learning_rate) + ")");
        r.loss_trace.push_back(lg.loss);
        if (step == 0 || lg.loss < best_loss) {
            best_loss = lg.loss;
            best = model;
        }
        if (step == opt.steps)
            break;
        auto& p = model.params();
        for (std::size_t k = 0; k < p.size(); ++k)
            p[k] -= opt.learning_rate * lg.gradient[k];
        if (!model.finite())
            fail(ErrorCategory::numeric, "train: parameters became non-finite at step " + std::to_string(step));
    }
    r.model = opt.keep_best ? best : model;
    return r;
}

} // namespace pseudovos
