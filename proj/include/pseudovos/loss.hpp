#pragma once

#include <algorithm>
#include <cmath>
#include <string>

#include "pseudovos/error.hpp"

namespace pseudovos {

enum class LossKind { plain_ce, partially_huberised_ce };

inline std::string to_string(LossKind k) { return k == LossKind::plain_ce ? "plain_ce" : "partially_huberised_ce"; }

inline LossKind parse_loss_kind(const std::string& s)
{
    if (s == "plain_ce" || s == "plain")
        return LossKind::plain_ce;
    if (s == "partially_huberised_ce" || s == "phuber")
        return LossKind::partially_huberised_ce;
    fail(ErrorCategory::usage, "unknown loss '" + s + "' (expected plain_ce or partially_huberised_ce)");
}

// Plain cross entropy clamps p to this floor so -log p stays finite.
inline constexpr double kProbabilityFloor = 1e-12;

struct LossConfig {
    LossKind kind = LossKind::partially_huberised_ce;
    double tau = 3.0;

    void validate() const
    {
        if (kind == LossKind::partially_huberised_ce && !(tau > 1.0 && std::isfinite(tau)))
            fail(ErrorCategory::validation, "tau must be a finite value > 1, got " + std::to_string(tau));
    }
};

namespace detail {

inline void require_probability(double p)
{
    if (!(p >= 0.0 && p <= 1.0))
        fail(ErrorCategory::validation, "probability out of [0, 1]: " + std::to_string(p));
}

} // namespace detail

inline double loss_plain(double p)
{
    detail::require_probability(p);
    return -std::log(std::max(p, kProbabilityFloor));
}

// Linear below 1/tau, cross entropy above; value and slope match at the branch point.
inline double loss_phuber(double p, double tau)
{
    detail::require_probability(p);
    require(tau > 1.0, ErrorCategory::validation, "tau must be > 1");
    if (p <= 1.0 / tau)
        return -tau * p + std::log(tau) + 1.0;
    return -std::log(p);
}

inline double loss_value(double p, const LossConfig& cfg)
{
    return cfg.kind == LossKind::plain_ce ? loss_plain(p) : loss_phuber(p, cfg.tau);
}

// d loss / d p.
inline double loss_gradient(double p, const LossConfig& cfg)
{
    detail::require_probability(p);
    if (cfg.kind == LossKind::plain_ce)
        return -1.0 / std::max(p, kProbabilityFloor);
    cfg.validate();
    if (p <= 1.0 / cfg.tau)
        return -cfg.tau;
    return -1.0 / p;
}

} // namespace pseudovos
