#include <gtest/gtest.h>

#include <cmath>

#include "pseudovos/loss.hpp"

using namespace pseudovos;

namespace {

const LossConfig kPlain{LossKind::plain_ce, 3.0};
const LossConfig kRobust{LossKind::partially_huberised_ce, 3.0};

} // namespace

TEST(LossPlain, Values)
{
    EXPECT_DOUBLE_EQ(loss_plain(1.0), 0.0);
    EXPECT_NEAR(loss_plain(std::exp(-1.0)), 1.0, 1e-15);
    EXPECT_NEAR(loss_plain(0.5), std::log(2.0), 1e-15);
}

TEST(LossPlain, ZeroProbabilityIsFloored)
{
    EXPECT_DOUBLE_EQ(loss_plain(0.0), -std::log(kProbabilityFloor));
    EXPECT_TRUE(std::isfinite(loss_gradient(0.0, kPlain)));
}

TEST(LossPhuber, BranchPointFromBothSides)
{
    const double p = 1.0 / 3.0;
    EXPECT_NEAR(loss_phuber(p, 3.0), std::log(3.0), 1e-12);
    EXPECT_NEAR(-3.0 * p + std::log(3.0) + 1.0, -std::log(p), 1e-12);
}

TEST(LossPhuber, Values)
{
    EXPECT_DOUBLE_EQ(loss_phuber(1.0, 3.0), 0.0);
    EXPECT_NEAR(loss_phuber(0.1, 3.0), -0.3 + std::log(3.0) + 1.0, 1e-15);
    EXPECT_NEAR(loss_phuber(0.1, 3.0), 1.7986122886681098, 1e-12);
    EXPECT_NEAR(loss_phuber(0.0, 3.0), std::log(3.0) + 1.0, 1e-15);
}

TEST(LossPhuber, AgreesWithPlainAboveBranch)
{
    for (double p = 0.34; p <= 1.0; p += 0.01)
        EXPECT_DOUBLE_EQ(loss_phuber(p, 3.0), loss_plain(p));
}

TEST(LossPhuber, NeverExceedsPlain)
{
    for (int i = 1; i <= 10000; ++i) {
        const double p = i / 10000.0;
        EXPECT_LE(loss_phuber(p, 3.0), loss_plain(p) + 1e-15);
    }
}

TEST(LossGradient, Examples)
{
    EXPECT_DOUBLE_EQ(loss_gradient(0.01, kRobust), -3.0);
    EXPECT_DOUBLE_EQ(loss_gradient(0.01, kPlain), -100.0);
    EXPECT_DOUBLE_EQ(loss_gradient(1.0 / 3.0, kRobust), -3.0);
    EXPECT_NEAR(loss_gradient(std::nextafter(1.0 / 3.0, 1.0), kRobust), -3.0, 1e-12);
}

TEST(LossGradient, BoundedByTau)
{
    for (double tau : {1.5, 3.0, 10.0}) {
        const LossConfig cfg{LossKind::partially_huberised_ce, tau};
        for (int i = 1; i <= 100000; ++i)
            EXPECT_LE(std::abs(loss_gradient(i / 100000.0, cfg)), tau);
    }
}

TEST(LossGradient, MatchesCentralDifference)
{
    for (const auto& cfg : {kPlain, kRobust})
        for (double p = 0.05; p < 0.99; p += 0.0371) {
            if (std::abs(p - 1.0 / 3.0) < 1e-3)
                continue;
            const double h = 1e-6;
            const double fd = (loss_value(p + h, cfg) - loss_value(p - h, cfg)) / (2 * h);
            EXPECT_NEAR(loss_gradient(p, cfg), fd, 1e-6 * std::max(1.0, std::abs(fd)));
        }
}

TEST(LossConfig, RejectsTauAtMostOne)
{
    EXPECT_THROW((LossConfig{LossKind::partially_huberised_ce, 1.0}.validate()), Error);
    EXPECT_THROW(loss_phuber(0.5, 0.5), Error);
    EXPECT_NO_THROW((LossConfig{LossKind::plain_ce, 1.0}.validate()));
}

TEST(LossConfig, RejectsProbabilityOutOfRange)
{
    EXPECT_THROW(loss_plain(1.5), Error);
    EXPECT_THROW(loss_phuber(-0.1, 3.0), Error);
}

TEST(LossKind, ParseRoundTrip)
{
    for (auto k : {LossKind::plain_ce, LossKind::partially_huberised_ce})
        EXPECT_EQ(parse_loss_kind(to_string(k)), k);
    EXPECT_THROW(parse_loss_kind("mse"), Error);
}
