#include <gtest/gtest.h>

#include <cmath>
#include <random>

#include "nnc/log_sum_exp.hpp"

using namespace nnc;

TEST(Lse, NegInfIsIdentity) {
    EXPECT_EQ(lse(kNegInf, 1.25), 1.25);
    EXPECT_EQ(lse(-3.5, kNegInf), -3.5);
    EXPECT_EQ(lse(kNegInf, kNegInf), kNegInf);
}

TEST(Lse, ZeroZero) { EXPECT_NEAR(lse(0.0, 0.0), std::log(2.0), 1e-15); }

TEST(Lse, SymmetricAndAccurate) {
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-20.0, 20.0);
    for (int i = 0; i < 100000; ++i) {
        const double a = u(rng), b = u(rng);
        EXPECT_EQ(lse(a, b), lse(b, a));
        const double direct = std::log(std::exp(a) + std::exp(b));
        ASSERT_NEAR(lse(a, b), direct, 1e-12) << a << ' ' << b;
    }
}

TEST(Lse, LargeGapsAndInfinity) {
    EXPECT_EQ(lse(0.0, -100.0), 0.0);
    EXPECT_EQ(lse(1000.0, 999.0), 1000.0 + std::log1p(std::exp(-1.0)));
    EXPECT_NEAR(lse(1000.0, 999.0), 1000.31326168751822, 1e-12);
}

TEST(Lse, ExpAndLog1pKernels) {
    for (double x = -40.0; x <= 0.0; x += 0.001) {
        ASSERT_NEAR(detail::exp_nonpositive(x), std::exp(x), 4e-16 * std::exp(x)) << x;
    }
    for (double u = 0.0; u <= 1.0; u += 1e-4) {
        ASSERT_NEAR(detail::log1p_unit(u), std::log1p(u), 4e-16) << u;
    }
}

TEST(Lse, SpanFold) {
    const std::vector<double> v{-1.0, 0.5, kNegInf, 2.0};
    const double ref = std::log(std::exp(-1.0) + std::exp(0.5) + std::exp(2.0));
    EXPECT_NEAR(lse(v), ref, 1e-14);
    EXPECT_EQ(lse(std::vector<double>{}), kNegInf);
}
