#include "oracles.hpp"
#include "quantbsde/error.hpp"
#include "quantbsde/model.hpp"

#include <gtest/gtest.h>

#include <cmath>
#include <limits>
#include <random>

using namespace quantbsde;

namespace {

// Discounted expectation e^{-r tau} E[(Y_T - K)^+] by quadrature over z above the kink.
double call_by_quadrature(const BlackScholesParams& p, double tau, double y) {
    const double s = p.volatility, r = p.rate;
    const double drift = (r - 0.5 * s * s) * tau, vol = s * std::sqrt(tau);
    const double z_star = (std::log(p.strike / y) - drift) / vol;
    auto payoff = [&](oracle::real z) { return y * std::exp(drift + vol * z) - p.strike; };
    const oracle::real inf = std::numeric_limits<oracle::real>::infinity();
    return std::exp(-r * tau) * static_cast<double>(oracle::gaussian_integral(payoff, z_star, inf, 0.0L, 1.0L, 1e-16L));
}

}  // namespace

TEST(BlackScholesModel, DriverAndPayoff) {
    const auto pb = make_black_scholes({0.04, 0.25, 100.0}, 1.0, 100.0);
    EXPECT_DOUBLE_EQ(pb.driver(0.3, 123.0, 5.0, 10.0), -0.4);
    // Independent of u and y.
    EXPECT_DOUBLE_EQ(pb.driver(0.0, 1.0, -7.0, 10.0), -0.4);
    EXPECT_DOUBLE_EQ(pb.driver(0.0, 1.0, 5.0, 0.0), 0.0);
    EXPECT_DOUBLE_EQ(pb.terminal(120.0), 20.0);
    EXPECT_DOUBLE_EQ(pb.terminal(80.0), 0.0);
    EXPECT_DOUBLE_EQ(pb.drift(100.0), 4.0);
    EXPECT_DOUBLE_EQ(pb.diffusion(100.0), 25.0);
    EXPECT_NEAR(pb.diffusion_floor, 1e-8 * 100.0 * 25.0, 1e-20);
    EXPECT_TRUE(std::holds_alternative<BlackScholesParams>(pb.params));
}

TEST(BlackScholesModel, RejectsInvalidParameters) {
    EXPECT_THROW(make_black_scholes({0.04, 0.0, 100.0}, 1.0, 100.0), InvalidArgument);
    EXPECT_THROW(make_black_scholes({0.04, 0.25, -1.0}, 1.0, 100.0), InvalidArgument);
    EXPECT_THROW(make_black_scholes({0.04, 0.25, 100.0}, 0.0, 100.0), InvalidArgument);
    // sigma(y0) = 0 at y0 = 0.
    EXPECT_THROW(make_black_scholes({0.04, 0.25, 100.0}, 1.0, 0.0), InvalidArgument);
}

TEST(BergmanModel, DriverMatchesFormula) {
    BergmanParams p{0.05, 0.2, 0.01, 0.06, 95.0, 105.0};
    EXPECT_NEAR(bergman_driver(p, 3.0, 10.0), 0.32, 1e-14);
    const auto pb = make_bergman(p, 0.25, 100.0);
    EXPECT_NEAR(pb.driver(0.0, 100.0, 3.0, 10.0), 0.32, 1e-14);
    // u - v / sigma >= 0: the borrowing term vanishes.
    EXPECT_DOUBLE_EQ(bergman_driver(p, 60.0, 10.0), -0.01 * 60.0 - 0.2 * 10.0);
    EXPECT_DOUBLE_EQ(pb.terminal(100.0), 5.0);
    EXPECT_DOUBLE_EQ(pb.terminal(90.0), 0.0);
    EXPECT_DOUBLE_EQ(pb.terminal(110.0), 15.0 - 10.0);
    EXPECT_DOUBLE_EQ(pb.terminal(200.0), 105.0 - 190.0);
}

TEST(BergmanModel, RejectsInvalidParameters) {
    EXPECT_THROW(make_bergman({0.05, 0.2, 0.07, 0.06, 95.0, 105.0}, 0.25, 100.0), InvalidArgument);
    EXPECT_THROW(make_bergman({0.05, 0.2, 0.01, 0.06, 105.0, 95.0}, 0.25, 100.0), InvalidArgument);
    EXPECT_THROW(make_bergman({0.05, -0.2, 0.01, 0.06, 95.0, 105.0}, 0.25, 100.0), InvalidArgument);
}

TEST(BergmanModel, DriverLipschitzBound) {
    BergmanParams p{0.05, 0.2, 0.01, 0.06, 95.0, 105.0};
    const double bound = p.lend_rate + (p.drift - p.lend_rate) / p.volatility +
                         (p.borrow_rate - p.lend_rate) * std::max(1.0, 1.0 / p.volatility);
    std::mt19937_64 rng(5);
    std::uniform_real_distribution<double> u(-50.0, 50.0);
    for (int i = 0; i < 20000; ++i) {
        const double u1 = u(rng), v1 = u(rng), u2 = u(rng), v2 = u(rng);
        const double df = std::abs(bergman_driver(p, u1, v1) - bergman_driver(p, u2, v2));
        ASSERT_LE(df, bound * (std::abs(u1 - u2) + std::abs(v1 - v2)) + 1e-12);
    }
}

TEST(MakeProblem, SelectsByName) {
    EXPECT_EQ(make_problem({"black-scholes", BlackScholesParams{}, 1.0, 100.0}).name, "black-scholes");
    EXPECT_EQ(make_problem({"bergman", std::monostate{}, 0.25, 100.0}).name, "bergman");
    EXPECT_THROW(make_problem({"heston", std::monostate{}, 1.0, 100.0}), InvalidArgument);
    EXPECT_THROW(make_problem({"bergman", BlackScholesParams{}, 1.0, 100.0}), InvalidArgument);
}

TEST(BlackScholesOracle, ReferencePriceAndControl) {
    const BlackScholesParams p{0.04, 0.25, 100.0};
    EXPECT_NEAR(bs_price(p, 0.0, 1.0, 100.0), 11.8370, 5e-4);
    EXPECT_NEAR(bs_d1(p, 0.0, 1.0, 100.0), 0.285, 1e-12);
    // Phi(0.285) from the series oracle, times sigma * y.
    const double expected_control = static_cast<double>(oracle::normal_cdf(0.285L)) * 25.0;
    EXPECT_NEAR(bs_control(p, 0.0, 1.0, 100.0), expected_control, 1e-10);
    EXPECT_NEAR(bs_control(p, 0.0, 1.0, 100.0), 15.3050, 1e-3);
}

TEST(BlackScholesOracle, Limits) {
    const BlackScholesParams p{0.04, 0.25, 100.0};
    const BlackScholesParams tiny_strike{0.04, 0.25, 1e-9};
    EXPECT_NEAR(bs_price(tiny_strike, 0.0, 1.0, 100.0), 100.0, 1e-8);
    EXPECT_NEAR(bs_control(p, 0.0, 1.0, 1e4), 0.25 * 1e4, 1e-6);
    EXPECT_NEAR(bs_control(p, 0.0, 1.0, 1.0), 0.0, 1e-12);
    EXPECT_THROW(bs_price(p, 1.0, 1.0, 100.0), InvalidArgument);
    EXPECT_THROW(bs_price(p, 0.0, 1.0, 0.0), InvalidArgument);
    EXPECT_THROW(bs_control(p, 2.0, 1.0, 100.0), InvalidArgument);
}

TEST(BlackScholesOracle, PriceMatchesQuadrature) {
    const BlackScholesParams p{0.04, 0.25, 100.0};
    EXPECT_NEAR(bs_price(p, 0.0, 1.0, 200.0), call_by_quadrature(p, 1.0, 200.0), 1e-8);
    std::mt19937_64 rng(29);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const BlackScholesParams q{-0.02 + 0.1 * u(rng), 0.05 + 0.6 * u(rng), 50.0 + 100.0 * u(rng)};
        const double tau = 0.05 + 2.0 * u(rng), y = 40.0 + 120.0 * u(rng);
        ASSERT_NEAR(bs_price(q, 0.0, tau, y), call_by_quadrature(q, tau, y), 1e-8) << "case " << i;
    }
}

TEST(BlackScholesOracle, ControlIsDeltaTimesSigmaY) {
    std::mt19937_64 rng(31);
    std::uniform_real_distribution<double> u(0.0, 1.0);
    for (int i = 0; i < 100; ++i) {
        const BlackScholesParams q{0.1 * u(rng), 0.1 + 0.4 * u(rng), 80.0 + 40.0 * u(rng)};
        const double tau = 0.1 + u(rng), y = 70.0 + 60.0 * u(rng);
        const double h = 1e-4 * y;
        const double delta = (bs_price(q, 0.0, tau, y + h) - bs_price(q, 0.0, tau, y - h)) / (2.0 * h);
        const double expected = delta * q.volatility * y;
        ASSERT_NEAR(bs_control(q, 0.0, tau, y), expected, 1e-6 * std::max(1.0, std::abs(expected))) << "case " << i;
    }
}
