#include "quantbsde/model.hpp"

#include "quantbsde/error.hpp"
#include "quantbsde/gaussian.hpp"

#include <algorithm>
#include <cmath>

namespace quantbsde {

namespace {

void check(const BlackScholesParams& p) {
    if (!(p.volatility > 0.0)) throw InvalidArgument("black-scholes: volatility must be > 0");
    if (!(p.strike > 0.0)) throw InvalidArgument("black-scholes: strike must be > 0");
    if (!std::isfinite(p.rate)) throw InvalidArgument("black-scholes: rate must be finite");
}

void check(const BergmanParams& p) {
    if (!(p.volatility > 0.0)) throw InvalidArgument("bergman: volatility must be > 0");
    if (!(p.lend_rate <= p.borrow_rate)) {
        throw InvalidArgument("bergman: lend rate must not exceed borrow rate");
    }
    if (!(p.strike_low > 0.0 && p.strike_low < p.strike_high)) {
        throw InvalidArgument("bergman: strikes must satisfy 0 < K1 < K2");
    }
    if (!std::isfinite(p.drift)) throw InvalidArgument("bergman: drift must be finite");
}

void check_oracle_domain(double t, double horizon, double y) {
    if (!(t < horizon)) throw InvalidArgument("black-scholes oracle: requires t < T");
    if (!(y > 0.0)) throw InvalidArgument("black-scholes oracle: requires y > 0");
}

}  // namespace

void validate(const FbsdeProblem& problem) {
    if (!problem.drift || !problem.diffusion || !problem.driver || !problem.terminal) {
        throw InvalidArgument("problem '" + problem.name + "': coefficient function missing");
    }
    if (!(problem.horizon > 0.0) || !std::isfinite(problem.horizon)) {
        throw InvalidArgument("problem '" + problem.name + "': horizon must be > 0");
    }
    if (!std::isfinite(problem.y0)) {
        throw InvalidArgument("problem '" + problem.name + "': y0 must be finite");
    }
    if (!(problem.diffusion_floor > 0.0)) {
        throw InvalidArgument("problem '" + problem.name + "': diffusion floor must be > 0");
    }
    const double s0 = problem.diffusion(problem.y0);
    if (!(std::abs(s0) > 0.0)) {
        throw InvalidArgument("problem '" + problem.name + "': sigma(y0) must be nonzero");
    }
}

double default_diffusion_floor(const ScalarFn& diffusion, double y0) {
    const double s0 = std::abs(diffusion(y0));
    const double scale = (y0 == 0.0) ? 1.0 : std::abs(y0);
    return 1e-8 * scale * s0;
}

double black_scholes_driver(const BlackScholesParams& p, double /*u*/, double v) {
    return -p.rate * v;
}

double bergman_driver(const BergmanParams& p, double u, double v) {
    const double r = p.lend_rate;
    return -r * u - ((p.drift - r) / p.volatility) * v -
           (p.borrow_rate - r) * std::min(u - v / p.volatility, 0.0);
}

FbsdeProblem make_black_scholes(const BlackScholesParams& p, double horizon, double y0) {
    check(p);
    FbsdeProblem problem;
    problem.name = "black-scholes";
    problem.drift = [r = p.rate](double y) { return r * y; };
    problem.diffusion = [s = p.volatility](double y) { return s * y; };
    problem.driver = [p](double, double, double u, double v) { return black_scholes_driver(p, u, v); };
    problem.terminal = [k = p.strike](double y) { return std::max(y - k, 0.0); };
    problem.horizon = horizon;
    problem.y0 = y0;
    problem.diffusion_floor = default_diffusion_floor(problem.diffusion, y0);
    problem.params = p;
    validate(problem);
    return problem;
}

FbsdeProblem make_bergman(const BergmanParams& p, double horizon, double y0) {
    check(p);
    FbsdeProblem problem;
    problem.name = "bergman";
    problem.drift = [mu = p.drift](double y) { return mu * y; };
    problem.diffusion = [s = p.volatility](double y) { return s * y; };
    problem.driver = [p](double, double, double u, double v) { return bergman_driver(p, u, v); };
    problem.terminal = [k1 = p.strike_low, k2 = p.strike_high](double y) {
        return std::max(y - k1, 0.0) - 2.0 * std::max(y - k2, 0.0);
    };
    problem.horizon = horizon;
    problem.y0 = y0;
    problem.diffusion_floor = default_diffusion_floor(problem.diffusion, y0);
    problem.params = p;
    validate(problem);
    return problem;
}

FbsdeProblem make_problem(const ModelSpec& spec) {
    if (spec.name == "black-scholes") {
        if (std::holds_alternative<std::monostate>(spec.params)) return make_black_scholes({}, spec.horizon, spec.y0);
        if (const auto* p = std::get_if<BlackScholesParams>(&spec.params)) {
            return make_black_scholes(*p, spec.horizon, spec.y0);
        }
    } else if (spec.name == "bergman") {
        if (std::holds_alternative<std::monostate>(spec.params)) return make_bergman({}, spec.horizon, spec.y0);
        if (const auto* p = std::get_if<BergmanParams>(&spec.params)) return make_bergman(*p, spec.horizon, spec.y0);
    } else {
        throw InvalidArgument("unknown model '" + spec.name + "' (expected black-scholes or bergman)");
    }
    throw InvalidArgument("model '" + spec.name + "': parameters belong to a different model");
}

double bs_d1(const BlackScholesParams& p, double t, double horizon, double y) {
    check(p);
    check_oracle_domain(t, horizon, y);
    const double tau = horizon - t;
    return (std::log(y / p.strike) + (p.rate + 0.5 * p.volatility * p.volatility) * tau) /
           (p.volatility * std::sqrt(tau));
}

double bs_price(const BlackScholesParams& p, double t, double horizon, double y) {
    const double d1 = bs_d1(p, t, horizon, y);
    const double tau = horizon - t;
    const double d2 = d1 - p.volatility * std::sqrt(tau);
    return y * gaussian::normal_cdf(d1) -
           p.strike * std::exp(-p.rate * tau) * gaussian::normal_cdf(d2);
}

double bs_control(const BlackScholesParams& p, double t, double horizon, double y) {
    return gaussian::normal_cdf(bs_d1(p, t, horizon, y)) * p.volatility * y;
}

}  // namespace quantbsde
