#pragma once

#include <functional>
#include <string>
#include <variant>

namespace quantbsde {

using ScalarFn = std::function<double(double)>;
// Driver f(t, y, u, v) of the backward equation.
using DriverFn = std::function<double(double, double, double, double)>;

struct BlackScholesParams {
    double rate = 0.04;
    double volatility = 0.25;
    double strike = 100.0;
};

struct BergmanParams {
    double drift = 0.05;
    double volatility = 0.2;
    double lend_rate = 0.01;
    double borrow_rate = 0.06;
    double strike_low = 95.0;
    double strike_high = 105.0;
};

using ModelParams = std::variant<std::monostate, BlackScholesParams, BergmanParams>;

// Decoupled Markovian FBSDE in one dimension:
//   dY = b(Y) dt + sigma(Y) dW,  Y_0 = y0,
//   U_t = h(Y_T) + int_t^T f(s, Y, U, V) ds - int_t^T V dW.
// Immutable after construction; all callables must be pure.
struct FbsdeProblem {
    std::string name;
    ScalarFn drift;
    ScalarFn diffusion;
    DriverFn driver;
    ScalarFn terminal;
    double horizon = 1.0;
    double y0 = 0.0;
    // Lower bound on |sigma| used wherever sigma is inverted or a variance is formed.
    double diffusion_floor = 0.0;
    // Parameters of the built-in model, when the problem came from one.
    ModelParams params;
};

// Checks horizon > 0, finite y0, sigma(y0) > 0, diffusion_floor > 0, and that all
// callables are set. Throws InvalidArgument.
void validate(const FbsdeProblem& problem);

// Default floor 1e-8 * |y0| * |sigma(y0)|, or 1e-8 * |sigma(y0)| when y0 == 0.
double default_diffusion_floor(const ScalarFn& diffusion, double y0);

FbsdeProblem make_black_scholes(const BlackScholesParams& p, double horizon, double y0);
FbsdeProblem make_bergman(const BergmanParams& p, double horizon, double y0);

// Drivers exposed separately so their algebra can be tested without a problem.
double black_scholes_driver(const BlackScholesParams& p, double u, double v);
double bergman_driver(const BergmanParams& p, double u, double v);

// Built-in model selected by name ("black-scholes" or "bergman") with its parameters.
struct ModelSpec {
    std::string name = "black-scholes";
    ModelParams params = BlackScholesParams{};
    double horizon = 1.0;
    double y0 = 100.0;
};

// Throws InvalidArgument for an unknown name or parameters of the wrong model.
FbsdeProblem make_problem(const ModelSpec& spec);

// Closed-form Black-Scholes call price and BSDE control N(d1) * sigma * y.
// Throw InvalidArgument for t >= T or y <= 0.
double bs_d1(const BlackScholesParams& p, double t, double horizon, double y);
double bs_price(const BlackScholesParams& p, double t, double horizon, double y);
double bs_control(const BlackScholesParams& p, double t, double horizon, double y);

}  // namespace quantbsde
