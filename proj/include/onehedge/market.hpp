#pragma once

#include <utility>

namespace onehedge {

// Black-Scholes market dS = r S dt + sigma S dW with a perpetual American
// put of strike K written on S. Derived quantities are filled in by make().
struct MarketParams {
    double r = 0;       // risk-free rate per year
    double sigma = 0;   // volatility per sqrt-year
    double strike = 0;  // strike in currency

    double d = 0;      // 2 r / sigma^2
    double a_hat = 0;  // exercise boundary K / (1 + 1/d)
    double q1 = 0;     // positive root of q^2 + (d-1) q - 2d = 0
    double q2 = 0;     // negative root

    static MarketParams make(double r, double sigma, double strike);
};

// (q1, q2) with q1 > 0 > q2.
std::pair<double, double> characteristic_roots(const MarketParams& p);

// Re-assessment interval (a, b). b may be +infinity, in which case only the
// half-line operations accept the corridor.
struct Corridor {
    double a = 0;
    double b = 0;
    bool is_half_line() const;
};

Corridor make_corridor(double a, double b, const MarketParams& p);

// Price of the perpetual American put.
double put_price(double x, const MarketParams& p);

// Delta P'(x) = max{-(a_hat/x)^(1+d), -1}.
double put_delta(double x, const MarketParams& p);

// Unique x with put_delta(x) = h, for h in [-1, 0).
double x_p(double h, const MarketParams& p);

// Instantaneous squared tracking cost f(x, theta) = (theta - P'(x))^2 sigma^2 x^2.
double running_cost(double x, double theta, const MarketParams& p);

}  // namespace onehedge
