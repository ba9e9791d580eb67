#pragma once

#include "onehedge/market.hpp"

namespace onehedge {

// Sign function of the zero-mean half-line problem: sigma^2 x^2 h (h - 2 P'(x)).
// Its unique root on (a, infinity) for interior h is x_p(h/2).
double sign_function_infinite(double x, double h, const MarketParams& p);

// M_inf(x) = E_x[ int_0^{tau_a} e^{-2ru} (P'(S_u))^2 sigma^2 S_u^2 du ] on
// [a, infinity), in closed form.
double payoff_infinite(double x, double a, const MarketParams& p);
double payoff_infinite_prime(double x, double a, const MarketParams& p);

// One-sided free boundary of the zero-mean problem: continuation set (a, x_star),
// candidate value c1 x^q1 + c2 x^q2 + particular, post-trade holding 0.
struct HalfLineSolution {
    double h = 0;
    double a = 0;
    double x_star = 0;
    double c1 = 0, c2 = 0;
    double post_trade_holding = 0;  // the optimal trade clears the position
};

HalfLineSolution solve_boundary_infinite(double h, double a, const MarketParams& p);

double half_line_value(double x, const HalfLineSolution& sol, const MarketParams& p);

// Non-zero-mean superhedge: start short h = P'(a) stocks, rebalance the whole
// wealth into stock when the discounted price falls to s_hat.
struct SuperhedgePlan {
    double x = 0;           // initial spot
    double a = 0;           // lower threshold
    double h = 0;           // initial holding P'(a)
    double m0 = 0;          // initial bond value P(x) - h x
    double s_hat = 0;       // discounted-price rebalance threshold
    double h1 = 0;          // post-trade holding P(a)/a
    double spot_at_trade = 0;  // undiscounted trade trigger at t = 0
};

SuperhedgePlan superhedge_plan(double x, double a, const MarketParams& p);

}  // namespace onehedge
