#pragma once

#include <optional>
#include <vector>

#include "onehedge/market.hpp"

namespace onehedge {

// Corridor normalizers and moment constants of the explicit gamma formulas:
// Ai = [a^(qi-qj) - b^(qi-qj)]^-1 with j = 3-i, and Bi, Ci, Di the weighted
// endpoint differences entering gamma3, gamma2, gamma1 respectively.
struct GammaCoefficients {
    double A1, A2;
    double B1, B2;
    double C1, C2;
    double D1, D2;
};

GammaCoefficients gamma_coefficients(const Corridor& c, const MarketParams& p);

struct GammaTriple {
    double g1, g2, g3;
};

// gamma_i(x) = E_x[ int_0^tau e^{-2ru} g_i(S_u) du ] with g1 = sigma^2 x^2,
// g2 = g1 P', g3 = g1 P'^2, in closed form, together with derivatives.
GammaTriple gamma_functions(double x, const Corridor& c, const MarketParams& p);
GammaTriple gamma_derivatives(double x, const Corridor& c, const MarketParams& p);
GammaTriple gamma_second_derivatives(double x, const Corridor& c, const MarketParams& p);

// Optimal post-trade holding Gamma = gamma2/gamma1 on (a,b). At the corridor
// endpoints the 0/0 form is resolved by the derivative-ratio limit.
double gamma_post_trade(double x, const Corridor& c, const MarketParams& p);
double gamma_post_trade_prime(double x, const Corridor& c, const MarketParams& p);
double gamma_post_trade_limit_lower(const Corridor& c, const MarketParams& p);
double gamma_post_trade_limit_upper(const Corridor& c, const MarketParams& p);

// Residual cost of rebalancing at x to a holding zeta and keeping it to the
// corridor exit: M_hat(x, zeta) = zeta^2 gamma1 - 2 zeta gamma2 + gamma3.
double quadratic_cost(double x, double zeta, const Corridor& c, const MarketParams& p);

// M(x) = M_hat(x, Gamma(x)) on (a,b), extended by 0 at the endpoints.
double stopping_payoff(double x, const Corridor& c, const MarketParams& p);
double stopping_payoff_prime(double x, const Corridor& c, const MarketParams& p);
double stopping_payoff_second(double x, const Corridor& c, const MarketParams& p);

// Sign function G(x,h) = (L-2r)M(x) + f(x,h) in explicit form.
double sign_function(double x, double h, const Corridor& c, const MarketParams& p);

// Unique root of Gamma(.) = h, for h strictly between the endpoint limits.
double x_gamma(double h, const Corridor& c, const MarketParams& p);

enum class CaseTag { A1, A2, A3 };
const char* to_string(CaseTag tag);

// Sign pattern of G(., h) on the corridor. x_g1 is the crossing root (the
// lower one in case A2, where x_g2 holds the upper). Tangential roots are
// points where |G| dips to zero without changing sign.
struct CaseClassification {
    CaseTag tag = CaseTag::A2;
    double h = 0;
    double x_g1 = 0;
    std::optional<double> x_g2;
    std::vector<double> tangential_roots;
};

CaseClassification classify_case(double h, const Corridor& c, const MarketParams& p);

}  // namespace onehedge
