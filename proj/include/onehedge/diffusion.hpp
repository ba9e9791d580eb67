#pragma once

#include <functional>
#include <span>

#include "onehedge/market.hpp"

namespace onehedge {

// Fundamental solutions of (L - 2r)v = 0 on a finite corridor, built from the
// monomials x^q1, x^q2, normalized so psi(a) = 0 (increasing) and phi(b) = 0
// (decreasing). The scale constant c is fixed to 1, so the reference
// Wronskian of the monomial pair is w_hat = q1 - q2.
struct FundamentalPair {
    double a, b;
    double q1, q2;
    double a_shift;    // a^(q1-q2), psi(x) = x^q1 - a_shift x^q2
    double b_shift;    // b^(q2-q1), phi(x) = x^q2 - b_shift x^q1
    double w_hat;      // q1 - q2
    double wronskian;  // w_hat (1 - (a/b)^(q1-q2))

    double psi(double x) const;
    double psi_prime(double x) const;
    double phi(double x) const;
    double phi_prime(double x) const;
};

FundamentalPair fundamental_pair(const Corridor& c, const MarketParams& p);

// Scale density s'(x) = x^-d and speed density m'(x) = 2 x^(d-2) / sigma^2.
double scale_density(double x, const MarketParams& p);
double speed_density(double x, const MarketParams& p);
// Antiderivative of the scale density.
double scale_function(double x, const MarketParams& p);

// Probability of leaving the corridor through b.
double exit_prob_upper(double x, const Corridor& c, const MarketParams& p);
// E_x[e^{-2 r tau} 1{exit at a}] and the analogue at b.
double exit_discount_lower(double x, const Corridor& c, const MarketParams& p);
double exit_discount_upper(double x, const Corridor& c, const MarketParams& p);

// E_x[ int_0^tau e^{-2ru} g(S_u) du ] by adaptive quadrature against the
// speed density. The integration is split at the supplied kink points.
double resolvent(double x, const std::function<double(double)>& g,
                 const Corridor& c, const MarketParams& p,
                 std::span<const double> kinks = {}, double rel_tol = 1e-10);

// Exact resolvent of the monomial g(z) = coef * z^power.
double resolvent_monomial(double x, double coef, double power,
                          const Corridor& c, const MarketParams& p);

}  // namespace onehedge
