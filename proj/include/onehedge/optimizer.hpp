#pragma once

#include <map>
#include <mutex>
#include <vector>

#include "onehedge/boundary.hpp"

namespace onehedge {

// Memoizing boundary solver for a fixed (corridor, params). Cache keys are
// holdings quantized at 1e-12; safe for concurrent use.
class BoundarySolver {
  public:
    BoundarySolver(const Corridor& c, const MarketParams& p) : c_(c), p_(p) {}

    BoundarySolution solve(double h) const;
    const Corridor& corridor() const { return c_; }
    const MarketParams& params() const { return p_; }

  private:
    Corridor c_;
    MarketParams p_;
    mutable std::mutex mu_;
    mutable std::map<long long, BoundarySolution> cache_;
};

// Gamma computed on the continuation corridor (x1(h), x2(h)) of a solved h.
double gamma_hat(double x, const BoundarySolution& sol, const MarketParams& p);
double gamma_hat(double x, double h, const Corridor& c, const MarketParams& p);

// dV/dh(x, h) = 2 gamma_hat_1(x) (h - Gamma_hat_h(x)); zero in the stopping
// region where the optimal trade is immediate.
double dV_dh(double x, double h, const Corridor& c, const MarketParams& p);

struct HedgePlan {
    double x = 0;
    double h_star = 0;
    BoundarySolution sol;  // boundaries at h_star
    double value = 0;      // V(x, h_star)
    double residual = 0;   // |h_star - Gamma_hat(x)|
    std::vector<double> fixed_point_roots;
};

// Locates every root of h - Gamma_hat_h(x) on the interior of H by a sign
// scan refined with bisection and picks the one with the smallest V(x, h).
HedgePlan optimal_initial_holding(double x, const Corridor& c, const MarketParams& p);
HedgePlan optimal_initial_holding(double x, const BoundarySolver& solver);

// Scalar value function: V(x, h*(x)); zero at the corridor endpoints.
double scalar_value(double x, const Corridor& c, const MarketParams& p);

}  // namespace onehedge
