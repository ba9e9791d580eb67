#pragma once

#include <optional>
#include <span>
#include <string>
#include <vector>

#include "onehedge/payoff.hpp"

namespace onehedge {

// Solution of the smooth-pasting system for a fixed initial holding h: the
// continuation set is (x1, x2) and the candidate value inside it is
// c1 x^q1 + c2 x^q2 + particular(x, h).
struct BoundarySolution {
    double h = 0;
    double x1 = 0, x2 = 0;
    double c1 = 0, c2 = 0;
    CaseClassification cls;
    bool lower_interior = false;  // x1 > a, smooth pasting holds at x1
    bool upper_interior = false;  // x2 < b
};

// General solution of (L-2r)v = -f(., h): homogeneous part plus the explicit
// particular solution -x^2 (h - d^{-1} (a_hat/x)^{1+d})^2.
double candidate_value(double x, double h, double c1, double c2, const MarketParams& p);
double candidate_prime(double x, double h, double c1, double c2, const MarketParams& p);
double candidate_second(double x, double h, double c1, double c2, const MarketParams& p);

BoundarySolution solve_boundaries(double h, const Corridor& c, const MarketParams& p);

// V(x, h): candidate value inside (x1, x2), stopping payoff outside.
double value(double x, double h, const BoundarySolution& sol, const Corridor& c,
             const MarketParams& p);

struct BoundaryCurveRow {
    double h = 0;
    double x1 = 0, x2 = 0, c1 = 0, c2 = 0;
    CaseTag tag = CaseTag::A2;
    bool ok = false;
    std::string error;
};

struct BoundaryCurves {
    std::vector<BoundaryCurveRow> rows;
    std::optional<double> h_alpha;  // first grid h with x1 > a
    std::optional<double> h_beta;   // first grid h with x2 = b
};

BoundaryCurves boundary_curves(std::span<const double> h_grid, const Corridor& c,
                               const MarketParams& p, bool parallel = true);

}  // namespace onehedge
