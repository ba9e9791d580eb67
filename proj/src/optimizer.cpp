#include "onehedge/optimizer.hpp"

#include <cmath>
#include <limits>
#include <optional>
#include <string>

#include "onehedge/errors.hpp"

namespace onehedge {

BoundarySolution BoundarySolver::solve(double h) const {
    const long long key = std::llround(h / 1e-12);
    {
        std::lock_guard<std::mutex> lock(mu_);
        auto it = cache_.find(key);
        if (it != cache_.end()) return it->second;
    }
    BoundarySolution sol = solve_boundaries(h, c_, p_);
    std::lock_guard<std::mutex> lock(mu_);
    return cache_.emplace(key, std::move(sol)).first->second;
}

double gamma_hat(double x, const BoundarySolution& sol, const MarketParams& p) {
    if (!(x >= sol.x1 && x <= sol.x2)) {
        throw DomainError("gamma_hat: spot " + std::to_string(x) +
                          " in the stopping region of h = " + std::to_string(sol.h));
    }
    const Corridor inner{sol.x1, sol.x2};
    return gamma_post_trade(x, inner, p);
}

double gamma_hat(double x, double h, const Corridor& c, const MarketParams& p) {
    return gamma_hat(x, solve_boundaries(h, c, p), p);
}

double dV_dh(double x, double h, const Corridor& c, const MarketParams& p) {
    if (!(x > c.a && x < c.b)) throw DomainError("dV_dh: spot outside the open corridor");
    const auto sol = solve_boundaries(h, c, p);
    if (!(x > sol.x1 && x < sol.x2)) return 0.0;  // tau* = 0
    const Corridor inner{sol.x1, sol.x2};
    const auto g = gamma_functions(x, inner, p);
    return 2.0 * g.g1 * (h - g.g2 / g.g1);
}

HedgePlan optimal_initial_holding(double x, const BoundarySolver& solver) {
    const Corridor& c = solver.corridor();
    const MarketParams& p = solver.params();
    if (!(x > c.a && x < c.b)) {
        throw DomainError("optimal_initial_holding: spot " + std::to_string(x) +
                          " must lie strictly inside the corridor");
    }
    const double ha = put_delta(c.a, p), hb = put_delta(c.b, p);
    const double eps = 1e-9 * (hb - ha);

    // Fixed-point gap h - Gamma_hat_h(x); undefined where x stops immediately.
    auto gap = [&](double h) -> std::optional<double> {
        BoundarySolution sol;
        try {
            sol = solver.solve(h);
        } catch (const Error&) {
            return std::nullopt;
        }
        if (!(x > sol.x1 && x < sol.x2)) return std::nullopt;
        const Corridor inner{sol.x1, sol.x2};
        const auto g = gamma_functions(x, inner, p);
        return h - g.g2 / g.g1;
    };

    constexpr int kGrid = 256;
    std::vector<double> hs(kGrid);
    std::vector<std::optional<double>> gs(kGrid);
    for (int i = 0; i < kGrid; ++i) {
        hs[i] = ha + eps + (hb - ha - 2 * eps) * i / (kGrid - 1.0);
        gs[i] = gap(hs[i]);
    }

    std::vector<double> roots;
    for (int i = 0; i + 1 < kGrid; ++i) {
        if (!gs[i] || !gs[i + 1] || *gs[i] * *gs[i + 1] > 0.0) continue;
        double lo = hs[i], hi = hs[i + 1], flo = *gs[i];
        bool ok = true;
        for (int it = 0; it < 110 && hi - lo > 1e-13; ++it) {
            const double mid = 0.5 * (lo + hi);
            const auto fm = gap(mid);
            if (!fm) {
                ok = false;
                break;
            }
            if (flo * *fm <= 0.0) {
                hi = mid;
            } else {
                lo = mid;
                flo = *fm;
            }
        }
        if (ok) roots.push_back(0.5 * (lo + hi));
    }
    if (roots.empty()) {
        throw NumericalError("optimal_initial_holding: no fixed-point bracket at x = " +
                             std::to_string(x));
    }

    HedgePlan plan;
    plan.x = x;
    plan.fixed_point_roots = roots;
    double best = std::numeric_limits<double>::infinity();
    for (double h : roots) {
        const auto sol = solver.solve(h);
        const double v = value(x, h, sol, c, p);
        if (v < best) {
            best = v;
            plan.h_star = h;
            plan.sol = sol;
            plan.value = v;
        }
    }
    const auto g = gap(plan.h_star);
    plan.residual = g ? std::abs(*g) : std::numeric_limits<double>::quiet_NaN();
    if (!(plan.residual <= 1e-8)) {
        throw NumericalError("optimal_initial_holding: fixed-point residual " +
                             std::to_string(plan.residual) + " exceeds tolerance");
    }
    return plan;
}

HedgePlan optimal_initial_holding(double x, const Corridor& c, const MarketParams& p) {
    return optimal_initial_holding(x, BoundarySolver(c, p));
}

double scalar_value(double x, const Corridor& c, const MarketParams& p) {
    if (!(x >= c.a && x <= c.b)) throw DomainError("scalar_value: spot outside corridor");
    if (x == c.a || x == c.b) return 0.0;
    return optimal_initial_holding(x, c, p).value;
}

}  // namespace onehedge
