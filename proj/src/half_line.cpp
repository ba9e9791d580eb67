#include "onehedge/half_line.hpp"

#include <cmath>
#include <optional>
#include <string>

#include "onehedge/errors.hpp"

namespace onehedge {

namespace {

void require_threshold(double a, const MarketParams& p) {
    if (!(a >= p.a_hat * (1.0 - 1e-12))) {
        throw DomainError("half-line threshold " + std::to_string(a) +
                          " below the exercise boundary " + std::to_string(p.a_hat));
    }
}

double particular_at(double x, double h, const MarketParams& p) {
    const double g = h - (1.0 / p.d) * std::pow(p.a_hat, 1.0 + p.d) * std::pow(x, -1.0 - p.d);
    return -x * x * g * g;
}

double particular_prime(double x, double h, const MarketParams& p) {
    const double d = p.d;
    const double ah1d = std::pow(p.a_hat, 1.0 + d);
    const double ah2d = std::pow(p.a_hat, 2.0 + 2.0 * d);
    return -2.0 * h * h * x + (2.0 * h * (1.0 - d) / d) * ah1d * std::pow(x, -d) +
           (2.0 / d) * ah2d * std::pow(x, -2.0 * d - 1.0);
}

}  // namespace

double sign_function_infinite(double x, double h, const MarketParams& p) {
    if (!(x > 0)) throw DomainError("sign_function_infinite: spot must be positive");
    return p.sigma * p.sigma * x * x * h * (h - 2.0 * put_delta(x, p));
}

double payoff_infinite(double x, double a, const MarketParams& p) {
    require_threshold(a, p);
    if (!(x >= a)) throw DomainError("payoff_infinite: spot below the threshold");
    // Upper resolvent integrand decays like z^(q2-d-2); the closed form below
    // requires q2 - d - 1 < 0, which holds for every valid parameter set.
    const double u1 = p.q1 - p.d - 1.0;
    const double u2 = p.q2 - p.d - 1.0;
    if (!(u2 < 0.0)) {
        throw DivergentIntegral("payoff_infinite: upper integral diverges, q2 - d - 1 = " +
                                std::to_string(u2));
    }
    const double k = std::pow(p.a_hat, 2.0 + 2.0 * p.d) / (p.d * p.d);
    return k * (std::pow(a, u1) * std::pow(x, p.q2) - std::pow(x, -2.0 * p.d));
}

double payoff_infinite_prime(double x, double a, const MarketParams& p) {
    require_threshold(a, p);
    if (!(x >= a)) throw DomainError("payoff_infinite_prime: spot below the threshold");
    const double u1 = p.q1 - p.d - 1.0;
    const double k = std::pow(p.a_hat, 2.0 + 2.0 * p.d) / (p.d * p.d);
    return k * (p.q2 * std::pow(a, u1) * std::pow(x, p.q2 - 1.0) +
                2.0 * p.d * std::pow(x, -2.0 * p.d - 1.0));
}

HalfLineSolution solve_boundary_infinite(double h, double a, const MarketParams& p) {
    require_threshold(a, p);
    const double pda = put_delta(a, p);
    if (!(h >= pda - 1e-12 && h < 0.0)) {
        throw DomainError("solve_boundary_infinite: holding " + std::to_string(h) +
                          " outside [P'(a), 0)");
    }
    const double x_g = x_p(0.5 * h, p);

    // Coefficients from v(a) = 0 and v(y) = M_inf(y), in a scaled basis.
    auto coeffs = [&](double y) {
        const double x0 = std::sqrt(a * y);
        const double t1 = -particular_at(a, h, p);
        const double t2 = payoff_infinite(y, a, p) - particular_at(y, h, p);
        const double a11 = std::pow(a / x0, p.q1), a12 = std::pow(a / x0, p.q2);
        const double a21 = std::pow(y / x0, p.q1), a22 = std::pow(y / x0, p.q2);
        const double det = a11 * a22 - a12 * a21;
        const double s1 = (t1 * a22 - t2 * a12) / det;
        const double s2 = (a11 * t2 - a21 * t1) / det;
        return std::pair<double, double>{s1 / std::pow(x0, p.q1), s2 / std::pow(x0, p.q2)};
    };
    auto residual = [&](double y) {
        const auto [c1, c2] = coeffs(y);
        const double vp = c1 * p.q1 * std::pow(y, p.q1 - 1.0) +
                          c2 * p.q2 * std::pow(y, p.q2 - 1.0) + particular_prime(y, h, p);
        return vp - payoff_infinite_prime(y, a, p);
    };

    // Bracket the pasting residual on a geometric grid above x_g.
    double lo = x_g, hi = x_g, flo = residual(x_g);
    bool found = false;
    for (double y = x_g * 1.001; y < x_g * 1e6 && !found; y *= 1.03) {
        const double f = residual(y);
        if (flo * f <= 0.0) {
            hi = y;
            found = true;
        } else {
            lo = y;
            flo = f;
        }
    }
    if (!found) {
        throw NoBracket("solve_boundary_infinite: no pasting bracket above x_G = " +
                        std::to_string(x_g) + " for h = " + std::to_string(h));
    }
    for (int it = 0; it < 140 && hi - lo > 1e-13 * std::max(1.0, lo); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = residual(mid);
        if (flo * fm <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    const double x_star = 0.5 * (lo + hi);
    const auto [c1, c2] = coeffs(x_star);

    HalfLineSolution sol;
    sol.h = h;
    sol.a = a;
    sol.x_star = x_star;
    sol.c1 = c1;
    sol.c2 = c2;

    // Verification: v <= M_inf on (a, x_star), G >= 0 beyond x_star.
    double m_scale = 1e-300;
    for (int i = 1; i < 512; ++i) {
        const double x = a + (x_star - a) * i / 512.0;
        const double m = payoff_infinite(x, a, p);
        m_scale = std::max(m_scale, std::abs(m));
        if (half_line_value(x, sol, p) - m > 1e-8 * std::max(m_scale, 1.0)) {
            throw VerificationFailed("solve_boundary_infinite: v > M_inf inside (a, x*) at h = " +
                                     std::to_string(h));
        }
    }
    for (int i = 0; i < 64; ++i) {
        const double x = x_star * (1.0 + i / 8.0);
        if (sign_function_infinite(x, h, p) < -1e-10 * m_scale) {
            throw VerificationFailed("solve_boundary_infinite: G < 0 beyond x* at h = " +
                                     std::to_string(h));
        }
    }
    return sol;
}

double half_line_value(double x, const HalfLineSolution& sol, const MarketParams& p) {
    if (!(x >= sol.a)) throw DomainError("half_line_value: spot below the threshold");
    if (x >= sol.x_star) return payoff_infinite(x, sol.a, p);
    return sol.c1 * std::pow(x, p.q1) + sol.c2 * std::pow(x, p.q2) + particular_at(x, sol.h, p);
}

SuperhedgePlan superhedge_plan(double x, double a, const MarketParams& p) {
    require_threshold(a, p);
    if (!(x > a)) throw DomainError("superhedge_plan: spot must exceed the threshold");
    SuperhedgePlan plan;
    plan.x = x;
    plan.a = a;
    plan.h = put_delta(a, p);
    plan.m0 = put_price(x, p) - plan.h * x;
    plan.h1 = put_price(a, p) / a;
    plan.s_hat = plan.m0 / (plan.h1 - plan.h);
    plan.spot_at_trade = plan.s_hat;
    if (!(plan.m0 > 0.0)) {
        throw NumericalError("superhedge_plan: nonpositive initial bond value");
    }
    if (!(plan.s_hat < x) || !(plan.s_hat > a)) {
        throw NumericalError("superhedge_plan: rebalance threshold " +
                             std::to_string(plan.s_hat) + " outside (a, x)");
    }
    return plan;
}

}  // namespace onehedge
