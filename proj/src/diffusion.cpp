#include "onehedge/diffusion.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <vector>

#include <boost/math/quadrature/gauss_kronrod.hpp>

#include "onehedge/errors.hpp"

namespace onehedge {

namespace {

void require_finite(const Corridor& c) {
    if (c.is_half_line()) throw DomainError("operation requires a finite corridor");
}

// Antiderivative of z^p, switching to log when p is numerically -1.
double power_antiderivative(double z, double p) {
    if (std::abs(p + 1.0) < 1e-9) return std::log(z);
    return std::pow(z, p + 1.0) / (p + 1.0);
}

double power_integral(double lo, double hi, double p) {
    return power_antiderivative(hi, p) - power_antiderivative(lo, p);
}

}  // namespace

double FundamentalPair::psi(double x) const {
    return std::pow(x, q1) - a_shift * std::pow(x, q2);
}

double FundamentalPair::psi_prime(double x) const {
    return q1 * std::pow(x, q1 - 1.0) - a_shift * q2 * std::pow(x, q2 - 1.0);
}

double FundamentalPair::phi(double x) const {
    return std::pow(x, q2) - b_shift * std::pow(x, q1);
}

double FundamentalPair::phi_prime(double x) const {
    return q2 * std::pow(x, q2 - 1.0) - b_shift * q1 * std::pow(x, q1 - 1.0);
}

FundamentalPair fundamental_pair(const Corridor& c, const MarketParams& p) {
    require_finite(c);
    FundamentalPair f;
    f.a = c.a;
    f.b = c.b;
    f.q1 = p.q1;
    f.q2 = p.q2;
    f.a_shift = std::pow(c.a, p.q1 - p.q2);
    f.b_shift = std::pow(c.b, p.q2 - p.q1);
    f.w_hat = p.q1 - p.q2;
    f.wronskian = f.w_hat * (1.0 - std::pow(c.a / c.b, p.q1 - p.q2));
    return f;
}

double scale_density(double x, const MarketParams& p) {
    return std::pow(x, -p.d);
}

double speed_density(double x, const MarketParams& p) {
    return 2.0 * std::pow(x, p.d - 2.0) / (p.sigma * p.sigma);
}

double scale_function(double x, const MarketParams& p) {
    return power_antiderivative(x, -p.d);
}

double exit_prob_upper(double x, const Corridor& c, const MarketParams& p) {
    require_finite(c);
    return (scale_function(x, p) - scale_function(c.a, p)) /
           (scale_function(c.b, p) - scale_function(c.a, p));
}

double exit_discount_lower(double x, const Corridor& c, const MarketParams& p) {
    const auto f = fundamental_pair(c, p);
    return f.phi(x) / f.phi(c.a);
}

double exit_discount_upper(double x, const Corridor& c, const MarketParams& p) {
    const auto f = fundamental_pair(c, p);
    return f.psi(x) / f.psi(c.b);
}

double resolvent(double x, const std::function<double(double)>& g,
                 const Corridor& c, const MarketParams& p,
                 std::span<const double> kinks, double rel_tol) {
    require_finite(c);
    if (!(x >= c.a && x <= c.b)) throw DomainError("spot outside corridor in resolvent");
    const auto f = fundamental_pair(c, p);
    if (x == c.a || x == c.b) return 0.0;

    auto segments = [&](double lo, double hi) {
        std::vector<double> pts{lo, hi};
        for (double k : kinks)
            if (k > lo && k < hi) pts.push_back(k);
        std::sort(pts.begin(), pts.end());
        return pts;
    };
    auto integrate = [&](const std::function<double(double)>& integrand, double lo, double hi) {
        using boost::math::quadrature::gauss_kronrod;
        const auto pts = segments(lo, hi);
        double total = 0.0;
        for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
            double err = 0.0;
            total += gauss_kronrod<double, 15>::integrate(integrand, pts[i], pts[i + 1], 14,
                                                          rel_tol, &err);
            const double scale = std::max(std::abs(total), 1e-300);
            if (err > 1e3 * rel_tol * scale) {
                throw NumericalError("resolvent quadrature did not converge on [" +
                                     std::to_string(pts[i]) + ", " + std::to_string(pts[i + 1]) +
                                     "], error estimate " + std::to_string(err));
            }
        }
        return total;
    };

    const double lower = integrate(
        [&](double z) { return f.psi(z) * g(z) * speed_density(z, p); }, c.a, x);
    const double upper = integrate(
        [&](double z) { return f.phi(z) * g(z) * speed_density(z, p); }, x, c.b);
    return (f.phi(x) * lower + f.psi(x) * upper) / f.wronskian;
}

double resolvent_monomial(double x, double coef, double power,
                          const Corridor& c, const MarketParams& p) {
    require_finite(c);
    if (!(x >= c.a && x <= c.b)) throw DomainError("spot outside corridor in resolvent");
    const auto f = fundamental_pair(c, p);
    if (x == c.a || x == c.b) return 0.0;
    const double m0 = 2.0 / (p.sigma * p.sigma);
    const double p1 = p.q1 + power + p.d - 2.0;
    const double p2 = p.q2 + power + p.d - 2.0;
    const double lower = m0 * (power_integral(c.a, x, p1) - f.a_shift * power_integral(c.a, x, p2));
    const double upper = m0 * (power_integral(x, c.b, p2) - f.b_shift * power_integral(x, c.b, p1));
    return coef * (f.phi(x) * lower + f.psi(x) * upper) / f.wronskian;
}

}  // namespace onehedge
