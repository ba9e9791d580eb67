#include "onehedge/market.hpp"

#include <cmath>
#include <limits>
#include <string>

#include "onehedge/errors.hpp"

namespace onehedge {

MarketParams MarketParams::make(double r, double sigma, double strike) {
    if (!(r > 0) || !std::isfinite(r)) throw DomainError("rate must be positive, got " + std::to_string(r));
    if (!(sigma > 0) || !std::isfinite(sigma)) throw DomainError("volatility must be positive, got " + std::to_string(sigma));
    if (!(strike > 0) || !std::isfinite(strike)) throw DomainError("strike must be positive, got " + std::to_string(strike));
    MarketParams p;
    p.r = r;
    p.sigma = sigma;
    p.strike = strike;
    p.d = 2.0 * r / (sigma * sigma);
    p.a_hat = strike / (1.0 + 1.0 / p.d);
    const double t = 1.0 - p.d;
    p.q1 = 0.5 * (t + std::sqrt(t * t + 8.0 * p.d));
    p.q2 = -2.0 * p.d / p.q1;  // from q1*q2 = -2d, avoids cancellation
    return p;
}

std::pair<double, double> characteristic_roots(const MarketParams& p) {
    return {p.q1, p.q2};
}

bool Corridor::is_half_line() const {
    return !std::isfinite(b);
}

Corridor make_corridor(double a, double b, const MarketParams& p) {
    if (!std::isfinite(a) || !(a > 0)) throw DomainError("corridor lower threshold must be positive");
    // Allow a == a_hat up to roundoff in a_hat itself.
    if (a < p.a_hat * (1.0 - 1e-12)) {
        throw DomainError("corridor lower threshold " + std::to_string(a) +
                          " is below the exercise boundary " + std::to_string(p.a_hat));
    }
    if (!(b > a)) throw DomainError("corridor must satisfy a < b");
    return Corridor{a, b};
}

double put_price(double x, const MarketParams& p) {
    if (!(x >= 0)) throw DomainError("spot must be nonnegative, got " + std::to_string(x));
    if (x <= p.a_hat) return p.strike - x;
    return (1.0 / p.d) * std::pow(p.a_hat, 1.0 + p.d) * std::pow(x, -p.d);
}

double put_delta(double x, const MarketParams& p) {
    if (!(x > 0)) throw DomainError("spot must be positive, got " + std::to_string(x));
    if (x <= p.a_hat) return -1.0;
    return -std::pow(p.a_hat / x, 1.0 + p.d);
}

double x_p(double h, const MarketParams& p) {
    if (!(h >= -1.0) || !(h < 0.0)) {
        throw DomainError("holding must lie in [-1, 0), got " + std::to_string(h));
    }
    return p.a_hat * std::pow(-h, -1.0 / (1.0 + p.d));
}

double running_cost(double x, double theta, const MarketParams& p) {
    if (!(x > 0)) throw DomainError("spot must be positive");
    const double gap = theta - put_delta(x, p);
    return gap * gap * p.sigma * p.sigma * x * x;
}

}  // namespace onehedge
