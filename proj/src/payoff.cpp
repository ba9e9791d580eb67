#include "onehedge/payoff.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "onehedge/errors.hpp"

namespace onehedge {

namespace {

void require_interior(double x, const Corridor& c, const char* what) {
    if (!(x > c.a && x < c.b)) {
        throw DomainError(std::string(what) + ": spot " + std::to_string(x) +
                          " outside corridor (" + std::to_string(c.a) + ", " +
                          std::to_string(c.b) + ")");
    }
}

void require_closed(double x, const Corridor& c, const char* what) {
    if (!(x >= c.a && x <= c.b)) {
        throw DomainError(std::string(what) + ": spot " + std::to_string(x) +
                          " outside corridor [" + std::to_string(c.a) + ", " +
                          std::to_string(c.b) + "]");
    }
}

struct GammaEval {
    // gamma_i(x) = particular + k1_i x^q1 + k2_i x^q2 with particular powers
    // (2, 1-d, -2d) and coefficients (p_i).
    double k1[3], k2[3], pcoef[3], ppow[3];
    double q1, q2;

    GammaTriple at(double x) const {
        const double xq1 = std::pow(x, q1), xq2 = std::pow(x, q2);
        GammaTriple t;
        double* g[3] = {&t.g1, &t.g2, &t.g3};
        for (int i = 0; i < 3; ++i)
            *g[i] = pcoef[i] * std::pow(x, ppow[i]) + k1[i] * xq1 + k2[i] * xq2;
        return t;
    }
    GammaTriple prime(double x) const {
        const double xq1 = q1 * std::pow(x, q1 - 1.0), xq2 = q2 * std::pow(x, q2 - 1.0);
        GammaTriple t;
        double* g[3] = {&t.g1, &t.g2, &t.g3};
        for (int i = 0; i < 3; ++i)
            *g[i] = pcoef[i] * ppow[i] * std::pow(x, ppow[i] - 1.0) + k1[i] * xq1 + k2[i] * xq2;
        return t;
    }
    GammaTriple second(double x) const {
        const double xq1 = q1 * (q1 - 1.0) * std::pow(x, q1 - 2.0);
        const double xq2 = q2 * (q2 - 1.0) * std::pow(x, q2 - 2.0);
        GammaTriple t;
        double* g[3] = {&t.g1, &t.g2, &t.g3};
        for (int i = 0; i < 3; ++i)
            *g[i] = pcoef[i] * ppow[i] * (ppow[i] - 1.0) * std::pow(x, ppow[i] - 2.0) +
                    k1[i] * xq1 + k2[i] * xq2;
        return t;
    }
};

GammaEval gamma_eval(const Corridor& c, const MarketParams& p) {
    if (c.is_half_line()) throw DomainError("gamma functions require a finite corridor");
    const auto k = gamma_coefficients(c, p);
    const double ah = p.a_hat, d = p.d;
    GammaEval e;
    e.q1 = p.q1;
    e.q2 = p.q2;
    e.k1[0] = k.A1 * k.D2; e.k2[0] = k.A2 * k.D1;
    e.k1[1] = k.A1 * k.C2; e.k2[1] = k.A2 * k.C1;
    e.k1[2] = k.A1 * k.B2; e.k2[2] = k.A2 * k.B1;
    e.pcoef[0] = -1.0;                                  e.ppow[0] = 2.0;
    e.pcoef[1] = -(1.0 / d) * std::pow(ah, 1.0 + d);     e.ppow[1] = 1.0 - d;
    e.pcoef[2] = -(1.0 / (d * d)) * std::pow(ah, 2.0 + 2.0 * d); e.ppow[2] = -2.0 * d;
    return e;
}

}  // namespace

GammaCoefficients gamma_coefficients(const Corridor& c, const MarketParams& p) {
    if (c.is_half_line()) throw DomainError("gamma coefficients require a finite corridor");
    const double a = c.a, b = c.b, d = p.d, ah = p.a_hat, q1 = p.q1, q2 = p.q2;
    GammaCoefficients k;
    k.A1 = 1.0 / (std::pow(a, q1 - q2) - std::pow(b, q1 - q2));
    k.A2 = 1.0 / (std::pow(a, q2 - q1) - std::pow(b, q2 - q1));
    auto bcd = [&](double qi, double* B, double* C, double* D) {
        *B = (std::pow(ah / a, 2.0 + 2.0 * d) * std::pow(a, 2.0 - qi) -
              std::pow(ah / b, 2.0 + 2.0 * d) * std::pow(b, 2.0 - qi)) / (d * d);
        *C = (std::pow(ah / a, 1.0 + d) * std::pow(a, 2.0 - qi) -
              std::pow(ah / b, 1.0 + d) * std::pow(b, 2.0 - qi)) / d;
        *D = std::pow(a, 2.0 - qi) - std::pow(b, 2.0 - qi);
    };
    bcd(q1, &k.B1, &k.C1, &k.D1);
    bcd(q2, &k.B2, &k.C2, &k.D2);
    return k;
}

GammaTriple gamma_functions(double x, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "gamma_functions");
    return gamma_eval(c, p).at(x);
}

GammaTriple gamma_derivatives(double x, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "gamma_derivatives");
    return gamma_eval(c, p).prime(x);
}

GammaTriple gamma_second_derivatives(double x, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "gamma_second_derivatives");
    return gamma_eval(c, p).second(x);
}

double gamma_post_trade(double x, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "gamma_post_trade");
    if (x == c.a) return gamma_post_trade_limit_lower(c, p);
    if (x == c.b) return gamma_post_trade_limit_upper(c, p);
    const auto g = gamma_functions(x, c, p);
    return g.g2 / g.g1;
}

double gamma_post_trade_prime(double x, const Corridor& c, const MarketParams& p) {
    require_interior(x, c, "gamma_post_trade_prime");
    const auto e = gamma_eval(c, p);
    const auto g = e.at(x);
    const auto gd = e.prime(x);
    return (gd.g2 * g.g1 - g.g2 * gd.g1) / (g.g1 * g.g1);
}

double gamma_post_trade_limit_lower(const Corridor& c, const MarketParams& p) {
    const auto gd = gamma_derivatives(c.a, c, p);
    return gd.g2 / gd.g1;
}

double gamma_post_trade_limit_upper(const Corridor& c, const MarketParams& p) {
    const auto gd = gamma_derivatives(c.b, c, p);
    return gd.g2 / gd.g1;
}

double quadratic_cost(double x, double zeta, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "quadratic_cost");
    const auto g = gamma_functions(x, c, p);
    return zeta * zeta * g.g1 - 2.0 * zeta * g.g2 + g.g3;
}

double stopping_payoff(double x, const Corridor& c, const MarketParams& p) {
    require_closed(x, c, "stopping_payoff");
    if (x == c.a || x == c.b) return 0.0;
    const auto g = gamma_functions(x, c, p);
    return -g.g2 * g.g2 / g.g1 + g.g3;
}

double stopping_payoff_prime(double x, const Corridor& c, const MarketParams& p) {
    require_interior(x, c, "stopping_payoff_prime");
    const auto e = gamma_eval(c, p);
    const auto g = e.at(x);
    const auto gd = e.prime(x);
    const double G = g.g2 / g.g1;
    return -2.0 * G * gd.g2 + G * G * gd.g1 + gd.g3;
}

double stopping_payoff_second(double x, const Corridor& c, const MarketParams& p) {
    require_interior(x, c, "stopping_payoff_second");
    const auto e = gamma_eval(c, p);
    const auto g = e.at(x);
    const auto gd = e.prime(x);
    const auto gdd = e.second(x);
    const double G = g.g2 / g.g1;
    const double Gp = (gd.g2 - G * gd.g1) / g.g1;
    return -2.0 * Gp * gd.g2 - 2.0 * G * gdd.g2 + 2.0 * G * Gp * gd.g1 + G * G * gdd.g1 + gdd.g3;
}

double sign_function(double x, double h, const Corridor& c, const MarketParams& p) {
    require_interior(x, c, "sign_function");
    const auto e = gamma_eval(c, p);
    const auto g = e.at(x);
    const auto gd = e.prime(x);
    const double G = g.g2 / g.g1;
    const double Gp = (gd.g2 - G * gd.g1) / g.g1;
    const double pd = put_delta(x, p);
    const double s2x2 = p.sigma * p.sigma * x * x;
    return s2x2 * ((h - pd) * (h - pd) - (G - pd) * (G - pd) - Gp * Gp * g.g1);
}

double x_gamma(double h, const Corridor& c, const MarketParams& p) {
    const double lo = gamma_post_trade_limit_lower(c, p);
    const double hi = gamma_post_trade_limit_upper(c, p);
    if (!(h > lo && h < hi)) {
        throw DomainError("x_gamma: holding " + std::to_string(h) +
                          " outside (" + std::to_string(lo) + ", " + std::to_string(hi) + ")");
    }
    const auto e = gamma_eval(c, p);
    auto f = [&](double x) {
        const auto g = e.at(x);
        return g.g2 / g.g1 - h;
    };
    double xlo = c.a, xhi = c.b;
    double flo = lo - h;  // limit values at the endpoints
    for (int i = 0; i < 200 && xhi - xlo > 1e-10 * c.a; ++i) {
        const double mid = 0.5 * (xlo + xhi);
        const double fm = f(mid);
        if (flo * fm <= 0.0) {
            xhi = mid;
        } else {
            xlo = mid;
            flo = fm;
        }
    }
    return 0.5 * (xlo + xhi);
}

const char* to_string(CaseTag tag) {
    switch (tag) {
        case CaseTag::A1: return "A1";
        case CaseTag::A2: return "A2";
        case CaseTag::A3: return "A3";
    }
    return "?";
}

CaseClassification classify_case(double h, const Corridor& c, const MarketParams& p) {
    const double pda = put_delta(c.a, p), pdb = put_delta(c.b, p);
    if (!(h >= pda - 1e-12 && h <= pdb + 1e-12)) {
        throw DomainError("classify_case: holding " + std::to_string(h) +
                          " outside [P'(a), P'(b)] = [" + std::to_string(pda) + ", " +
                          std::to_string(pdb) + "]");
    }
    h = std::clamp(h, pda, pdb);
    const double ga = gamma_post_trade_limit_lower(c, p);
    const double gb = gamma_post_trade_limit_upper(c, p);

    CaseClassification cls;
    cls.h = h;
    cls.tag = (h >= gb) ? CaseTag::A1 : (h <= ga ? CaseTag::A3 : CaseTag::A2);

    // Sign scan on a log-spaced grid, refined by bisection. The grid is
    // extended by the closed-form endpoint limits of G (the Gamma'^2 gamma1
    // term vanishes there since gamma1(a) = gamma1(b) = 0).
    constexpr int kGrid = 2048;
    const auto e = gamma_eval(c, p);
    auto G = [&](double x) {
        const auto g = e.at(x);
        const auto gd = e.prime(x);
        const double Gv = g.g2 / g.g1;
        const double Gp = (gd.g2 - Gv * gd.g1) / g.g1;
        const double pd = put_delta(x, p);
        return p.sigma * p.sigma * x * x *
               ((h - pd) * (h - pd) - (Gv - pd) * (Gv - pd) - Gp * Gp * g.g1);
    };
    auto G_limit = [&](double x, double gamma_limit) {
        const double pd = put_delta(x, p);
        return p.sigma * p.sigma * x * x *
               ((h - pd) * (h - pd) - (gamma_limit - pd) * (gamma_limit - pd));
    };
    const double la = std::log(c.a), lb = std::log(c.b);
    std::vector<double> xs(kGrid + 2), gs(kGrid + 2);
    xs.front() = c.a;
    gs.front() = G_limit(c.a, ga);
    xs.back() = c.b;
    gs.back() = G_limit(c.b, gb);
    for (int i = 1; i <= kGrid; ++i) {
        xs[i] = std::exp(la + (lb - la) * i / (kGrid + 1.0));
        gs[i] = G(xs[i]);
    }
    double scale = 0.0;
    for (double v : gs) scale = std::max(scale, std::abs(v));

    std::vector<double> crossings;
    for (std::size_t i = 0; i + 1 < xs.size(); ++i) {
        if (gs[i] * gs[i + 1] < 0.0) {
            double xlo = xs[i], xhi = xs[i + 1], flo = gs[i];
            for (int it = 0; it < 100 && xhi - xlo > 1e-10 * c.a; ++it) {
                const double mid = 0.5 * (xlo + xhi), fm = G(mid);
                if (flo * fm <= 0.0) xhi = mid;
                else { xlo = mid; flo = fm; }
            }
            crossings.push_back(0.5 * (xlo + xhi));
        }
    }
    // Tangential roots: interior local minima of |G| that reach (numerical)
    // zero without a sign change around them.
    for (std::size_t i = 1; i + 1 < xs.size(); ++i) {
        const double av = std::abs(gs[i]);
        if (av <= std::abs(gs[i - 1]) && av <= std::abs(gs[i + 1]) &&
            av <= 1e-9 * scale && gs[i - 1] * gs[i + 1] > 0.0) {
            cls.tangential_roots.push_back(xs[i]);
        }
    }

    const std::size_t expected = (cls.tag == CaseTag::A2) ? 2 : 1;
    if (crossings.size() > expected) {
        // A near-tangency can split into a pair of close crossings; collapse
        // pairs closer than the refined grid resolution.
        std::vector<double> merged;
        const double tol = 4.0 * (lb - la) / kGrid;
        std::size_t i = 0;
        while (i < crossings.size()) {
            if (i + 1 < crossings.size() &&
                std::log(crossings[i + 1]) - std::log(crossings[i]) < tol) {
                cls.tangential_roots.push_back(0.5 * (crossings[i] + crossings[i + 1]));
                i += 2;
            } else {
                merged.push_back(crossings[i]);
                ++i;
            }
        }
        crossings = std::move(merged);
    }
    if (crossings.size() > expected) {
        throw AssumptionViolated("sign function has " + std::to_string(crossings.size()) +
                                     " crossing roots at h = " + std::to_string(h) +
                                     ", inconsistent with case " + to_string(cls.tag),
                                 crossings);
    }
    if (crossings.size() < expected) {
        throw NumericalError(std::string("classify_case: case ") + to_string(cls.tag) +
                             " expects " + std::to_string(expected) +
                             " crossing roots, found " + std::to_string(crossings.size()) +
                             " at h = " + std::to_string(h));
    }
    cls.x_g1 = crossings.front();
    if (cls.tag == CaseTag::A2) cls.x_g2 = crossings.back();
    return cls;
}

}  // namespace onehedge
