#include "onehedge/boundary.hpp"

#include <algorithm>
#include <cmath>
#include <functional>
#include <atomic>
#include <thread>

#include "onehedge/errors.hpp"

namespace onehedge {

namespace {

struct Particular {
    double d, ah1d, ah2d;  // a_hat^(1+d), a_hat^(2+2d)

    explicit Particular(const MarketParams& p)
        : d(p.d), ah1d(std::pow(p.a_hat, 1.0 + p.d)), ah2d(std::pow(p.a_hat, 2.0 + 2.0 * p.d)) {}

    double at(double x, double h) const {
        const double g = h - (1.0 / d) * ah1d * std::pow(x, -1.0 - d);
        return -x * x * g * g;
    }
    double prime(double x, double h) const {
        return -2.0 * h * h * x + (2.0 * h * (1.0 - d) / d) * ah1d * std::pow(x, -d) +
               (2.0 / d) * ah2d * std::pow(x, -2.0 * d - 1.0);
    }
    double second(double x, double h) const {
        return -2.0 * h * h - 2.0 * h * (1.0 - d) * ah1d * std::pow(x, -d - 1.0) -
               (2.0 * (2.0 * d + 1.0) / d) * ah2d * std::pow(x, -2.0 * d - 2.0);
    }
};

// Bisection on [lo, hi] with f(lo) = flo of known sign; f assumed continuous.
template <typename F>
double bisect(F&& f, double lo, double hi, double flo, double xtol_rel) {
    for (int it = 0; it < 120 && hi - lo > xtol_rel * std::max(1.0, std::abs(lo)); ++it) {
        const double mid = 0.5 * (lo + hi);
        const double fm = f(mid);
        if (flo * fm <= 0.0) {
            hi = mid;
        } else {
            lo = mid;
            flo = fm;
        }
    }
    return 0.5 * (lo + hi);
}

struct Candidate {
    double x1, x2, c1, c2;
};

class PastingSolver {
  public:
    PastingSolver(double h, const Corridor& c, const MarketParams& p)
        : h_(h), c_(c), p_(p), part_(p), x0_(std::sqrt(c.a * c.b)) {
        m_scale_ = 1e-300;
        for (int i = 1; i < 64; ++i) {
            const double x = c.a + (c.b - c.a) * i / 64.0;
            m_scale_ = std::max(m_scale_, std::abs(stopping_payoff(x, c_, p_)));
        }
    }

    double payoff_scale() const { return m_scale_; }

    // (c1, c2) from the two value-matching conditions; a corridor endpoint
    // matches against M = 0.
    Candidate coefficients(double y1, double y2) const {
        const double t1 = target(y1) - part_.at(y1, h_);
        const double t2 = target(y2) - part_.at(y2, h_);
        const double r1 = y1 / x0_, r2 = y2 / x0_;
        const double a11 = std::pow(r1, p_.q1), a12 = std::pow(r1, p_.q2);
        const double a21 = std::pow(r2, p_.q1), a22 = std::pow(r2, p_.q2);
        const double det = a11 * a22 - a12 * a21;
        const double s1 = (t1 * a22 - t2 * a12) / det;
        const double s2 = (a11 * t2 - a21 * t1) / det;
        return {y1, y2, s1 / std::pow(x0_, p_.q1), s2 / std::pow(x0_, p_.q2)};
    }

    double pasting_residual(const Candidate& cand, double y) const {
        return candidate_prime(y, h_, cand.c1, cand.c2, p_) - stopping_payoff_prime(y, c_, p_);
    }

    // One-sided solve: the other boundary is pinned at the corridor endpoint.
    std::optional<Candidate> solve_one_sided(bool lower_free, double lo, double hi) const {
        auto residual = [&](double y) {
            const Candidate cand =
                lower_free ? coefficients(y, c_.b) : coefficients(c_.a, y);
            return pasting_residual(cand, y);
        };
        const int n = 192;
        double prev_x = lo, prev_f = residual(lo);
        for (int i = 1; i <= n; ++i) {
            const double x = lo + (hi - lo) * i / n;
            const double f = residual(x);
            if (prev_f * f <= 0.0) {
                const double y = bisect(residual, prev_x, x, prev_f, 1e-13);
                return lower_free ? coefficients(y, c_.b) : coefficients(c_.a, y);
            }
            prev_x = x;
            prev_f = f;
        }
        return std::nullopt;
    }

    // Two-sided nested solve: outer on x1, inner on x2.
    std::optional<Candidate> solve_two_sided(double lo1, double hi1, double lo2,
                                             double hi2) const {
        auto inner = [&](double y1) -> std::optional<double> {
            auto r2 = [&](double y2) { return pasting_residual(coefficients(y1, y2), y2); };
            const int n = 96;
            double prev_x = lo2, prev_f = r2(lo2);
            for (int i = 1; i <= n; ++i) {
                const double x = lo2 + (hi2 - lo2) * i / n;
                const double f = r2(x);
                if (prev_f * f <= 0.0) return bisect(r2, prev_x, x, prev_f, 1e-13);
                prev_x = x;
                prev_f = f;
            }
            return std::nullopt;
        };
        auto r1 = [&](double y1) -> std::optional<double> {
            const auto y2 = inner(y1);
            if (!y2) return std::nullopt;
            return pasting_residual(coefficients(y1, *y2), y1);
        };
        const int n = 48;
        double prev_x = lo1;
        auto prev_f = r1(lo1);
        for (int i = 1; i <= n; ++i) {
            const double x = lo1 + (hi1 - lo1) * i / n;
            const auto f = r1(x);
            if (prev_f && f && *prev_f * *f <= 0.0) {
                double blo = prev_x, bhi = x, bflo = *prev_f;
                bool ok = true;
                for (int it = 0; it < 120 && bhi - blo > 1e-13 * std::max(1.0, blo); ++it) {
                    const double mid = 0.5 * (blo + bhi);
                    const auto fm = r1(mid);
                    if (!fm) {
                        ok = false;
                        break;
                    }
                    if (bflo * *fm <= 0.0) {
                        bhi = mid;
                    } else {
                        blo = mid;
                        bflo = *fm;
                    }
                }
                if (!ok) continue;
                const double y1 = 0.5 * (blo + bhi);
                const auto y2 = inner(y1);
                if (!y2) continue;
                return coefficients(y1, *y2);
            }
            prev_x = x;
            prev_f = f;
        }
        return std::nullopt;
    }

    // Damped Newton on the 2D pasting-residual map, numerical Jacobian.
    std::optional<Candidate> solve_newton(double y1, double y2, double lo1, double hi1,
                                          double lo2, double hi2) const {
        auto res = [&](double a, double b) {
            const Candidate cand = coefficients(a, b);
            return std::pair<double, double>{pasting_residual(cand, a),
                                             pasting_residual(cand, b)};
        };
        for (int it = 0; it < 80; ++it) {
            const auto [f1, f2] = res(y1, y2);
            const double eps1 = 1e-7 * y1, eps2 = 1e-7 * y2;
            const auto [f1a, f2a] = res(y1 + eps1, y2);
            const auto [f1b, f2b] = res(y1, y2 + eps2);
            const double j11 = (f1a - f1) / eps1, j12 = (f1b - f1) / eps2;
            const double j21 = (f2a - f2) / eps1, j22 = (f2b - f2) / eps2;
            const double det = j11 * j22 - j12 * j21;
            if (det == 0.0 || !std::isfinite(det)) return std::nullopt;
            double d1 = (f1 * j22 - f2 * j12) / det;
            double d2 = (j11 * f2 - j21 * f1) / det;
            double damp = 1.0;
            while (damp > 1e-4 &&
                   (y1 - damp * d1 <= lo1 || y1 - damp * d1 >= hi1 ||
                    y2 - damp * d2 <= lo2 || y2 - damp * d2 >= hi2)) {
                damp *= 0.5;
            }
            if (damp <= 1e-4) return std::nullopt;  // cannot stay inside the bounds
            y1 -= damp * d1;
            y2 -= damp * d2;
            if (std::abs(d1) < 1e-13 * y1 && std::abs(d2) < 1e-13 * y2) {
                return coefficients(y1, y2);
            }
        }
        return std::nullopt;
    }

    // Full verification: v <= M inside on a 512-point grid and G >= 0 on the
    // stopping region, both up to small slack relative to the payoff scale.
    bool verify(const Candidate& cand) const {
        const double slack = 1e-8 * m_scale_;
        for (int i = 1; i < 512; ++i) {
            const double x = cand.x1 + (cand.x2 - cand.x1) * i / 512.0;
            const double v = candidate_value(x, h_, cand.c1, cand.c2, p_);
            if (v - stopping_payoff(x, c_, p_) > slack) return false;
        }
        double g_scale = 1e-300;
        auto check_outside = [&](double lo, double hi) {
            if (hi - lo < 1e-12 * c_.a) return true;
            for (int i = 1; i < 512; ++i) {
                const double x = lo + (hi - lo) * i / 512.0;
                const double g = sign_function(x, h_, c_, p_);
                g_scale = std::max(g_scale, std::abs(g));
                if (g < -1e-8 * std::max(g_scale, m_scale_)) return false;
            }
            return true;
        };
        if (!check_outside(c_.a, cand.x1)) return false;
        if (!check_outside(cand.x2, c_.b)) return false;
        return true;
    }

  private:
    double target(double y) const {
        if (y == c_.a || y == c_.b) return 0.0;
        return stopping_payoff(y, c_, p_);
    }

    double h_;
    Corridor c_;
    MarketParams p_;
    Particular part_;
    double x0_;
    double m_scale_;
};

}  // namespace

double candidate_value(double x, double h, double c1, double c2, const MarketParams& p) {
    return c1 * std::pow(x, p.q1) + c2 * std::pow(x, p.q2) + Particular(p).at(x, h);
}

double candidate_prime(double x, double h, double c1, double c2, const MarketParams& p) {
    return c1 * p.q1 * std::pow(x, p.q1 - 1.0) + c2 * p.q2 * std::pow(x, p.q2 - 1.0) +
           Particular(p).prime(x, h);
}

double candidate_second(double x, double h, double c1, double c2, const MarketParams& p) {
    return c1 * p.q1 * (p.q1 - 1.0) * std::pow(x, p.q1 - 2.0) +
           c2 * p.q2 * (p.q2 - 1.0) * std::pow(x, p.q2 - 2.0) + Particular(p).second(x, h);
}

BoundarySolution solve_boundaries(double h, const Corridor& c, const MarketParams& p) {
    if (c.is_half_line()) throw DomainError("solve_boundaries requires a finite corridor");
    const auto cls = classify_case(h, c, p);
    const PastingSolver solver(h, c, p);
    const double delta = 1e-9 * (c.b - c.a);

    std::vector<Candidate> candidates;
    auto push = [&](auto&& attempt) {
        try {
            if (const auto cand = attempt()) candidates.push_back(*cand);
        } catch (const Error&) {
            // A failed attempt just removes one candidate from consideration.
        }
    };

    switch (cls.tag) {
        case CaseTag::A1:
            push([&] { return solver.solve_one_sided(true, c.a + delta, cls.x_g1); });
            break;
        case CaseTag::A3:
            push([&] { return solver.solve_one_sided(false, cls.x_g1, c.b - delta); });
            break;
        case CaseTag::A2: {
            const double xg1 = cls.x_g1, xg2 = *cls.x_g2;
            push([&] { return solver.solve_two_sided(c.a + delta, xg1, xg2, c.b - delta); });
            push([&] { return solver.solve_one_sided(false, xg2, c.b - delta); });  // x1 = a
            push([&] { return solver.solve_one_sided(true, c.a + delta, xg1); });   // x2 = b
            if (candidates.empty()) {
                push([&] {
                    return solver.solve_newton(xg1, xg2, c.a + delta, xg1, xg2, c.b - delta);
                });
            }
            break;
        }
    }

    if (candidates.empty()) {
        throw NoBracket("solve_boundaries: no pasting bracket for h = " + std::to_string(h) +
                        " (case " + to_string(cls.tag) + ")");
    }
    for (const auto& cand : candidates) {
        if (!(cand.x1 >= c.a && cand.x2 <= c.b && cand.x1 < cand.x2)) continue;
        if (solver.verify(cand)) {
            BoundarySolution sol;
            sol.h = h;
            sol.x1 = cand.x1;
            sol.x2 = cand.x2;
            sol.c1 = cand.c1;
            sol.c2 = cand.c2;
            sol.cls = cls;
            sol.lower_interior = cand.x1 > c.a;
            sol.upper_interior = cand.x2 < c.b;
            return sol;
        }
    }
    throw VerificationFailed("solve_boundaries: all candidates violate v <= M or G >= 0 at h = " +
                             std::to_string(h) + " (case " + to_string(cls.tag) + ", " +
                             std::to_string(candidates.size()) + " candidates)");
}

double value(double x, double h, const BoundarySolution& sol, const Corridor& c,
             const MarketParams& p) {
    if (!(x >= c.a && x <= c.b)) throw DomainError("value: spot outside corridor");
    if (x > sol.x1 && x < sol.x2) return candidate_value(x, h, sol.c1, sol.c2, p);
    return stopping_payoff(x, c, p);
}

BoundaryCurves boundary_curves(std::span<const double> h_grid, const Corridor& c,
                               const MarketParams& p, bool parallel) {
    BoundaryCurves out;
    out.rows.resize(h_grid.size());
    auto work = [&](std::size_t i) {
        BoundaryCurveRow& row = out.rows[i];
        row.h = h_grid[i];
        try {
            const auto sol = solve_boundaries(h_grid[i], c, p);
            row.x1 = sol.x1;
            row.x2 = sol.x2;
            row.c1 = sol.c1;
            row.c2 = sol.c2;
            row.tag = sol.cls.tag;
            row.ok = true;
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
    };
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    if (parallel && hw > 1 && h_grid.size() > 8) {
        std::vector<std::thread> pool;
        std::atomic<std::size_t> next{0};
        for (unsigned t = 0; t < hw; ++t) {
            pool.emplace_back([&] {
                for (std::size_t i = next.fetch_add(1); i < out.rows.size();
                     i = next.fetch_add(1)) {
                    work(i);
                }
            });
        }
        for (auto& th : pool) th.join();
    } else {
        for (std::size_t i = 0; i < out.rows.size(); ++i) work(i);
    }

    const double tol = 1e-7 * (c.b - c.a);
    for (const auto& row : out.rows) {
        if (!row.ok) continue;
        if (!out.h_alpha && row.x1 > c.a + tol) out.h_alpha = row.h;
        if (!out.h_beta && row.x2 >= c.b - tol) out.h_beta = row.h;
    }
    return out;
}

}  // namespace onehedge
