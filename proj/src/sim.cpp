#include "onehedge/sim.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <limits>
#include <mutex>
#include <ostream>
#include <thread>

#include "onehedge/diffusion.hpp"
#include "onehedge/errors.hpp"
#include "onehedge/rng.hpp"

namespace onehedge {

namespace {

constexpr double kCensorBudget = 1e-4;  // max tolerated fraction of censored paths

struct StepParams {
    double drift, vol, sig2dt, dt;
    std::int64_t max_steps;
};

StepParams step_params(const SimConfig& cfg) {
    StepParams s;
    s.dt = cfg.dt;
    s.drift = (cfg.params.r - 0.5 * cfg.params.sigma * cfg.params.sigma) * cfg.dt;
    s.vol = cfg.params.sigma * std::sqrt(cfg.dt);
    s.sig2dt = cfg.params.sigma * cfg.params.sigma * cfg.dt;
    s.max_steps = static_cast<std::int64_t>(std::ceil(cfg.horizon() / cfg.dt));
    return s;
}

struct Crossing {
    double frac;  // fraction of the step at which the barrier is crossed
    int side;     // -1 lower, +1 upper
};

// One-sided barrier check on a log-price step [l0, l1]. When an endpoint lies
// beyond a barrier the crossing time is interpolated linearly in log space;
// when only the bridge fires, the midpoint convention is used.
bool check_crossing(double l0, double l1, double lo, double hi, bool lo_active, bool hi_active,
                    bool bridge, double sig2dt, std::uint64_t word, Crossing* out) {
    if (lo_active && l1 <= lo) {
        out->frac = (l0 - lo) / (l0 - l1);
        out->side = -1;
        return true;
    }
    if (hi_active && l1 >= hi) {
        out->frac = (hi - l0) / (l1 - l0);
        out->side = +1;
        return true;
    }
    if (!bridge) return false;
    const double gap_lo = lo_active ? std::min(l0, l1) - lo : std::numeric_limits<double>::max();
    const double gap_hi = hi_active ? hi - std::max(l0, l1) : std::numeric_limits<double>::max();
    double d0, d1;
    int side;
    if (gap_lo <= gap_hi) {
        if (!lo_active) return false;
        d0 = l0 - lo;
        d1 = l1 - lo;
        side = -1;
    } else {
        if (!hi_active) return false;
        d0 = hi - l0;
        d1 = hi - l1;
        side = +1;
    }
    const double expo = -2.0 * d0 * d1 / sig2dt;
    if (expo < -45.0) return false;  // crossing probability below 3e-20
    if (to_unit_interval(word) < std::exp(expo)) {
        out->frac = 0.5;
        out->side = side;
        return true;
    }
    return false;
}

template <typename Work>
void parallel_paths(std::int64_t n, int threads, Work&& work) {
    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const unsigned n_threads = threads > 0 ? static_cast<unsigned>(threads) : hw;
    if (n_threads <= 1 || n < 256) {
        for (std::int64_t i = 0; i < n; ++i) work(i);
        return;
    }
    std::atomic<std::int64_t> next{0};
    constexpr std::int64_t kChunk = 64;
    std::vector<std::thread> pool;
    pool.reserve(n_threads);
    for (unsigned t = 0; t < n_threads; ++t) {
        pool.emplace_back([&] {
            for (;;) {
                const std::int64_t lo = next.fetch_add(kChunk);
                if (lo >= n) return;
                const std::int64_t hi = std::min(lo + kChunk, n);
                for (std::int64_t i = lo; i < hi; ++i) work(i);
            }
        });
    }
    for (auto& th : pool) th.join();
}

struct Moments {
    double mean = 0, variance = 0, mu4 = 0;
};

// Two-pass moments in a fixed (path-index) order, independent of threading.
Moments moments(std::span<const double> xs) {
    Moments m;
    const double n = static_cast<double>(xs.size());
    if (xs.empty()) return m;
    long double sum = 0;
    for (double v : xs) sum += v;
    m.mean = static_cast<double>(sum / n);
    long double s2 = 0, s4 = 0;
    for (double v : xs) {
        const long double d = v - m.mean;
        s2 += d * d;
        s4 += d * d * d * d;
    }
    m.variance = xs.size() > 1 ? static_cast<double>(s2 / (n - 1.0)) : 0.0;
    m.mu4 = static_cast<double>(s4 / n);
    return m;
}

double variance_se(const Moments& m, std::int64_t n) {
    if (n < 2) return 0.0;
    const double nn = static_cast<double>(n);
    const double v = (m.mu4 - (nn - 3.0) / (nn - 1.0) * m.variance * m.variance) / nn;
    return v > 0 ? std::sqrt(v) : 0.0;
}

void format17(char* buf, std::size_t cap, double v) {
    std::snprintf(buf, cap, "%.17g", v);
}

}  // namespace

void SimConfig::validate() const {
    if (!(spot > 0)) throw ConfigError("sim: spot must be positive");
    if (corridor.is_half_line()) {
        if (!(spot >= corridor.a)) throw ConfigError("sim: spot below the lower threshold");
    } else if (!(spot >= corridor.a && spot <= corridor.b)) {
        throw ConfigError("sim: spot outside the corridor");
    }
    if (n_paths < 1) throw ConfigError("sim: need at least one path");
    if (!(dt > 0) || dt > 1e-2) throw ConfigError("sim: dt must lie in (0, 1e-2]");
    if (t_max < 0) throw ConfigError("sim: negative horizon");
}

double SimConfig::horizon() const {
    if (t_max > 0) return t_max;
    return std::log(1e8) / (2.0 * params.r);
}

StrategyPlans make_plans(const SimConfig& cfg) {
    cfg.validate();
    const Corridor& c = cfg.corridor;
    const MarketParams& p = cfg.params;
    const double x = cfg.spot;
    const double side_tol = 1e-9 * (c.b - c.a);

    StrategyPlans plans;
    plans.hedge = optimal_initial_holding(x, c, p);

    auto make_spec = [&](double theta0, double lo, double hi, double theta_lo, double theta_hi,
                         int lane) {
        StrategySpec s;
        s.theta0 = theta0;
        s.has_trade = true;
        s.lo = lo;
        s.hi = hi;
        s.lo_active = lo > c.a + side_tol;
        s.hi_active = hi < c.b - side_tol;
        s.theta_lo = theta_lo;
        s.theta_hi = theta_hi;
        s.rng_lane = lane;
        return s;
    };

    const auto& sol = plans.hedge.sol;
    plans.specs[0] = make_spec(plans.hedge.h_star, sol.x1, sol.x2,
                               gamma_post_trade(sol.x1, c, p), gamma_post_trade(sol.x2, c, p), 0);
    const double pdx = put_delta(x, p);
    plans.specs[1] = make_spec(pdx, 0.5 * (c.a + x), 0.5 * (c.b + x),
                               put_delta(0.5 * (c.a + x), p), put_delta(0.5 * (c.b + x), p), 1);
    const double dlo = 0.5 * (put_delta(c.a, p) + pdx);
    const double dhi = 0.5 * (put_delta(c.b, p) + pdx);
    plans.specs[2] = make_spec(pdx, x_p(dlo, p), x_p(dhi, p), dlo, dhi, 2);
    plans.specs[3].theta0 = gamma_post_trade(x, c, p);
    plans.specs[4].theta0 = pdx;
    return plans;
}

namespace {

// Walks one path and fills the five discounted tracking errors.
// Returns true when the path was censored at the horizon.
bool walk_strategies(std::uint64_t path_index, const SimConfig& cfg, const StepParams& sp,
                     const StrategyPlans& plans, double* err_out) {
    const MarketParams& p = cfg.params;
    const double log_a = std::log(cfg.corridor.a), log_b = std::log(cfg.corridor.b);
    const PathRng rng(cfg.seed, path_index);

    struct State {
        double theta;
        double hat_prev;  // discounted stock at the last portfolio event
        double error;
        bool traded;
    };
    std::array<State, 5> st;
    std::array<double, 5> trade_lo_log{}, trade_hi_log{};
    for (int s = 0; s < 5; ++s) {
        st[s] = {plans.specs[s].theta0, cfg.spot, 0.0, !plans.specs[s].has_trade};
        if (plans.specs[s].has_trade) {
            trade_lo_log[s] = std::log(plans.specs[s].lo);
            trade_hi_log[s] = std::log(plans.specs[s].hi);
        }
    }
    const double p0 = put_price(cfg.spot, p);

    double l = std::log(cfg.spot);
    double t = 0.0;
    bool censored = false;
    double exit_t = 0.0, exit_log = 0.0;

    if (cfg.spot <= cfg.corridor.a || cfg.spot >= cfg.corridor.b) {
        exit_log = l;  // start on the boundary: tau = 0
    } else {
        for (std::int64_t step = 0;; ++step) {
            if (step >= sp.max_steps) {
                censored = true;
                exit_t = t;
                exit_log = l;
                break;
            }
            const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
            const auto blk1 = rng.block(static_cast<std::uint64_t>(step), 1);
            const double z = normal_quantile(to_unit_interval(blk0[0]));
            const double l1 = l + sp.drift + sp.vol * z;

            struct Event {
                double frac;
                int strategy;  // -1: corridor exit
                int side;
            };
            Event events[4];
            int n_events = 0;

            Crossing cross;
            const std::uint64_t lane_words[3] = {blk0[2], blk0[3], blk1[0]};
            for (int s = 0; s < 3; ++s) {
                const auto& spec = plans.specs[s];
                if (st[s].traded || !spec.has_trade) continue;
                if (check_crossing(l, l1, trade_lo_log[s], trade_hi_log[s], spec.lo_active,
                                   spec.hi_active, cfg.bridge, sp.sig2dt,
                                   lane_words[spec.rng_lane], &cross)) {
                    events[n_events++] = {cross.frac, s, cross.side};
                }
            }
            bool exited = false;
            if (check_crossing(l, l1, log_a, log_b, true, true, cfg.bridge, sp.sig2dt, blk0[1],
                               &cross)) {
                events[n_events++] = {cross.frac, -1, cross.side};
                exited = true;
            }
            std::sort(events, events + n_events,
                      [](const Event& a, const Event& b) { return a.frac < b.frac; });
            for (int e = 0; e < n_events; ++e) {
                const Event& ev = events[e];
                const double te = t + ev.frac * sp.dt;
                if (ev.strategy >= 0) {
                    State& s = st[ev.strategy];
                    if (s.traded) continue;
                    const auto& spec = plans.specs[ev.strategy];
                    const double level = ev.side < 0 ? spec.lo : spec.hi;
                    const double hat = level * std::exp(-p.r * te);
                    s.error += s.theta * (hat - s.hat_prev);
                    s.hat_prev = hat;
                    s.theta = ev.side < 0 ? spec.theta_lo : spec.theta_hi;
                    s.traded = true;
                } else {
                    exit_t = te;
                    exit_log = ev.side < 0 ? log_a : log_b;
                    break;
                }
            }
            if (exited) break;
            l = l1;
            t += sp.dt;
        }
    }

    const double s_exit = std::exp(exit_log);
    const double disc = std::exp(-p.r * exit_t);
    const double hat_exit = s_exit * disc;
    for (int s = 0; s < 5; ++s) {
        st[s].error += st[s].theta * (hat_exit - st[s].hat_prev);
        err_out[s] = st[s].error + p0 - disc * put_price(s_exit, p);
    }
    return censored;
}

}  // namespace

ExitInfo simulate_exit(std::uint64_t path_index, const SimConfig& cfg, int sample_stride) {
    cfg.validate();
    const StepParams sp = step_params(cfg);
    const double log_a = std::log(cfg.corridor.a), log_b = std::log(cfg.corridor.b);
    const PathRng rng(cfg.seed, path_index);

    ExitInfo info;
    double l = std::log(cfg.spot);
    double t = 0.0;
    if (sample_stride > 0) info.samples.emplace_back(0.0, cfg.spot);
    if (cfg.spot <= cfg.corridor.a || cfg.spot >= cfg.corridor.b) {
        info.tau = 0.0;
        info.side = cfg.spot <= cfg.corridor.a ? -1 : +1;
        info.spot = cfg.spot;
        return info;
    }
    for (std::int64_t step = 0;; ++step) {
        if (step >= sp.max_steps) {
            info.censored = true;
            info.tau = t;
            info.side = 0;
            info.spot = std::exp(l);
            return info;
        }
        const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
        const double z = normal_quantile(to_unit_interval(blk0[0]));
        const double l1 = l + sp.drift + sp.vol * z;
        Crossing cross;
        if (check_crossing(l, l1, log_a, log_b, true, true, cfg.bridge, sp.sig2dt, blk0[1],
                           &cross)) {
            info.tau = t + cross.frac * sp.dt;
            info.side = cross.side;
            info.spot = cross.side < 0 ? cfg.corridor.a : cfg.corridor.b;
            if (sample_stride > 0) info.samples.emplace_back(info.tau, info.spot);
            return info;
        }
        l = l1;
        t += sp.dt;
        if (sample_stride > 0 && step % sample_stride == 0) {
            info.samples.emplace_back(t, std::exp(l));
        }
    }
}

double run_strategy(int id, std::uint64_t path_index, const SimConfig& cfg,
                    const StrategyPlans& plans) {
    if (id < 1 || id > 5) throw DomainError("run_strategy: strategy id must be 1..5");
    cfg.validate();
    const StepParams sp = step_params(cfg);
    double errs[5];
    walk_strategies(path_index, cfg, sp, plans, errs);
    return errs[id - 1];
}

StrategyErrors run_all_strategies(const SimConfig& cfg, const StrategyPlans& plans) {
    cfg.validate();
    const StepParams sp = step_params(cfg);
    StrategyErrors out;
    for (auto& v : out.errors) v.resize(static_cast<std::size_t>(cfg.n_paths));
    std::atomic<std::int64_t> censored{0};
    parallel_paths(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
        double errs[5];
        if (walk_strategies(static_cast<std::uint64_t>(i), cfg, sp, plans, errs)) {
            censored.fetch_add(1, std::memory_order_relaxed);
        }
        for (int s = 0; s < 5; ++s) out.errors[s][static_cast<std::size_t>(i)] = errs[s];
    });
    out.censored = censored.load();
    if (static_cast<double>(out.censored) > kCensorBudget * static_cast<double>(cfg.n_paths)) {
        throw ConfigError("simulation censored " + std::to_string(out.censored) + " of " +
                          std::to_string(cfg.n_paths) +
                          " paths; increase t_max or loosen the corridor");
    }
    return out;
}

namespace {

StrategyStats stats_from(std::span<const double> errs, int id, const SimConfig& cfg,
                         std::int64_t censored) {
    const Moments m = moments(errs);
    StrategyStats st;
    st.strategy = id;
    st.mean = m.mean;
    st.variance = m.variance;
    st.var_se = variance_se(m, cfg.n_paths);
    st.mean_se = cfg.n_paths > 0 ? std::sqrt(m.variance / static_cast<double>(cfg.n_paths)) : 0.0;
    st.n_paths = cfg.n_paths;
    st.seed = cfg.seed;
    st.censored = censored;
    return st;
}

}  // namespace

StrategyStats estimate(int id, const SimConfig& cfg, const StrategyPlans& plans) {
    if (id < 1 || id > 5) throw DomainError("estimate: strategy id must be 1..5");
    const auto errs = run_all_strategies(cfg, plans);
    return stats_from(errs.errors[id - 1], id, cfg, errs.censored);
}

std::array<StrategyStats, 5> estimate_all(const SimConfig& cfg, const StrategyPlans& plans) {
    const auto errs = run_all_strategies(cfg, plans);
    std::array<StrategyStats, 5> out;
    for (int s = 0; s < 5; ++s) out[s] = stats_from(errs.errors[s], s + 1, cfg, errs.censored);
    return out;
}

Sweep sweep_from_string(const std::string& name) {
    if (name == "spot") return Sweep::spot;
    if (name == "sigma") return Sweep::sigma;
    if (name == "b" || name == "upper") return Sweep::upper;
    throw ConfigError("unknown sweep '" + name + "' (expected spot, sigma or b)");
}

std::string to_string(Sweep sweep) {
    switch (sweep) {
        case Sweep::spot: return "spot";
        case Sweep::sigma: return "sigma";
        case Sweep::upper: return "b";
    }
    return "?";
}

std::vector<double> default_sweep_grid(Sweep sweep) {
    std::vector<double> grid(10);
    double lo = 0, hi = 0;
    switch (sweep) {
        case Sweep::spot: lo = 91, hi = 109; break;
        case Sweep::sigma: lo = 0.20, hi = 0.40; break;
        case Sweep::upper: lo = 105, hi = 150; break;
    }
    for (int i = 0; i < 10; ++i) grid[i] = lo + (hi - lo) * i / 9.0;
    return grid;
}

std::vector<CompareRow> compare(Sweep sweep, const SimConfig& base, std::span<const double> grid) {
    std::vector<CompareRow> rows;
    rows.reserve(grid.size());
    for (double v : grid) {
        CompareRow row;
        row.sweep_value = v;
        SimConfig cfg = base;
        try {
            switch (sweep) {
                case Sweep::spot:
                    cfg.spot = v;
                    break;
                case Sweep::sigma:
                    cfg.params = MarketParams::make(base.params.r, v, base.params.strike);
                    cfg.corridor = make_corridor(base.corridor.a, base.corridor.b, cfg.params);
                    break;
                case Sweep::upper:
                    cfg.corridor = make_corridor(base.corridor.a, v, base.params);
                    break;
            }
            const auto plans = make_plans(cfg);
            row.stats = estimate_all(cfg, plans);
        } catch (const Error& e) {
            row.ok = false;
            row.error = e.what();
        }
        rows.push_back(std::move(row));
    }
    return rows;
}

void write_compare_csv(std::ostream& os, Sweep sweep, std::span<const CompareRow> rows) {
    os << "sweep_param,strategy,n_paths,seed,mean,variance,var_se,censored_count\n";
    char buf[64];
    for (const auto& row : rows) {
        if (!row.ok) continue;
        for (const auto& st : row.stats) {
            format17(buf, sizeof buf, row.sweep_value);
            os << buf << ',' << st.strategy << ',' << st.n_paths << ',' << st.seed << ',';
            format17(buf, sizeof buf, st.mean);
            os << buf << ',';
            format17(buf, sizeof buf, st.variance);
            os << buf << ',';
            format17(buf, sizeof buf, st.var_se);
            os << buf << ',' << st.censored << '\n';
        }
    }
}

McEstimate mc_stopping_cost(double x, double h, const StopRule& rule, const SimConfig& cfg) {
    cfg.validate();
    const Corridor& c = cfg.corridor;
    const MarketParams& p = cfg.params;
    if (rule.kind == StopRule::Kind::immediate) {
        const double m = stopping_payoff(std::clamp(x, c.a, c.b), c, p);
        return {m, 0.0, cfg.n_paths};
    }
    double rlo = c.a, rhi = c.b;
    if (rule.kind == StopRule::Kind::thresholds) {
        if (!(rule.lo >= c.a && rule.hi <= c.b && rule.lo < rule.hi)) {
            throw DomainError("mc_stopping_cost: rule thresholds outside the corridor");
        }
        rlo = rule.lo;
        rhi = rule.hi;
    }
    const bool lo_inner = rlo > c.a * (1.0 + 1e-12);
    const bool hi_inner = rhi < c.b * (1.0 - 1e-12);
    const double log_a = std::log(c.a), log_b = std::log(c.b);
    const double log_lo = std::log(rlo), log_hi = std::log(rhi);
    const StepParams sp = step_params(cfg);
    const double sig2 = p.sigma * p.sigma;
    const double ah1d = std::pow(p.a_hat, 1.0 + p.d);

    std::vector<double> costs(static_cast<std::size_t>(cfg.n_paths));
    std::atomic<std::int64_t> censored{0};
    parallel_paths(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
        const PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        double l = std::log(x);
        double t = 0.0, integral = 0.0;
        auto fval = [&](double lg) {
            const double s = std::exp(lg);
            const double pd = s <= p.a_hat ? -1.0 : -ah1d * std::pow(s, -1.0 - p.d);
            const double gap = h - pd;
            return gap * gap * sig2 * s * s;
        };
        double f_prev = fval(l);
        double cost = std::numeric_limits<double>::quiet_NaN();
        for (std::int64_t step = 0;; ++step) {
            if (step >= sp.max_steps) {
                censored.fetch_add(1, std::memory_order_relaxed);
                cost = integral;  // discounting already makes the tail negligible
                break;
            }
            const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
            const double z = normal_quantile(to_unit_interval(blk0[0]));
            const double l1 = l + sp.drift + sp.vol * z;

            Crossing rule_cross, exit_cross;
            const bool rule_hit =
                check_crossing(l, l1, log_lo, log_hi, lo_inner, hi_inner, cfg.bridge, sp.sig2dt,
                               blk0[2], &rule_cross);
            const bool exit_hit = check_crossing(l, l1, log_a, log_b, true, true, cfg.bridge,
                                                 sp.sig2dt, blk0[1], &exit_cross);
            if (rule_hit || exit_hit) {
                const bool rule_first =
                    rule_hit && (!exit_hit || rule_cross.frac <= exit_cross.frac);
                const Crossing& cr = rule_first ? rule_cross : exit_cross;
                const double te = t + cr.frac * sp.dt;
                const double level = rule_first ? (cr.side < 0 ? rlo : rhi)
                                                : (cr.side < 0 ? c.a : c.b);
                const double w = std::exp(-2.0 * p.r * te);
                integral += 0.5 * (std::exp(-2.0 * p.r * t) * f_prev + w * fval(std::log(level))) *
                            (cr.frac * sp.dt);
                const double payoff =
                    rule_first && level > c.a && level < c.b ? stopping_payoff(level, c, p) : 0.0;
                cost = integral + w * payoff;
                break;
            }
            const double w0 = std::exp(-2.0 * p.r * t);
            const double w1 = std::exp(-2.0 * p.r * (t + sp.dt));
            const double f1 = fval(l1);
            integral += 0.5 * (w0 * f_prev + w1 * f1) * sp.dt;
            f_prev = f1;
            l = l1;
            t += sp.dt;
        }
        costs[static_cast<std::size_t>(i)] = cost;
    });
    if (static_cast<double>(censored.load()) > kCensorBudget * static_cast<double>(cfg.n_paths)) {
        throw ConfigError("mc_stopping_cost: too many censored paths");
    }
    const Moments m = moments(costs);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(cfg.n_paths)), cfg.n_paths};
}

std::vector<McEstimate> mc_threshold_grid(double x, double h, std::span<const double> los,
                                          std::span<const double> his, const SimConfig& cfg) {
    cfg.validate();
    const Corridor& c = cfg.corridor;
    const MarketParams& p = cfg.params;
    for (double lo : los)
        if (!(lo >= c.a && lo < x)) throw DomainError("mc_threshold_grid: bad lower level");
    for (double hi : his)
        if (!(hi <= c.b && hi > x)) throw DomainError("mc_threshold_grid: bad upper level");

    std::vector<double> lo_sorted(los.begin(), los.end());
    std::vector<double> hi_sorted(his.begin(), his.end());
    std::sort(lo_sorted.rbegin(), lo_sorted.rend());  // descending: hit order from x
    std::sort(hi_sorted.begin(), hi_sorted.end());

    const std::size_t nl = lo_sorted.size(), nh = hi_sorted.size();
    struct Record {
        std::int64_t step;
        double disc;     // e^{-2 r tau}
        double integral; // running cost up to tau
        double payoff;   // M at the observed exit spot (0 outside the corridor)
    };
    const StepParams sp = step_params(cfg);
    const double sig2 = p.sigma * p.sigma;
    const double ah1d = std::pow(p.a_hat, 1.0 + p.d);
    const double log_a = std::log(c.a), log_b = std::log(c.b);

    std::vector<long double> sum(nl * nh, 0.0L), sumsq(nl * nh, 0.0L);
    std::mutex acc_mu;
    const int n_threads =
        cfg.threads > 0 ? cfg.threads : static_cast<int>(std::max(1u, std::thread::hardware_concurrency()));

    std::atomic<std::int64_t> next{0};
    auto worker = [&] {
        std::vector<Record> lo_rec(nl), hi_rec(nh);
        std::vector<long double> local_sum(nl * nh, 0.0L), local_sq(nl * nh, 0.0L);
        auto fval = [&](double lg) {
            const double s = std::exp(lg);
            const double pd = s <= p.a_hat ? -1.0 : -ah1d * std::pow(s, -1.0 - p.d);
            const double gap = h - pd;
            return gap * gap * sig2 * s * s;
        };
        auto payoff_at = [&](double lg) {
            const double s = std::exp(lg);
            if (s <= c.a || s >= c.b) return 0.0;
            return stopping_payoff(s, c, p);
        };
        for (;;) {
            const std::int64_t batch = next.fetch_add(16);
            if (batch >= cfg.n_paths) break;
            const std::int64_t end = std::min(batch + 16, cfg.n_paths);
            for (std::int64_t i = batch; i < end; ++i) {
                const PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
                double l = std::log(x);
                double t = 0.0, integral = 0.0, f_prev = fval(l);
                std::size_t i_lo = 0, i_hi = 0;
                std::int64_t exit_step = -1;
                for (std::int64_t step = 0; step < sp.max_steps; ++step) {
                    const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
                    const double z = normal_quantile(to_unit_interval(blk0[0]));
                    const double l1 = l + sp.drift + sp.vol * z;
                    const double w1 = std::exp(-2.0 * p.r * (t + sp.dt));
                    const double f1 = fval(l1);
                    integral += 0.5 * (std::exp(-2.0 * p.r * t) * f_prev + w1 * f1) * sp.dt;
                    while (i_lo < nl && l1 <= std::log(lo_sorted[i_lo])) {
                        lo_rec[i_lo++] = {step, w1, integral, payoff_at(l1)};
                    }
                    while (i_hi < nh && l1 >= std::log(hi_sorted[i_hi])) {
                        hi_rec[i_hi++] = {step, w1, integral, payoff_at(l1)};
                    }
                    l = l1;
                    t += sp.dt;
                    f_prev = f1;
                    if (l <= log_a || l >= log_b) {
                        exit_step = step;
                        break;
                    }
                }
                // Unhit levels stop with the corridor exit (payoff 0).
                const Record exit_rec{exit_step < 0 ? sp.max_steps : exit_step,
                                      std::exp(-2.0 * p.r * t), integral, 0.0};
                for (; i_lo < nl; ++i_lo) lo_rec[i_lo] = exit_rec;
                for (; i_hi < nh; ++i_hi) hi_rec[i_hi] = exit_rec;

                for (std::size_t il = 0; il < nl; ++il) {
                    for (std::size_t ih = 0; ih < nh; ++ih) {
                        const Record& r =
                            lo_rec[il].step <= hi_rec[ih].step ? lo_rec[il] : hi_rec[ih];
                        const double cost = r.integral + r.disc * r.payoff;
                        local_sum[il * nh + ih] += cost;
                        local_sq[il * nh + ih] += static_cast<long double>(cost) * cost;
                    }
                }
            }
        }
        std::lock_guard<std::mutex> lock(acc_mu);
        for (std::size_t k = 0; k < nl * nh; ++k) {
            sum[k] += local_sum[k];
            sumsq[k] += local_sq[k];
        }
    };
    std::vector<std::thread> pool;
    for (int tix = 0; tix < n_threads; ++tix) pool.emplace_back(worker);
    for (auto& th : pool) th.join();

    // Un-sort back to the caller's level ordering.
    std::vector<std::size_t> lo_index(nl), hi_index(nh);
    for (std::size_t i = 0; i < nl; ++i) {
        lo_index[i] = static_cast<std::size_t>(
            std::find(lo_sorted.begin(), lo_sorted.end(), los[i]) - lo_sorted.begin());
    }
    for (std::size_t i = 0; i < nh; ++i) {
        hi_index[i] = static_cast<std::size_t>(
            std::find(hi_sorted.begin(), hi_sorted.end(), his[i]) - hi_sorted.begin());
    }
    std::vector<McEstimate> out(nl * nh);
    const double n = static_cast<double>(cfg.n_paths);
    for (std::size_t il = 0; il < nl; ++il) {
        for (std::size_t ih = 0; ih < nh; ++ih) {
            const std::size_t k = lo_index[il] * nh + hi_index[ih];
            const double mean = static_cast<double>(sum[k] / n);
            const double var =
                std::max(0.0, static_cast<double>(sumsq[k] / n) - mean * mean) * n / (n - 1.0);
            out[il * nh + ih] = {mean, std::sqrt(var / n), cfg.n_paths};
        }
    }
    return out;
}

McEstimate mc_resolvent(double x, const std::function<double(double)>& g, const SimConfig& cfg) {
    cfg.validate();
    const Corridor& c = cfg.corridor;
    const MarketParams& p = cfg.params;
    const double log_a = std::log(c.a), log_b = std::log(c.b);
    const StepParams sp = step_params(cfg);
    std::vector<double> vals(static_cast<std::size_t>(cfg.n_paths));
    parallel_paths(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
        const PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        double l = std::log(x), t = 0.0, integral = 0.0;
        double g_prev = g(std::exp(l));
        for (std::int64_t step = 0; step < sp.max_steps; ++step) {
            const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
            const double z = normal_quantile(to_unit_interval(blk0[0]));
            const double l1 = l + sp.drift + sp.vol * z;
            Crossing cross;
            if (check_crossing(l, l1, log_a, log_b, true, true, cfg.bridge, sp.sig2dt, blk0[1],
                               &cross)) {
                const double te = t + cross.frac * sp.dt;
                const double level = cross.side < 0 ? c.a : c.b;
                integral += 0.5 *
                            (std::exp(-2.0 * p.r * t) * g_prev +
                             std::exp(-2.0 * p.r * te) * g(level)) *
                            (cross.frac * sp.dt);
                break;
            }
            const double g1 = g(std::exp(l1));
            integral += 0.5 *
                        (std::exp(-2.0 * p.r * t) * g_prev +
                         std::exp(-2.0 * p.r * (t + sp.dt)) * g1) *
                        sp.dt;
            g_prev = g1;
            l = l1;
            t += sp.dt;
        }
        vals[static_cast<std::size_t>(i)] = integral;
    });
    const Moments m = moments(vals);
    return {m.mean, std::sqrt(m.variance / static_cast<double>(cfg.n_paths)), cfg.n_paths};
}

ExitStats mc_exit_stats(const SimConfig& cfg) {
    cfg.validate();
    const Corridor& c = cfg.corridor;
    const MarketParams& p = cfg.params;
    const double log_a = std::log(c.a), log_b = std::log(c.b);
    const StepParams sp = step_params(cfg);
    std::vector<double> up(static_cast<std::size_t>(cfg.n_paths));
    std::vector<double> dlo(static_cast<std::size_t>(cfg.n_paths));
    std::vector<double> dup(static_cast<std::size_t>(cfg.n_paths));
    parallel_paths(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
        const PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        double l = std::log(cfg.spot), t = 0.0;
        double u = 0.0, dl = 0.0, du = 0.0;
        for (std::int64_t step = 0; step < sp.max_steps; ++step) {
            const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
            const double z = normal_quantile(to_unit_interval(blk0[0]));
            const double l1 = l + sp.drift + sp.vol * z;
            Crossing cross;
            if (check_crossing(l, l1, log_a, log_b, true, true, cfg.bridge, sp.sig2dt, blk0[1],
                               &cross)) {
                const double te = t + cross.frac * sp.dt;
                if (cross.side > 0) {
                    u = 1.0;
                    du = std::exp(-2.0 * p.r * te);
                } else {
                    dl = std::exp(-2.0 * p.r * te);
                }
                break;
            }
            l = l1;
            t += sp.dt;
        }
        up[static_cast<std::size_t>(i)] = u;
        dlo[static_cast<std::size_t>(i)] = dl;
        dup[static_cast<std::size_t>(i)] = du;
    });
    ExitStats st;
    st.n = cfg.n_paths;
    const Moments mu = moments(up);
    const Moments ml = moments(dlo);
    const Moments mh = moments(dup);
    const double n = static_cast<double>(cfg.n_paths);
    st.prob_upper = mu.mean;
    st.prob_upper_se = std::sqrt(mu.variance / n);
    st.disc_lower = ml.mean;
    st.disc_lower_se = std::sqrt(ml.variance / n);
    st.disc_upper = mh.mean;
    st.disc_upper_se = std::sqrt(mh.variance / n);
    return st;
}

SuperhedgeStats superhedge_stats(const SuperhedgePlan& plan, const SimConfig& cfg) {
    cfg.validate();
    const MarketParams& p = cfg.params;
    const double log_a = std::log(plan.a);
    const double log_s_hat = std::log(plan.s_hat);
    const StepParams sp = step_params(cfg);

    std::vector<double> errs(static_cast<std::size_t>(cfg.n_paths));
    std::vector<unsigned char> traded(static_cast<std::size_t>(cfg.n_paths), 0);
    std::vector<unsigned char> exited(static_cast<std::size_t>(cfg.n_paths), 0);
    std::atomic<std::int64_t> untied{0};
    parallel_paths(cfg.n_paths, cfg.threads, [&](std::int64_t i) {
        const PathRng rng(cfg.seed, static_cast<std::uint64_t>(i));
        double l = std::log(cfg.spot), t = 0.0;
        bool did_trade = false, did_exit = false;
        double shares = 0.0, exit_t = 0.0;
        for (std::int64_t step = 0; step < sp.max_steps; ++step) {
            const auto blk0 = rng.block(static_cast<std::uint64_t>(step), 0);
            const double z = normal_quantile(to_unit_interval(blk0[0]));
            const double l1 = l + sp.drift + sp.vol * z;
            const double t1 = t + sp.dt;
            // The trade condition is on the discounted price and is checked
            // first: at S = a the discounted price is already below s_hat, so
            // a same-step exit still trades beforehand. The discrete check
            // overshoots s_hat slightly, which only adds shares.
            if (!did_trade && l1 - p.r * t1 <= log_s_hat) {
                did_trade = true;
                shares = plan.h + plan.m0 / std::exp(l1 - p.r * t1);
            }
            Crossing cross;
            if (check_crossing(l, l1, log_a, log_a + 1.0, true, false, cfg.bridge, sp.sig2dt,
                               blk0[1], &cross)) {
                did_exit = true;
                exit_t = t + cross.frac * sp.dt;
                break;
            }
            l = l1;
            t = t1;
        }
        double err;
        if (did_exit) {
            if (!did_trade) untied.fetch_add(1, std::memory_order_relaxed);
            const double disc = std::exp(-p.r * exit_t);
            const double port = did_trade ? shares * plan.a : std::exp(p.r * exit_t) * plan.m0 +
                                                                  plan.h * plan.a;
            err = disc * (port - put_price(plan.a, p));
        } else {
            const double s_hat_now = std::exp(l - p.r * t);
            const double disc_put = std::exp(-p.r * t) * put_price(std::exp(l), p);
            err = did_trade ? shares * s_hat_now - disc_put
                            : plan.m0 + plan.h * s_hat_now - disc_put;
        }
        errs[static_cast<std::size_t>(i)] = err;
        traded[static_cast<std::size_t>(i)] = did_trade ? 1 : 0;
        exited[static_cast<std::size_t>(i)] = did_exit ? 1 : 0;
    });

    SuperhedgeStats st;
    st.n_paths = cfg.n_paths;
    st.untied_exits = untied.load();
    std::vector<double> resolved, truncated;
    for (std::size_t i = 0; i < errs.size(); ++i) {
        (exited[i] ? resolved : truncated).push_back(errs[i]);
    }
    st.censored = static_cast<std::int64_t>(truncated.size());
    st.exit_frequency = static_cast<double>(resolved.size()) / static_cast<double>(cfg.n_paths);
    double tn = 0;
    for (auto v : traded) tn += v;
    st.trade_frequency = tn / static_cast<double>(cfg.n_paths);
    if (!resolved.empty()) {
        const Moments m = moments(resolved);
        st.mean = m.mean;
        st.variance = m.variance;
        st.min = *std::min_element(resolved.begin(), resolved.end());
        st.max = *std::max_element(resolved.begin(), resolved.end());
    }
    if (!truncated.empty()) {
        const Moments m = moments(truncated);
        st.censored_mean = m.mean;
        st.censored_min = *std::min_element(truncated.begin(), truncated.end());
        st.censored_max = *std::max_element(truncated.begin(), truncated.end());
    }
    return st;
}

}  // namespace onehedge
