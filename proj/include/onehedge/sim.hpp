#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "onehedge/half_line.hpp"
#include "onehedge/optimizer.hpp"

namespace onehedge {

struct SimConfig {
    MarketParams params;
    Corridor corridor;
    double spot = 0;
    std::int64_t n_paths = 0;
    double dt = 1e-4;       // years per step
    double t_max = 0;       // 0: derived so e^{-2 r t_max} <= 1e-8
    std::uint64_t seed = 0;
    bool bridge = true;     // Brownian-bridge barrier correction
    int threads = 0;        // 0: hardware concurrency

    void validate() const;
    double horizon() const;  // effective t_max
};

// A hedging strategy as simulated: an initial holding plus at most one
// rebalance, triggered when the spot first leaves (lo, hi).
struct StrategySpec {
    double theta0 = 0;
    bool has_trade = false;
    double lo = 0, hi = 0;
    bool lo_active = false, hi_active = false;
    double theta_lo = 0, theta_hi = 0;
    int rng_lane = 0;  // bridge lane used by the trade barrier
};

struct StrategyPlans {
    HedgePlan hedge;                    // optimal plan at the initial spot
    std::array<StrategySpec, 5> specs;  // strategies 1..5
};

StrategyPlans make_plans(const SimConfig& cfg);

// Single-path corridor exit, mostly for diagnostics and path emission. With
// sample_stride > 0, every stride-th point of the path is recorded.
struct ExitInfo {
    double tau = 0;
    int side = 0;  // -1 lower, +1 upper, 0 censored
    double spot = 0;
    bool censored = false;
    std::vector<std::pair<double, double>> samples;  // (t, S_t)
};

ExitInfo simulate_exit(std::uint64_t path_index, const SimConfig& cfg, int sample_stride = 0);

// Discounted tracking error of one strategy on one path. Strategies are
// numbered 1..5 as in the comparison tables.
double run_strategy(int id, std::uint64_t path_index, const SimConfig& cfg,
                    const StrategyPlans& plans);

struct StrategyErrors {
    std::array<std::vector<double>, 5> errors;  // per-path discounted errors
    std::int64_t censored = 0;
};

StrategyErrors run_all_strategies(const SimConfig& cfg, const StrategyPlans& plans);

struct StrategyStats {
    int strategy = 0;
    double mean = 0;
    double variance = 0;
    double var_se = 0;   // from the fourth central moment
    double mean_se = 0;
    std::int64_t n_paths = 0;
    std::uint64_t seed = 0;
    std::int64_t censored = 0;
};

StrategyStats estimate(int id, const SimConfig& cfg, const StrategyPlans& plans);
std::array<StrategyStats, 5> estimate_all(const SimConfig& cfg, const StrategyPlans& plans);

enum class Sweep { spot, sigma, upper };
Sweep sweep_from_string(const std::string& name);
std::string to_string(Sweep sweep);
std::vector<double> default_sweep_grid(Sweep sweep);

struct CompareRow {
    double sweep_value = 0;
    std::array<StrategyStats, 5> stats;
    bool ok = true;
    std::string error;
};

std::vector<CompareRow> compare(Sweep sweep, const SimConfig& base, std::span<const double> grid);

// CSV with columns sweep_param, strategy, n_paths, seed, mean, variance,
// var_se, censored_count; decimals carry 17 significant digits.
void write_compare_csv(std::ostream& os, Sweep sweep, std::span<const CompareRow> rows);

struct McEstimate {
    double estimate = 0;
    double se = 0;
    std::int64_t n = 0;
};

// Stopping rule for the cost oracle: trade immediately, never before the
// corridor exit, or at the first exit from (lo, hi).
struct StopRule {
    enum class Kind { immediate, never, thresholds };
    Kind kind = Kind::thresholds;
    double lo = 0, hi = 0;
    static StopRule immediately() { return {Kind::immediate, 0, 0}; }
    static StopRule never_stop() { return {Kind::never, 0, 0}; }
    static StopRule exit_of(double lo, double hi) { return {Kind::thresholds, lo, hi}; }
};

// E_x[ int_0^tau e^{-2ru} f(S_u, h) du + e^{-2r tau} M(S_tau) ].
McEstimate mc_stopping_cost(double x, double h, const StopRule& rule, const SimConfig& cfg);

// Mean cost for every (lo, hi) threshold pair over a shared set of paths,
// discretely monitored. Returns a los.size() x his.size() row-major table.
std::vector<McEstimate> mc_threshold_grid(double x, double h, std::span<const double> los,
                                          std::span<const double> his, const SimConfig& cfg);

// Monte Carlo resolvent E_x[ int_0^{tau_I} e^{-2ru} g(S_u) du ].
McEstimate mc_resolvent(double x, const std::function<double(double)>& g, const SimConfig& cfg);

// Corridor-exit functionals: P(exit at b), E[e^{-2r tau} 1{exit at a/b}].
struct ExitStats {
    double prob_upper = 0, prob_upper_se = 0;
    double disc_lower = 0, disc_lower_se = 0;
    double disc_upper = 0, disc_upper_se = 0;
    std::int64_t n = 0;
};
ExitStats mc_exit_stats(const SimConfig& cfg);

// Half-line superhedge: simulate to tau_a (capped at the horizon, which the
// heavy-tailed tau_a exceeds with nonnegligible probability) and report the
// error distribution split into resolved and horizon-censored paths.
struct SuperhedgeStats {
    std::int64_t n_paths = 0;
    std::int64_t censored = 0;           // paths that reached the horizon first
    double trade_frequency = 0;          // fraction of paths where tau* fired
    double exit_frequency = 0;           // fraction of paths absorbed at a
    std::int64_t untied_exits = 0;       // exits without a prior trade (expected 0)
    double mean = 0, variance = 0;       // resolved paths only
    double min = 0, max = 0;             // resolved paths only
    double censored_mean = 0;            // truncation proxy values at the horizon
    double censored_min = 0, censored_max = 0;
};
SuperhedgeStats superhedge_stats(const SuperhedgePlan& plan, const SimConfig& cfg);

}  // namespace onehedge
