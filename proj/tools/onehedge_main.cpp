// Command-line front end: pricing, free-boundary solving, holding
// optimization, half-line variants, simulation sweeps and figure-data
// emission. Exit codes: 0 success, 2 usage/validation, 3 numerical failure.

#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>
#include <json.hpp>

#include "onehedge/boundary.hpp"
#include "onehedge/diffusion.hpp"
#include "onehedge/errors.hpp"
#include "onehedge/half_line.hpp"
#include "onehedge/market.hpp"
#include "onehedge/optimizer.hpp"
#include "onehedge/payoff.hpp"
#include "onehedge/sim.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace onehedge;

namespace {

struct Options {
    double r = 0.03;
    double sigma = 0.30;
    double strike = 100.0;
    double a = 90.0;
    double b = 110.0;
    double spot = 100.0;
    double h = std::numeric_limits<double>::quiet_NaN();
    int h_grid = 0;
    int x_grid = 0;
    std::string sweep = "spot";
    std::int64_t n_paths = 100000;
    double dt = 1e-4;
    double t_max = 0.0;
    std::uint64_t seed = 1;
    int threads = 0;
    bool bridge = true;
    std::string mode = "zero-mean";
    std::string out_dir;
    std::string emit_config;
    bool emit_plot_data = false;
};

std::string fmt17(double v) {
    char buf[64];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

void load_config_file(const std::string& path, Options* o) {
    std::ifstream in(path);
    if (!in) throw ConfigError("cannot open config file " + path);
    json j;
    in >> j;
    auto get = [&](const char* key, auto* slot) {
        if (j.contains(key)) *slot = j.at(key).get<std::decay_t<decltype(*slot)>>();
    };
    get("r", &o->r);
    get("sigma", &o->sigma);
    get("strike", &o->strike);
    get("a", &o->a);
    get("b", &o->b);
    get("spot", &o->spot);
    get("h", &o->h);
    get("h_grid", &o->h_grid);
    get("x_grid", &o->x_grid);
    get("sweep", &o->sweep);
    get("n_paths", &o->n_paths);
    get("dt", &o->dt);
    get("t_max", &o->t_max);
    get("seed", &o->seed);
    get("threads", &o->threads);
    get("bridge", &o->bridge);
    get("mode", &o->mode);
    get("out", &o->out_dir);
}

json to_json(const Options& o) {
    json j;
    j["r"] = o.r;
    j["sigma"] = o.sigma;
    j["strike"] = o.strike;
    j["a"] = o.a;
    j["b"] = o.b;
    j["spot"] = o.spot;
    if (std::isfinite(o.h)) j["h"] = o.h;
    j["h_grid"] = o.h_grid;
    j["x_grid"] = o.x_grid;
    j["sweep"] = o.sweep;
    j["n_paths"] = o.n_paths;
    j["dt"] = o.dt;
    j["t_max"] = o.t_max;
    j["seed"] = o.seed;
    j["threads"] = o.threads;
    j["bridge"] = o.bridge;
    j["mode"] = o.mode;
    if (!o.out_dir.empty()) j["out"] = o.out_dir;
    return j;
}

std::ofstream open_out(const Options& o, const std::string& name) {
    if (o.out_dir.empty()) throw ConfigError("--out DIR is required for file output");
    fs::create_directories(o.out_dir);
    const fs::path path = fs::path(o.out_dir) / name;
    std::ofstream f(path);
    if (!f) throw ConfigError("cannot open " + path.string());
    std::cerr << "wrote " << path.string() << "\n";
    return f;
}

MarketParams market(const Options& o) { return MarketParams::make(o.r, o.sigma, o.strike); }

SimConfig sim_config(const Options& o, const MarketParams& p, const Corridor& c) {
    SimConfig cfg;
    cfg.params = p;
    cfg.corridor = c;
    cfg.spot = o.spot;
    cfg.n_paths = o.n_paths;
    cfg.dt = o.dt;
    cfg.t_max = o.t_max;
    cfg.seed = o.seed;
    cfg.bridge = o.bridge;
    cfg.threads = o.threads;
    return cfg;
}

std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> v(n);
    for (int i = 0; i < n; ++i) v[i] = lo + (hi - lo) * i / (n - 1.0);
    return v;
}

// ---------------------------------------------------------------- figures

void emit_gamma_vs_delta(const Options& o, const Corridor& c, const MarketParams& p) {
    auto f = open_out(o, "gamma_vs_delta.csv");
    f << "x,gamma,put_delta\n";
    for (double x : linspace(c.a, c.b, 400)) {
        f << fmt17(x) << ',' << fmt17(gamma_post_trade(x, c, p)) << ','
          << fmt17(put_delta(x, p)) << '\n';
    }
}

std::vector<double> representative_holdings(const Corridor& c, const MarketParams& p) {
    const double ga = gamma_post_trade_limit_lower(c, p);
    const double gb = gamma_post_trade_limit_upper(c, p);
    const double pa = put_delta(c.a, p), pb = put_delta(c.b, p);
    return {0.5 * (pa + ga), 0.5 * (ga + gb), 0.5 * (gb + pb)};
}

void emit_sign_function(const Options& o, const Corridor& c, const MarketParams& p) {
    auto f = open_out(o, "sign_function.csv");
    f << "h,x,G\n";
    for (double h : representative_holdings(c, p)) {
        for (double x : linspace(c.a * 1.0001, c.b * 0.9999, 400)) {
            f << fmt17(h) << ',' << fmt17(x) << ',' << fmt17(sign_function(x, h, c, p)) << '\n';
        }
    }
}

void emit_value_vs_payoff(const Options& o, const Corridor& c, const MarketParams& p) {
    auto f = open_out(o, "value_vs_payoff.csv");
    f << "h,x,payoff,value\n";
    for (double h : representative_holdings(c, p)) {
        const auto sol = solve_boundaries(h, c, p);
        for (double x : linspace(c.a, c.b, 400)) {
            f << fmt17(h) << ',' << fmt17(x) << ',' << fmt17(stopping_payoff(x, c, p)) << ','
              << fmt17(value(x, h, sol, c, p)) << '\n';
        }
    }
}

void emit_boundary_curves(const Options& o, const Corridor& c, const MarketParams& p,
                          const BoundaryCurves& curves) {
    auto f = open_out(o, "boundary_curves.csv");
    f << "h,case,x1,x2,c1,c2,error\n";
    for (const auto& row : curves.rows) {
        f << fmt17(row.h) << ',';
        if (row.ok) {
            f << to_string(row.tag) << ',' << fmt17(row.x1) << ',' << fmt17(row.x2) << ','
              << fmt17(row.c1) << ',' << fmt17(row.c2) << ",\n";
        } else {
            f << ",,,,," << row.error << '\n';
        }
    }
    (void)c;
    (void)p;
}

void emit_holdings_and_surface(const Options& o, const Corridor& c, const MarketParams& p) {
    {
        auto f = open_out(o, "optimal_holdings.csv");
        f << "x,h_star,gamma,put_delta,residual\n";
        const int n = o.x_grid > 0 ? o.x_grid : 60;
        BoundarySolver solver(c, p);
        for (double x : linspace(c.a + 1e-6 * (c.b - c.a), c.b - 1e-6 * (c.b - c.a), n)) {
            try {
                const auto plan = optimal_initial_holding(x, solver);
                f << fmt17(x) << ',' << fmt17(plan.h_star) << ','
                  << fmt17(gamma_post_trade(x, c, p)) << ',' << fmt17(put_delta(x, p)) << ','
                  << fmt17(plan.residual) << '\n';
            } catch (const Error& e) {
                f << fmt17(x) << ",,,," << '\n';
            }
        }
    }
    {
        auto f = open_out(o, "value_surface.csv");
        f << "x,h,value\n";
        BoundarySolver solver(c, p);
        const double pa = put_delta(c.a, p), pb = put_delta(c.b, p);
        for (double h : linspace(pa, pb, 41)) {
            BoundarySolution sol;
            bool ok = true;
            try {
                sol = solver.solve(h);
            } catch (const Error&) {
                ok = false;
            }
            for (double x : linspace(c.a, c.b, 41)) {
                f << fmt17(x) << ',' << fmt17(h) << ','
                  << (ok ? fmt17(value(x, h, sol, c, p)) : "") << '\n';
            }
        }
    }
}

void emit_sample_path(const Options& o, const Corridor& c, const MarketParams& p) {
    SimConfig cfg = sim_config(o, p, c);
    cfg.n_paths = 1;
    const auto plans = make_plans(cfg);
    const auto info = simulate_exit(0, cfg, 50);
    auto f = open_out(o, "sample_path.csv");
    f << "t,spot\n";
    for (const auto& [t, s] : info.samples) f << fmt17(t) << ',' << fmt17(s) << '\n';

    auto g = open_out(o, "sample_path_events.csv");
    g << "event,value\n";
    g << "h_star," << fmt17(plans.hedge.h_star) << '\n';
    g << "trade_lower," << fmt17(plans.specs[0].lo) << '\n';
    g << "trade_upper," << fmt17(plans.specs[0].hi) << '\n';
    g << "exit_time," << fmt17(info.tau) << '\n';
    g << "exit_spot," << fmt17(info.spot) << '\n';
}

// ---------------------------------------------------------------- commands

int cmd_price(const Options& o) {
    const auto p = market(o);
    std::cout << "spot            " << fmt17(o.spot) << "\n"
              << "put_price       " << fmt17(put_price(o.spot, p)) << "\n"
              << "put_delta       " << fmt17(put_delta(o.spot, p)) << "\n"
              << "exercise_bound  " << fmt17(p.a_hat) << "\n"
              << "d               " << fmt17(p.d) << "\n"
              << "q1              " << fmt17(p.q1) << "\n"
              << "q2              " << fmt17(p.q2) << "\n";
    return 0;
}

int cmd_boundaries(const Options& o) {
    const auto p = market(o);
    const auto c = make_corridor(o.a, o.b, p);
    std::vector<double> hs;
    if (std::isfinite(o.h)) {
        hs.push_back(o.h);
    } else {
        const int n = o.h_grid > 0 ? o.h_grid : 200;
        hs = linspace(put_delta(c.a, p), put_delta(c.b, p), n);
    }
    for (double h : hs) {
        if (h < put_delta(c.a, p) - 1e-12 || h > put_delta(c.b, p) + 1e-12) {
            throw DomainError("holding " + std::to_string(h) + " outside [P'(a), P'(b)]");
        }
    }
    const auto curves = boundary_curves(hs, c, p);
    std::cout << "h,case,x1,x2,c1,c2,error\n";
    std::size_t failed = 0;
    for (const auto& row : curves.rows) {
        std::cout << fmt17(row.h) << ',';
        if (row.ok) {
            std::cout << to_string(row.tag) << ',' << fmt17(row.x1) << ',' << fmt17(row.x2)
                      << ',' << fmt17(row.c1) << ',' << fmt17(row.c2) << ",\n";
        } else {
            ++failed;
            std::cout << ",,,,," << row.error << "\n";
        }
    }
    bool monotone = true;
    for (std::size_t i = 1; i < curves.rows.size(); ++i) {
        if (!curves.rows[i].ok || !curves.rows[i - 1].ok) continue;
        const double tol = 1e-7 * (c.b - c.a);
        if (curves.rows[i].x1 < curves.rows[i - 1].x1 - tol ||
            curves.rows[i].x2 < curves.rows[i - 1].x2 - tol) {
            monotone = false;
        }
    }
    std::cerr << "rows " << curves.rows.size() << ", failed " << failed
              << ", boundaries non-decreasing: " << (monotone ? "yes" : "NO");
    if (curves.h_alpha) std::cerr << ", h_alpha " << *curves.h_alpha;
    if (curves.h_beta) std::cerr << ", h_beta " << *curves.h_beta;
    std::cerr << "\n";
    if (failed == curves.rows.size()) {
        throw NumericalError("every boundary row failed");
    }
    if (o.emit_plot_data) emit_boundary_curves(o, c, p, curves);
    return 0;
}

int cmd_optimize(const Options& o) {
    const auto p = market(o);
    const auto c = make_corridor(o.a, o.b, p);
    if (o.x_grid > 0) {
        BoundarySolver solver(c, p);
        std::cout << "x,h_star,gamma,put_delta,residual\n";
        std::size_t failed = 0;
        for (double x : linspace(c.a + 1e-4 * (c.b - c.a), c.b - 1e-4 * (c.b - c.a), o.x_grid)) {
            try {
                const auto plan = optimal_initial_holding(x, solver);
                std::cout << fmt17(x) << ',' << fmt17(plan.h_star) << ','
                          << fmt17(gamma_post_trade(x, c, p)) << ',' << fmt17(put_delta(x, p))
                          << ',' << fmt17(plan.residual) << '\n';
            } catch (const Error&) {
                ++failed;
                std::cout << fmt17(x) << ",,,,\n";
            }
        }
        if (failed > 0) std::cerr << failed << " grid points failed\n";
    } else {
        if (!(o.spot > c.a && o.spot < c.b)) {
            throw DomainError("spot must lie strictly inside the corridor");
        }
        const auto plan = optimal_initial_holding(o.spot, c, p);
        std::cout << "h_star     " << fmt17(plan.h_star) << "\n"
                  << "value      " << fmt17(plan.value) << "\n"
                  << "residual   " << fmt17(plan.residual) << "\n"
                  << "case       " << to_string(plan.sol.cls.tag) << "\n"
                  << "x1         " << fmt17(plan.sol.x1) << "\n"
                  << "x2         " << fmt17(plan.sol.x2) << "\n"
                  << "gamma_here " << fmt17(gamma_post_trade(o.spot, c, p)) << "\n"
                  << "put_delta  " << fmt17(put_delta(o.spot, p)) << "\n";
        if (plan.fixed_point_roots.size() > 1) {
            std::cout << "fixed_point_roots";
            for (double r : plan.fixed_point_roots) std::cout << ' ' << fmt17(r);
            std::cout << "\n";
        }
    }
    if (o.emit_plot_data) emit_holdings_and_surface(o, c, p);
    return 0;
}

int cmd_simulate(const Options& o) {
    const auto p = market(o);
    const auto c = make_corridor(o.a, o.b, p);
    std::cerr << "simulate: r=" << o.r << ", sigma=" << o.sigma << ", K=" << o.strike
              << ", S0=" << o.spot << ", a=" << o.a << ", b=" << o.b << ", n=" << o.n_paths
              << ", dt=" << o.dt << ", seed=" << o.seed
              << ", bridge=" << (o.bridge ? "on" : "off") << "\n";
    const auto sweep = sweep_from_string(o.sweep);
    const auto grid = default_sweep_grid(sweep);
    const auto base = sim_config(o, p, c);
    const auto rows = compare(sweep, base, grid);
    std::ostringstream csv;
    write_compare_csv(csv, sweep, rows);
    std::cout << csv.str();
    std::size_t failed = 0;
    for (const auto& row : rows) {
        if (!row.ok) {
            ++failed;
            std::cerr << "row " << row.sweep_value << " failed: " << row.error << "\n";
        }
    }
    if (!o.out_dir.empty()) {
        auto f = open_out(o, "simulate_" + to_string(sweep) + ".csv");
        f << csv.str();
    }
    if (o.emit_plot_data) emit_sample_path(o, c, p);
    if (failed == rows.size()) throw NumericalError("every sweep row failed");
    return 0;
}

int cmd_halfline(const Options& o) {
    const auto p = market(o);
    if (o.mode == "zero-mean") {
        const double h = std::isfinite(o.h) ? o.h : put_delta(o.a, p);
        if (h == 0.0) {
            std::cout << "degenerate: with h = 0 the sign function vanishes identically;\n"
                         "any stopping time is optimal and the value equals the payoff\n"
                         "M_inf(spot) = "
                      << fmt17(payoff_infinite(o.spot, o.a, p)) << "\n";
            return 0;
        }
        const auto sol = solve_boundary_infinite(h, o.a, p);
        std::cout << "h             " << fmt17(h) << "\n"
                  << "x_star        " << fmt17(sol.x_star) << "\n"
                  << "x_G           " << fmt17(x_p(0.5 * h, p)) << "\n"
                  << "value_at_spot " << fmt17(half_line_value(o.spot, sol, p)) << "\n"
                  << "payoff_at_spot " << fmt17(payoff_infinite(o.spot, o.a, p)) << "\n"
                  << "post_trade_holding " << fmt17(sol.post_trade_holding) << "\n";
    } else if (o.mode == "superhedge") {
        const auto plan = superhedge_plan(o.spot, o.a, p);
        std::cout << "h        " << fmt17(plan.h) << "\n"
                  << "m0       " << fmt17(plan.m0) << "\n"
                  << "s_hat    " << fmt17(plan.s_hat) << "\n"
                  << "h1       " << fmt17(plan.h1) << "\n";
        SimConfig cfg;
        cfg.params = p;
        cfg.corridor = Corridor{o.a, std::numeric_limits<double>::infinity()};
        cfg.spot = o.spot;
        cfg.n_paths = std::min<std::int64_t>(o.n_paths, 10000);
        cfg.dt = std::max(o.dt, 1e-3);
        cfg.t_max = o.t_max > 0 ? o.t_max : std::log(1e8) / (2.0 * p.r);
        cfg.seed = o.seed;
        cfg.threads = o.threads;
        const auto st = superhedge_stats(plan, cfg);
        std::cout << "paths                " << st.n_paths << "\n"
                  << "trade_frequency      " << fmt17(st.trade_frequency) << "\n"
                  << "exit_frequency       " << fmt17(st.exit_frequency) << "\n"
                  << "untraded_exits       " << st.untied_exits << "\n"
                  << "error_mean           " << fmt17(st.mean) << "\n"
                  << "error_variance       " << fmt17(st.variance) << "\n"
                  << "error_min            " << fmt17(st.min) << "\n"
                  << "error_max            " << fmt17(st.max) << "\n"
                  << "censored             " << st.censored << "\n"
                  << "censored_error_mean  " << fmt17(st.censored_mean) << "\n"
                  << "censored_error_min   " << fmt17(st.censored_min) << "\n"
                  << "censored_error_max   " << fmt17(st.censored_max) << "\n";
    } else {
        throw ConfigError("halfline mode must be zero-mean or superhedge");
    }
    return 0;
}

int cmd_curves(const Options& o) {
    const auto p = market(o);
    const auto c = make_corridor(o.a, o.b, p);
    emit_gamma_vs_delta(o, c, p);
    emit_sign_function(o, c, p);
    emit_value_vs_payoff(o, c, p);
    const int n = o.h_grid > 0 ? o.h_grid : 200;
    const auto hs = linspace(put_delta(c.a, p), put_delta(c.b, p), n);
    emit_boundary_curves(o, c, p, boundary_curves(hs, c, p));
    emit_holdings_and_surface(o, c, p);
    emit_sample_path(o, c, p);
    return 0;
}

}  // namespace

int main(int argc, char** argv) {
    Options o;

    // --config is applied before the regular parse so flags override it.
    for (int i = 1; i + 1 < argc; ++i) {
        if (std::string(argv[i]) == "--config") {
            try {
                load_config_file(argv[i + 1], &o);
            } catch (const std::exception& e) {
                std::cerr << "error: " << e.what() << "\n";
                return 2;
            }
        }
    }

    CLI::App app{"variance-optimal single-rebalance hedging of a perpetual American put"};
    app.require_subcommand(1);
    std::string config_path;
    app.add_option("--config", config_path, "JSON config file (flags override)");
    app.add_option("--out", o.out_dir, "output directory for generated files");
    app.add_option("--seed", o.seed, "base RNG seed");
    app.add_option("--threads", o.threads, "worker threads (0 = hardware)");
    app.add_option("--emit-config", o.emit_config, "write the effective config as JSON");
    app.add_flag("--emit-plot-data", o.emit_plot_data, "write figure data series to --out");

    auto add_market = [&](CLI::App* cmd) {
        cmd->fallthrough();  // let --seed/--out/--threads appear after the subcommand
        cmd->add_option("--r", o.r, "risk-free rate per year");
        cmd->add_option("--sigma", o.sigma, "volatility per sqrt-year");
        cmd->add_option("--strike", o.strike, "strike");
    };
    auto add_corridor = [&](CLI::App* cmd) {
        cmd->add_option("--a", o.a, "lower threshold");
        cmd->add_option("--b", o.b, "upper threshold");
    };

    auto* price = app.add_subcommand("price", "perpetual put price and delta");
    add_market(price);
    price->add_option("--spot", o.spot, "spot price")->required();

    auto* boundaries = app.add_subcommand("boundaries", "optimal trading boundaries per holding");
    add_market(boundaries);
    add_corridor(boundaries);
    boundaries->add_option("--holding", o.h, "single holding");
    boundaries->add_option("--h-grid", o.h_grid, "holding grid size (default 200)");

    auto* optimize = app.add_subcommand("optimize", "optimal initial holding at a spot");
    add_market(optimize);
    add_corridor(optimize);
    optimize->add_option("--spot", o.spot, "spot price");
    optimize->add_option("--x-grid", o.x_grid, "emit a CSV over a spot grid of this size");

    auto* simulate = app.add_subcommand("simulate", "strategy-comparison sweep tables");
    add_market(simulate);
    add_corridor(simulate);
    simulate->add_option("--spot", o.spot, "initial spot");
    simulate->add_option("--sweep", o.sweep, "spot, sigma or b");
    simulate->add_option("--n", o.n_paths, "number of paths");
    simulate->add_option("--dt", o.dt, "time step in years");
    simulate->add_option("--t-max", o.t_max, "horizon cap in years");
    simulate->add_flag("--no-bridge{false}", o.bridge, "disable the bridge correction");

    auto* halfline = app.add_subcommand("halfline", "b = infinity variants");
    add_market(halfline);
    halfline->add_option("--a", o.a, "lower threshold");
    halfline->add_option("--spot", o.spot, "spot price");
    halfline->add_option("--mode", o.mode, "zero-mean or superhedge");
    halfline->add_option("--holding", o.h, "initial holding (zero-mean mode)");
    halfline->add_option("--n", o.n_paths, "paths for the superhedge summary");
    halfline->add_option("--dt", o.dt, "time step in years");
    halfline->add_option("--t-max", o.t_max, "horizon cap in years");

    auto* curves = app.add_subcommand("curves", "emit figure data series to --out");
    add_market(curves);
    add_corridor(curves);
    curves->add_option("--spot", o.spot, "spot used for path/holding figures");
    curves->add_option("--h-grid", o.h_grid, "holding grid size for boundary curves");
    curves->add_option("--x-grid", o.x_grid, "spot grid size for holding curves");
    curves->add_option("--n", o.n_paths, "paths for the sample-path figure");
    curves->add_option("--dt", o.dt, "time step in years");
    curves->add_option("--seed", o.seed, "path seed");

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        if (!o.emit_config.empty()) {
            std::ofstream f(o.emit_config);
            f << to_json(o).dump(2) << "\n";
        }
        if (price->parsed()) return cmd_price(o);
        if (boundaries->parsed()) return cmd_boundaries(o);
        if (optimize->parsed()) return cmd_optimize(o);
        if (simulate->parsed()) return cmd_simulate(o);
        if (halfline->parsed()) return cmd_halfline(o);
        if (curves->parsed()) return cmd_curves(o);
    } catch (const DomainError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const ConfigError& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 2;
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    } catch (const std::exception& e) {
        std::cerr << "error: " << e.what() << "\n";
        return 3;
    }
    return 0;
}
