#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "onehedge/boundary.hpp"
#include "onehedge/diffusion.hpp"
#include "onehedge/errors.hpp"
#include "onehedge/half_line.hpp"
#include "onehedge/market.hpp"
#include "onehedge/optimizer.hpp"
#include "onehedge/payoff.hpp"
#include "onehedge/rng.hpp"
#include "onehedge/sim.hpp"

namespace py = pybind11;
using namespace onehedge;

namespace {

Corridor corridor_or_halfline(double a, double b, const MarketParams& p) {
    if (std::isinf(b)) return Corridor{a, b};
    return make_corridor(a, b, p);
}

}  // namespace

PYBIND11_MODULE(_onehedge, m) {
    m.doc() = "variance-optimal single-rebalance hedging of a perpetual American put";

    py::register_exception<DomainError>(m, "DomainError", PyExc_ValueError);
    py::register_exception<ConfigError>(m, "ConfigError", PyExc_ValueError);
    py::register_exception<AssumptionViolated>(m, "AssumptionViolated", PyExc_RuntimeError);
    py::register_exception<DivergentIntegral>(m, "DivergentIntegral", PyExc_ArithmeticError);
    py::register_exception<NumericalError>(m, "NumericalError", PyExc_RuntimeError);

    py::class_<MarketParams>(m, "MarketParams")
        .def(py::init(&MarketParams::make), py::arg("r"), py::arg("sigma"), py::arg("strike"))
        .def_readonly("r", &MarketParams::r)
        .def_readonly("sigma", &MarketParams::sigma)
        .def_readonly("strike", &MarketParams::strike)
        .def_readonly("d", &MarketParams::d)
        .def_readonly("a_hat", &MarketParams::a_hat)
        .def_readonly("q1", &MarketParams::q1)
        .def_readonly("q2", &MarketParams::q2)
        .def("__repr__", [](const MarketParams& p) {
            return "MarketParams(r=" + std::to_string(p.r) + ", sigma=" + std::to_string(p.sigma) +
                   ", strike=" + std::to_string(p.strike) + ")";
        });

    py::class_<Corridor>(m, "Corridor")
        .def_readonly("a", &Corridor::a)
        .def_readonly("b", &Corridor::b)
        .def("is_half_line", &Corridor::is_half_line);
    m.def("make_corridor", &corridor_or_halfline, py::arg("a"), py::arg("b"), py::arg("params"));

    m.def("put_price", &put_price, py::arg("x"), py::arg("params"));
    m.def("put_delta", &put_delta, py::arg("x"), py::arg("params"));
    m.def("x_p", &x_p, py::arg("h"), py::arg("params"));
    m.def("running_cost", &running_cost, py::arg("x"), py::arg("theta"), py::arg("params"));
    m.def("characteristic_roots", &characteristic_roots, py::arg("params"));

    m.def("gamma_functions",
          [](double x, const Corridor& c, const MarketParams& p) {
              const auto g = gamma_functions(x, c, p);
              return py::make_tuple(g.g1, g.g2, g.g3);
          },
          py::arg("x"), py::arg("corridor"), py::arg("params"));
    m.def("gamma_post_trade", &gamma_post_trade, py::arg("x"), py::arg("corridor"),
          py::arg("params"));
    m.def("stopping_payoff", &stopping_payoff, py::arg("x"), py::arg("corridor"),
          py::arg("params"));
    m.def("quadratic_cost", &quadratic_cost, py::arg("x"), py::arg("zeta"), py::arg("corridor"),
          py::arg("params"));
    m.def("sign_function", &sign_function, py::arg("x"), py::arg("h"), py::arg("corridor"),
          py::arg("params"));
    m.def("x_gamma", &x_gamma, py::arg("h"), py::arg("corridor"), py::arg("params"));
    m.def("resolvent",
          [](double x, const std::function<double(double)>& g, const Corridor& c,
             const MarketParams& p) { return resolvent(x, g, c, p); },
          py::arg("x"), py::arg("g"), py::arg("corridor"), py::arg("params"));

    py::enum_<CaseTag>(m, "CaseTag")
        .value("A1", CaseTag::A1)
        .value("A2", CaseTag::A2)
        .value("A3", CaseTag::A3);

    py::class_<CaseClassification>(m, "CaseClassification")
        .def_readonly("tag", &CaseClassification::tag)
        .def_readonly("h", &CaseClassification::h)
        .def_readonly("x_g1", &CaseClassification::x_g1)
        .def_readonly("x_g2", &CaseClassification::x_g2)
        .def_readonly("tangential_roots", &CaseClassification::tangential_roots);
    m.def("classify_case", &classify_case, py::arg("h"), py::arg("corridor"), py::arg("params"));

    py::class_<BoundarySolution>(m, "BoundarySolution")
        .def_readonly("h", &BoundarySolution::h)
        .def_readonly("x1", &BoundarySolution::x1)
        .def_readonly("x2", &BoundarySolution::x2)
        .def_readonly("c1", &BoundarySolution::c1)
        .def_readonly("c2", &BoundarySolution::c2)
        .def_readonly("case", &BoundarySolution::cls)
        .def_readonly("lower_interior", &BoundarySolution::lower_interior)
        .def_readonly("upper_interior", &BoundarySolution::upper_interior);
    m.def("solve_boundaries", &solve_boundaries, py::arg("h"), py::arg("corridor"),
          py::arg("params"));
    m.def("value", &value, py::arg("x"), py::arg("h"), py::arg("solution"), py::arg("corridor"),
          py::arg("params"));

    m.def("gamma_hat",
          py::overload_cast<double, double, const Corridor&, const MarketParams&>(&gamma_hat),
          py::arg("x"), py::arg("h"), py::arg("corridor"), py::arg("params"));
    m.def("dV_dh", &dV_dh, py::arg("x"), py::arg("h"), py::arg("corridor"), py::arg("params"));

    py::class_<HedgePlan>(m, "HedgePlan")
        .def_readonly("x", &HedgePlan::x)
        .def_readonly("h_star", &HedgePlan::h_star)
        .def_readonly("solution", &HedgePlan::sol)
        .def_readonly("value", &HedgePlan::value)
        .def_readonly("residual", &HedgePlan::residual)
        .def_readonly("fixed_point_roots", &HedgePlan::fixed_point_roots);
    m.def("optimal_initial_holding",
          py::overload_cast<double, const Corridor&, const MarketParams&>(
              &optimal_initial_holding),
          py::arg("x"), py::arg("corridor"), py::arg("params"));
    m.def("scalar_value", &scalar_value, py::arg("x"), py::arg("corridor"), py::arg("params"));

    m.def("sign_function_infinite", &sign_function_infinite, py::arg("x"), py::arg("h"),
          py::arg("params"));
    m.def("payoff_infinite", &payoff_infinite, py::arg("x"), py::arg("a"), py::arg("params"));
    py::class_<HalfLineSolution>(m, "HalfLineSolution")
        .def_readonly("h", &HalfLineSolution::h)
        .def_readonly("a", &HalfLineSolution::a)
        .def_readonly("x_star", &HalfLineSolution::x_star)
        .def_readonly("c1", &HalfLineSolution::c1)
        .def_readonly("c2", &HalfLineSolution::c2)
        .def_readonly("post_trade_holding", &HalfLineSolution::post_trade_holding);
    m.def("solve_boundary_infinite", &solve_boundary_infinite, py::arg("h"), py::arg("a"),
          py::arg("params"));
    m.def("half_line_value", &half_line_value, py::arg("x"), py::arg("solution"),
          py::arg("params"));
    py::class_<SuperhedgePlan>(m, "SuperhedgePlan")
        .def_readonly("x", &SuperhedgePlan::x)
        .def_readonly("a", &SuperhedgePlan::a)
        .def_readonly("h", &SuperhedgePlan::h)
        .def_readonly("m0", &SuperhedgePlan::m0)
        .def_readonly("s_hat", &SuperhedgePlan::s_hat)
        .def_readonly("h1", &SuperhedgePlan::h1);
    m.def("superhedge_plan", &superhedge_plan, py::arg("x"), py::arg("a"), py::arg("params"));

    py::class_<SimConfig>(m, "SimConfig")
        .def(py::init([](const MarketParams& p, const Corridor& c, double spot,
                         std::int64_t n_paths, double dt, double t_max, std::uint64_t seed,
                         bool bridge, int threads) {
                 SimConfig cfg;
                 cfg.params = p;
                 cfg.corridor = c;
                 cfg.spot = spot;
                 cfg.n_paths = n_paths;
                 cfg.dt = dt;
                 cfg.t_max = t_max;
                 cfg.seed = seed;
                 cfg.bridge = bridge;
                 cfg.threads = threads;
                 cfg.validate();
                 return cfg;
             }),
             py::arg("params"), py::arg("corridor"), py::arg("spot"), py::arg("n_paths"),
             py::arg("dt") = 1e-4, py::arg("t_max") = 0.0, py::arg("seed") = 1,
             py::arg("bridge") = true, py::arg("threads") = 0);

    py::class_<StrategyStats>(m, "StrategyStats")
        .def_readonly("strategy", &StrategyStats::strategy)
        .def_readonly("mean", &StrategyStats::mean)
        .def_readonly("variance", &StrategyStats::variance)
        .def_readonly("var_se", &StrategyStats::var_se)
        .def_readonly("mean_se", &StrategyStats::mean_se)
        .def_readonly("n_paths", &StrategyStats::n_paths)
        .def_readonly("seed", &StrategyStats::seed)
        .def_readonly("censored", &StrategyStats::censored);
    m.def("estimate",
          [](int id, const SimConfig& cfg) { return estimate(id, cfg, make_plans(cfg)); },
          py::arg("strategy"), py::arg("config"));
    m.def("estimate_all",
          [](const SimConfig& cfg) { return estimate_all(cfg, make_plans(cfg)); },
          py::arg("config"));
    m.def("mc_stopping_cost",
          [](double x, double h, const std::string& kind, double lo, double hi,
             const SimConfig& cfg) {
              StopRule rule;
              if (kind == "immediate") rule = StopRule::immediately();
              else if (kind == "never") rule = StopRule::never_stop();
              else rule = StopRule::exit_of(lo, hi);
              const auto est = mc_stopping_cost(x, h, rule, cfg);
              return py::make_tuple(est.estimate, est.se, est.n);
          },
          py::arg("x"), py::arg("h"), py::arg("kind"), py::arg("lo"), py::arg("hi"),
          py::arg("config"));

    // Raw RNG primitives, exposed for cross-validation against reference
    // implementations.
    m.def("philox4x64",
          [](std::uint64_t c0, std::uint64_t c1, std::uint64_t c2, std::uint64_t c3,
             std::uint64_t k0, std::uint64_t k1) {
              const auto out = philox4x64({c0, c1, c2, c3}, {k0, k1});
              return py::make_tuple(out[0], out[1], out[2], out[3]);
          },
          py::arg("c0"), py::arg("c1"), py::arg("c2"), py::arg("c3"), py::arg("k0"),
          py::arg("k1"));
    m.def("normal_quantile", &normal_quantile, py::arg("u"));
}
