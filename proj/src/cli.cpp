#include "towlab/cli.hpp"

#include <json.hpp>

#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>

#include "towlab/common.hpp"
#include "towlab/dpp.hpp"
#include "towlab/geometry.hpp"
#include "towlab/matrixlab.hpp"
#include "towlab/regularity.hpp"
#include "towlab/report.hpp"
#include "towlab/rng.hpp"
#include "towlab/simulate.hpp"

namespace towlab::cli {

namespace {

using nlohmann::json;
using report::fmt17;
using report::Json;

constexpr const char* kRngName = "philox4x64-10";

json load_config(const std::string& path) {
  std::ifstream f(path);
  if (!f) throw ConfigInvalid("cannot open config file: " + path);
  json j;
  try {
    f >> j;
  } catch (const std::exception& e) {
    throw ConfigInvalid(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigInvalid("config root must be a JSON object");
  return j;
}

void check_keys(const json& obj, const std::string& ctx, const std::set<std::string>& allowed) {
  for (const auto& item : obj.items()) {
    if (!allowed.count(item.key()))
      throw ConfigInvalid("unknown key \"" + item.key() + "\" in " + ctx);
  }
}

const json& require_key(const json& obj, const std::string& ctx, const std::string& key) {
  if (!obj.contains(key)) throw ConfigInvalid("missing key \"" + key + "\" in " + ctx);
  return obj.at(key);
}

double get_number(const json& obj, const std::string& ctx, const std::string& key) {
  const json& v = require_key(obj, ctx, key);
  if (!v.is_number()) throw ConfigInvalid("\"" + key + "\" must be a number in " + ctx);
  return v.get<double>();
}

double get_number_or(const json& obj, const std::string& ctx, const std::string& key,
                     double fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number()) throw ConfigInvalid("\"" + key + "\" must be a number in " + ctx);
  return v.get<double>();
}

std::int64_t get_int_or(const json& obj, const std::string& ctx, const std::string& key,
                        std::int64_t fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_number_integer()) throw ConfigInvalid("\"" + key + "\" must be an integer in " + ctx);
  return v.get<std::int64_t>();
}

bool get_bool_or(const json& obj, const std::string& ctx, const std::string& key, bool fallback) {
  if (!obj.contains(key)) return fallback;
  const json& v = obj.at(key);
  if (!v.is_boolean()) throw ConfigInvalid("\"" + key + "\" must be a boolean in " + ctx);
  return v.get<bool>();
}

int get_dim(const json& obj, const std::string& ctx) {
  const json& v = require_key(obj, ctx, "n");
  if (!v.is_number_integer() || v.get<int>() < 1)
    throw ConfigInvalid("\"n\" must be a positive integer in " + ctx);
  return v.get<int>();
}

// p is a number or the string "inf".
double parse_p(const json& obj, const std::string& ctx, double min_exclusive) {
  const json& v = require_key(obj, ctx, "p");
  double p;
  if (v.is_string()) {
    const std::string s = v.get<std::string>();
    if (s != "inf" && s != "infinity") throw ConfigInvalid("\"p\" string must be \"inf\" in " + ctx);
    p = std::numeric_limits<double>::infinity();
  } else if (v.is_number()) {
    p = v.get<double>();
  } else {
    throw ConfigInvalid("\"p\" must be a number or \"inf\" in " + ctx);
  }
  if (!(p > min_exclusive))
    throw ConfigInvalid("\"p\" must be > " + fmt17(min_exclusive) + " in " + ctx);
  return p;
}

Eigen::VectorXd parse_point(const json& obj, const std::string& ctx, const std::string& key,
                            int n) {
  const json& v = require_key(obj, ctx, key);
  if (!v.is_array() || static_cast<int>(v.size()) != n)
    throw ConfigInvalid("\"" + key + "\" must be an array of " + std::to_string(n) +
                        " numbers in " + ctx);
  Eigen::VectorXd x(n);
  for (int i = 0; i < n; ++i) {
    if (!v[i].is_number()) throw ConfigInvalid("\"" + key + "\" entries must be numbers in " + ctx);
    x[i] = v[i].get<double>();
  }
  return x;
}

struct DomainConfig {
  geometry::DomainDescriptor descriptor;
  double epsilon = 0.0;
  double spacing = 0.0;
};

DomainConfig parse_domain(const json& obj, const std::string& ctx) {
  const json& d = require_key(obj, ctx, "domain");
  if (!d.is_object()) throw ConfigInvalid("\"domain\" must be an object in " + ctx);
  check_keys(d, ctx + ".domain",
             {"shape", "radius", "halfwidth", "n", "epsilon", "spacing", "center"});
  const std::string shape = require_key(d, ctx + ".domain", "shape").get<std::string>();
  const int n = get_dim(d, ctx + ".domain");
  DomainConfig out;
  out.epsilon = get_number(d, ctx + ".domain", "epsilon");
  out.spacing = get_number(d, ctx + ".domain", "spacing");
  Eigen::VectorXd center = Eigen::VectorXd::Zero(n);
  if (d.contains("center")) center = parse_point(d, ctx + ".domain", "center", n);
  if (shape == "ball") {
    out.descriptor = geometry::DomainDescriptor::ball(n, get_number(d, ctx + ".domain", "radius"),
                                                      center);
  } else if (shape == "box") {
    out.descriptor = geometry::DomainDescriptor::box(n, get_number(d, ctx + ".domain", "halfwidth"),
                                                     center);
  } else {
    throw ConfigInvalid("\"shape\" must be \"ball\" or \"box\" in " + ctx);
  }
  return out;
}

dpp::Payoff parse_payoff(const json& obj, const std::string& ctx, const geometry::GridDomain& dom,
                         double p) {
  const json& f = require_key(obj, ctx, "payoff");
  if (!f.is_object()) throw ConfigInvalid("\"payoff\" must be an object in " + ctx);
  check_keys(f, ctx + ".payoff", {"kind", "axis", "entries"});
  const std::string kind = require_key(f, ctx + ".payoff", "kind").get<std::string>();
  if (kind == "coordinate") {
    const int axis = static_cast<int>(get_int_or(f, ctx + ".payoff", "axis", 0));
    if (axis < 0 || axis >= dom.n()) throw ConfigInvalid("payoff axis out of range in " + ctx);
    return dpp::Payoff::coordinate(axis);
  }
  if (kind == "quadratic") return dpp::Payoff::quadratic();
  if (kind == "radial_pharmonic") {
    if (std::isinf(p)) throw ConfigInvalid("radial_pharmonic payoff needs finite p in " + ctx);
    return dpp::Payoff::radial_pharmonic(p, dom.n());
  }
  if (kind == "custom_table") {
    const json& entries = require_key(f, ctx + ".payoff", "entries");
    if (!entries.is_array()) throw ConfigInvalid("payoff entries must be an array in " + ctx);
    std::unordered_map<int, double> table;
    for (const json& e : entries) {
      if (!e.is_object() || !e.contains("coord") || !e.contains("value"))
        throw ConfigInvalid("payoff entries need coord and value in " + ctx);
      const json& cj = e.at("coord");
      Eigen::VectorXi c(dom.n());
      if (!cj.is_array() || static_cast<int>(cj.size()) != dom.n())
        throw ConfigInvalid("payoff entry coord has wrong dimension in " + ctx);
      for (int i = 0; i < dom.n(); ++i) c[i] = cj[i].get<int>();
      const int id = dom.node_at(c);
      if (id >= 0) table[id] = e.at("value").get<double>();
    }
    return dpp::Payoff::custom_table(std::move(table));
  }
  throw ConfigInvalid("unknown payoff kind \"" + kind + "\" in " + ctx);
}

std::uint64_t pick_seed(const RunConfig& rc, const json& obj, const std::string& ctx) {
  if (rc.seed_override) return *rc.seed_override;
  return static_cast<std::uint64_t>(get_int_or(obj, ctx, "seed", 0));
}

struct CheckRow {
  std::string name;
  double computed = 0.0;
  double expected = 0.0;
  double abs_err = 0.0;
  double rel_err = 0.0;
  double tol = 0.0;
  bool pass = false;
};

CheckRow make_row(const std::string& name, double computed, double expected, double tol,
                  bool relative) {
  CheckRow row;
  row.name = name;
  row.computed = computed;
  row.expected = expected;
  row.abs_err = std::abs(computed - expected);
  row.rel_err = row.abs_err / std::max(1e-300, std::abs(expected));
  row.tol = tol;
  row.pass = (relative ? row.rel_err : row.abs_err) <= tol;
  return row;
}

Json rows_to_json(const std::vector<CheckRow>& rows) {
  Json arr = Json::array();
  for (const auto& row : rows) {
    Json r = Json::object();
    r.set("name", Json::str(row.name));
    r.set("computed", Json::number(row.computed));
    r.set("expected", Json::number(row.expected));
    r.set("abs_err", Json::number(row.abs_err));
    r.set("rel_err", Json::number(row.rel_err));
    r.set("tol", Json::number(row.tol));
    r.set("pass", Json::boolean(row.pass));
    arr.push(std::move(r));
  }
  return arr;
}

std::string rows_to_csv(const std::vector<CheckRow>& rows) {
  std::string out = "name,computed,expected,abs_err,rel_err,tol,pass\n";
  for (const auto& row : rows) {
    out += row.name + ',' + fmt17(row.computed) + ',' + fmt17(row.expected) + ',' +
           fmt17(row.abs_err) + ',' + fmt17(row.rel_err) + ',' + fmt17(row.tol) + ',' +
           (row.pass ? "1" : "0") + '\n';
  }
  return out;
}

void emit(const RunConfig& rc, const Json& report, const std::string& csv_table) {
  std::filesystem::create_directories(rc.out_dir);
  const std::string text = report.dump();
  report::write_file(rc.out_dir + "/report.json", text);
  if (rc.format == "csv" && !csv_table.empty()) {
    report::write_file(rc.out_dir + "/report.csv", csv_table);
    std::cout << csv_table;
  } else {
    std::cout << text;
  }
}

Json solve_summary(const dpp::ValueField& field, const dpp::SolveOptions& opt) {
  Json s = Json::object();
  s.set("iterations", Json::integer(field.iterations));
  s.set("residual", Json::number(field.residual));
  s.set("tol", Json::number(opt.tol));
  s.set("converged", Json::boolean(field.converged));
  s.set("not_converged_flag", Json::boolean(!field.converged));
  const int m = field.domain->interior_count();
  s.set("interior_min", Json::number(field.values.head(m).minCoeff()));
  s.set("interior_max", Json::number(field.values.head(m).maxCoeff()));
  s.set("interior_nodes", Json::integer(m));
  s.set("strip_nodes", Json::integer(field.domain->node_count() - m));
  return s;
}

void write_field_csv(const std::string& path, const dpp::ValueField& field) {
  const auto& dom = *field.domain;
  std::string out = "node_id,interior";
  for (int i = 0; i < dom.n(); ++i) out += ",c" + std::to_string(i);
  for (int i = 0; i < dom.n(); ++i) out += ",x" + std::to_string(i);
  out += ",value\n";
  for (int id = 0; id < dom.node_count(); ++id) {
    out += std::to_string(id);
    out += dom.is_interior(id) ? ",1" : ",0";
    for (int i = 0; i < dom.n(); ++i) out += ',' + std::to_string(dom.coord(id)[i]);
    const Eigen::VectorXd x = dom.position(id);
    for (int i = 0; i < dom.n(); ++i) out += ',' + fmt17(x[i]);
    out += ',' + fmt17(field.values[id]) + '\n';
  }
  report::write_file(path, out);
}

void write_residuals_csv(const std::string& path, const std::vector<double>& residuals) {
  std::string out = "iteration,residual\n";
  for (size_t i = 0; i < residuals.size(); ++i)
    out += std::to_string(i + 1) + ',' + fmt17(residuals[i]) + '\n';
  report::write_file(path, out);
}

void write_paths_csv(const std::string& path, const std::vector<simulate::PathRecord>& paths) {
  std::string out = "path_id,steps,outcome,payoff\n";
  for (const auto& p : paths)
    out += std::to_string(p.path_id) + ',' + std::to_string(p.steps) + ',' + p.outcome + ',' +
           fmt17(p.payoff) + '\n';
  report::write_file(path, out);
}

// ---------------------------------------------------------------- solve ----

int run_solve(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "solve", {"domain", "p", "payoff", "tol", "max_iter", "damping", "seed"});
  const DomainConfig dc = parse_domain(cfg, "solve");
  const double p = parse_p(cfg, "solve", 0.0);
  if (!std::isinf(p) && p < 2.0) throw ConfigInvalid("solve requires p in [2, inf]");
  const auto dom = geometry::build_grid(dc.descriptor, dc.epsilon, dc.spacing);
  const auto params = geometry::GameParams::make(dom.n(), p, dc.epsilon);
  const auto payoff = parse_payoff(cfg, "solve", dom, p);

  dpp::SolveOptions opt;
  opt.tol = get_number_or(cfg, "solve", "tol", 1e-10);
  opt.max_iter = static_cast<int>(get_int_or(cfg, "solve", "max_iter", 200000));
  opt.damping = get_number_or(cfg, "solve", "damping", 1.0);
  opt.threads = rc.threads;

  std::vector<double> residuals;
  const auto field = dpp::dpp_solve(dom, payoff, params, opt, &residuals);

  std::filesystem::create_directories(rc.out_dir);
  write_field_csv(rc.out_dir + "/field.csv", field);
  write_residuals_csv(rc.out_dir + "/residuals.csv", residuals);

  Json report = Json::object();
  report.set("subcommand", Json::str("solve"));
  report.set("p", Json::number(p));
  report.set("epsilon", Json::number(dc.epsilon));
  report.set("spacing", Json::number(dc.spacing));
  report.set("alpha", Json::number(params.alpha));
  report.set("beta", Json::number(params.beta));
  report.set("solve", solve_summary(field, opt));
  emit(rc, report, "");
  return field.converged ? 0 : 1;
}

// ------------------------------------------------------------- simulate ----

int run_simulate(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "simulate",
             {"domain", "p", "payoff", "tol", "max_iter", "damping", "x0", "n_samples", "seed",
              "step_cap", "path_csv"});
  const DomainConfig dc = parse_domain(cfg, "simulate");
  const double p = parse_p(cfg, "simulate", 0.0);
  if (!std::isinf(p) && p < 2.0) throw ConfigInvalid("simulate requires p in [2, inf]");
  const auto dom = geometry::build_grid(dc.descriptor, dc.epsilon, dc.spacing);
  const auto params = geometry::GameParams::make(dom.n(), p, dc.epsilon);
  const auto payoff = parse_payoff(cfg, "simulate", dom, p);
  const Eigen::VectorXd x0 = parse_point(cfg, "simulate", "x0", dom.n());
  const int node = dom.nearest_node(x0);
  if (node < 0 || !dom.is_interior(node))
    throw ConfigInvalid("x0 does not snap to an interior node");

  dpp::SolveOptions sopt;
  sopt.tol = get_number_or(cfg, "simulate", "tol", 1e-10);
  sopt.max_iter = static_cast<int>(get_int_or(cfg, "simulate", "max_iter", 200000));
  sopt.damping = get_number_or(cfg, "simulate", "damping", 1.0);
  sopt.threads = rc.threads;
  const auto field = dpp::dpp_solve(dom, payoff, params, sopt);
  const auto [smax, smin] = simulate::greedy_strategies_from_value(field);

  simulate::SimOptions opt;
  opt.n_samples = get_int_or(cfg, "simulate", "n_samples", 10000);
  opt.seed = pick_seed(rc, cfg, "simulate");
  opt.step_cap = get_int_or(cfg, "simulate", "step_cap", 1000000);
  opt.threads = rc.threads;

  std::vector<simulate::PathRecord> paths;
  const bool want_paths = get_bool_or(cfg, "simulate", "path_csv", false);
  const auto sim = simulate::simulate_game(dom, node, params, smax, smin, payoff, opt,
                                           want_paths ? &paths : nullptr);
  if (want_paths) {
    std::filesystem::create_directories(rc.out_dir);
    write_paths_csv(rc.out_dir + "/paths.csv", paths);
  }

  Json report = Json::object();
  report.set("subcommand", Json::str("simulate"));
  report.set("rng", Json::str(kRngName));
  report.set("estimate", Json::number(sim.estimate));
  report.set("stderr", Json::number(sim.stderr_));
  report.set("n_samples", Json::integer(sim.n_samples));
  report.set("discarded_paths", Json::integer(sim.discarded));
  report.set("seed", Json::integer(static_cast<std::int64_t>(sim.seed)));
  report.set("start_node", Json::integer(node));
  report.set("dpp_value_at_x0", Json::number(field.values[node]));
  report.set("solve", solve_summary(field, sopt));
  emit(rc, report, "");
  return field.converged ? 0 : 1;
}

// ---------------------------------------------------------------- couple ----

int run_couple(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "couple",
             {"n", "epsilon", "p", "x0", "y0", "rule", "payoff_cap", "n_samples", "seed",
              "step_cap", "diag_tol", "path_csv"});
  const int n = get_dim(cfg, "couple");
  const double p = parse_p(cfg, "couple", 0.0);
  if (!std::isinf(p) && p < 2.0) throw ConfigInvalid("couple requires p in [2, inf]");
  const double epsilon = get_number(cfg, "couple", "epsilon");
  if (!(epsilon > 0)) throw ConfigInvalid("epsilon must be positive in couple");
  const auto params = geometry::GameParams::make(n, p, epsilon);
  const Eigen::VectorXd x0 = parse_point(cfg, "couple", "x0", n);
  const Eigen::VectorXd y0 = parse_point(cfg, "couple", "y0", n);

  simulate::CouplingRule rule = simulate::CouplingRule::reflection();
  const json& rj = require_key(cfg, "couple", "rule");
  if (rj.is_string()) {
    const std::string name = rj.get<std::string>();
    if (name == "reflection") {
      rule = simulate::CouplingRule::reflection();
    } else if (name == "identity") {
      rule = simulate::CouplingRule::identity();
    } else {
      throw ConfigInvalid("rule must be \"reflection\", \"identity\", or {\"orthogonal\": ...}");
    }
  } else if (rj.is_object() && rj.contains("orthogonal")) {
    const json& qj = rj.at("orthogonal");
    if (!qj.is_array() || static_cast<int>(qj.size()) != n)
      throw ConfigInvalid("orthogonal matrix must be n x n in couple");
    Eigen::MatrixXd Q(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) Q(i, j) = qj[i][j].get<double>();
    rule = simulate::CouplingRule::fixed_orthogonal(Q);
  } else {
    throw ConfigInvalid("rule must be \"reflection\", \"identity\", or {\"orthogonal\": ...}");
  }

  simulate::CoupleOptions opt;
  opt.payoff_cap = get_number(cfg, "couple", "payoff_cap");
  opt.n_samples = get_int_or(cfg, "couple", "n_samples", 10000);
  opt.seed = pick_seed(rc, cfg, "couple");
  opt.step_cap = get_int_or(cfg, "couple", "step_cap", 1000000);
  opt.diag_tol = get_number_or(cfg, "couple", "diag_tol", -1.0);
  opt.threads = rc.threads;

  std::vector<simulate::PathRecord> paths;
  const bool want_paths = get_bool_or(cfg, "couple", "path_csv", false);
  const auto rep =
      simulate::coupling_bound_estimate(x0, y0, rule, params, opt, want_paths ? &paths : nullptr);
  if (want_paths) {
    std::filesystem::create_directories(rc.out_dir);
    write_paths_csv(rc.out_dir + "/paths.csv", paths);
  }

  Json report = Json::object();
  report.set("subcommand", Json::str("couple"));
  report.set("rng", Json::str(kRngName));
  report.set("estimate", Json::number(rep.estimate));
  report.set("stderr", Json::number(rep.stderr_));
  report.set("n_samples", Json::integer(rep.n_samples));
  report.set("p_hit_diagonal", Json::number(rep.p_hit_diagonal));
  report.set("discarded_paths", Json::integer(rep.discarded));
  report.set("seed", Json::integer(static_cast<std::int64_t>(rep.seed)));
  report.set("diag_tol", Json::number(opt.diag_tol >= 0 ? opt.diag_tol : 2.0 * epsilon));
  emit(rc, report, "");
  return 0;
}

// ---------------------------------------------------------- verify-matrix ----

int run_verify_matrix(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "verify-matrix",
             {"n", "p", "C", "delta", "dist", "draws", "seed", "epsilon", "grid_points",
              "mc_samples"});
  const int n = get_dim(cfg, "verify-matrix");
  const double p = parse_p(cfg, "verify-matrix", 1.0);
  const double C = get_number_or(cfg, "verify-matrix", "C", 1.0);
  const double delta = get_number_or(cfg, "verify-matrix", "delta", 0.5);
  if (!(delta > 0 && delta < 1)) throw ConfigInvalid("delta must lie in (0,1)");
  const double dist = get_number_or(cfg, "verify-matrix", "dist", 1.0);
  const int draws = static_cast<int>(get_int_or(cfg, "verify-matrix", "draws", 100));
  const std::uint64_t seed = pick_seed(rc, cfg, "verify-matrix");
  const double epsilon = get_number_or(cfg, "verify-matrix", "epsilon", 0.3);
  const int grid_points = static_cast<int>(get_int_or(cfg, "verify-matrix", "grid_points", 128));
  const std::int64_t mc_samples = get_int_or(cfg, "verify-matrix", "mc_samples", 200000);

  rng::Stream stream(seed, 0);
  const auto random_unit = [&](int dim) {
    Eigen::VectorXd v(dim);
    for (;;) {
      for (int i = 0; i < dim; ++i) v[i] = 2.0 * stream.next_double() - 1.0;
      const double norm = v.norm();
      if (norm > 1e-3) return Eigen::VectorXd(v / norm);
    }
  };

  std::vector<CheckRow> rows;
  const Eigen::VectorXd eta = random_unit(n);
  const Eigen::MatrixXd P = matrixlab::projection_matrix(eta);
  const Eigen::MatrixXd R = matrixlab::reflection_matrix(eta);
  const Eigen::MatrixXd I = Eigen::MatrixXd::Identity(n, n);
  rows.push_back(make_row("projection_idempotent", (P * P - P).cwiseAbs().maxCoeff(), 0.0, 1e-14,
                          false));
  rows.push_back(make_row("projection_fixes_eta", (P * eta - eta).norm(), 0.0, 1e-14, false));
  rows.push_back(make_row("reflection_involution", (R * R - I).cwiseAbs().maxCoeff(), 0.0, 1e-14,
                          false));
  rows.push_back(make_row("reflection_flips_eta", (R * eta + eta).norm(), 0.0, 1e-14, false));
  rows.push_back(make_row("reflection_det", R.determinant(), -1.0, 1e-10, false));

  const Eigen::MatrixXd A = matrixlab::coefficient_matrix_A(eta, p);
  Eigen::VectorXd kernel(2 * n);
  kernel << eta, eta;
  rows.push_back(make_row("coefficient_kernel_eta_eta", (A * kernel).norm(), 0.0, 1e-12, false));
  const auto spectrum = matrixlab::spectral_analysis(A);
  std::vector<double> expected(n, 0.0);
  expected.insert(expected.end(), n - 1, 2.0);
  expected.push_back(2.0 * (p - 1.0));
  std::sort(expected.begin(), expected.end());
  double spec_err = 0.0;
  for (int i = 0; i < 2 * n; ++i)
    spec_err = std::max(spec_err, std::abs(spectrum.eigenvalues[i] - expected[i]));
  rows.push_back(make_row("coefficient_spectrum_multiset", spec_err, 0.0, 1e-10, false));
  rows.push_back(
      make_row("coefficient_psd_min_eig", std::max(0.0, -spectrum.eigenvalues.minCoeff()), 0.0,
               spectrum.psd_tol, false));

  double worst_trace = 0.0, worst_trace_id = 0.0, worst_trace_inf = 0.0, worst_m2 = 0.0;
  for (int k = 0; k < draws; ++k) {
    const Eigen::VectorXd e = random_unit(n);
    const double cc = 0.1 + 9.9 * stream.next_double();
    const double dd = 0.05 + 0.9 * stream.next_double();
    const double rr = 0.1 + 1.9 * stream.next_double();
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd y = x - rr * e;
    const auto cf = matrixlab::ComparisonFn::make(cc, dd);
    const auto blocks = matrixlab::comparison_hessian(x, y, cf);
    const Eigen::MatrixXd Ak = matrixlab::coefficient_matrix_A(e, p);
    const double t1 = matrixlab::trace_product(Ak, blocks.H);
    const double t1c = matrixlab::trace_coeff_hessian_closed(p, cc, dd, rr);
    worst_trace = std::max(worst_trace, std::abs(t1 - t1c) / std::abs(t1c));
    const double t2 = matrixlab::trace_product(Eigen::MatrixXd::Identity(2 * n, 2 * n), blocks.H);
    const double t2c = matrixlab::trace_identity_hessian_closed(n, cc, dd, rr);
    worst_trace_id = std::max(worst_trace_id, std::abs(t2 - t2c) / std::max(1e-300, std::abs(t2c)));
    const double t3 = matrixlab::trace_product(matrixlab::infinity_coefficient_matrix(e), blocks.H);
    const double t3c = matrixlab::trace_infinity_hessian_closed(cc, dd, rr);
    worst_trace_inf = std::max(worst_trace_inf, std::abs(t3 - t3c) / std::abs(t3c));
    const Eigen::MatrixXd m2 = matrixlab::m_squared_formula(x, y, cf);
    const Eigen::MatrixXd mm = blocks.M * blocks.M;
    worst_m2 = std::max(worst_m2, (m2 - mm).cwiseAbs().maxCoeff() / mm.cwiseAbs().maxCoeff());
  }
  rows.push_back(make_row("trace_coeff_vs_closed_rel", worst_trace, 0.0, 1e-10, false));
  rows.push_back(make_row("trace_identity_vs_closed_rel", worst_trace_id, 0.0, 1e-10, false));
  rows.push_back(make_row("trace_infinity_vs_closed_rel", worst_trace_inf, 0.0, 1e-10, false));
  rows.push_back(make_row("m_squared_vs_product_rel", worst_m2, 0.0, 1e-12, false));

  if (n <= 3) {
    Eigen::MatrixXd Arand(n, n), Brand(n, n);
    for (int i = 0; i < n; ++i)
      for (int j = 0; j < n; ++j) {
        Arand(i, j) = 2.0 * stream.next_double() - 1.0;
        Brand(i, j) = 2.0 * stream.next_double() - 1.0;
      }
    Arand += 2.0 * Eigen::MatrixXd::Identity(n, n);  // keep tr(B^T A) away from zero
    Brand += 2.0 * Eigen::MatrixXd::Identity(n, n);
    const auto grid = matrixlab::quadratic_mean_identity_grid(Arand, Brand, epsilon, grid_points);
    rows.push_back(make_row("mean_identity_grid", grid.quadrature, grid.exact,
                            1e-3 * std::abs(grid.exact), false));
    const auto mc = matrixlab::quadratic_mean_identity_mc(Arand, Brand, epsilon, mc_samples, seed);
    const double mc_scale = epsilon * epsilon * Arand.norm() * Brand.norm();
    rows.push_back(make_row("mean_identity_mc", mc.quadrature, mc.exact,
                            5.0 / std::sqrt(static_cast<double>(mc_samples)) * mc_scale, false));
  }

  // The fixed numeric anchors at (C, delta, dist) from the configuration.
  {
    const Eigen::VectorXd e1 = Eigen::VectorXd::Unit(n, 0);
    const Eigen::VectorXd x = Eigen::VectorXd::Zero(n);
    const Eigen::VectorXd y = x - dist * e1;
    const auto cf = matrixlab::ComparisonFn::make(C, delta);
    const auto blocks = matrixlab::comparison_hessian(x, y, cf);
    const Eigen::MatrixXd Ak = matrixlab::coefficient_matrix_A(e1, p);
    rows.push_back(make_row("trace_coeff_anchor", matrixlab::trace_product(Ak, blocks.H),
                            matrixlab::trace_coeff_hessian_closed(p, C, delta, dist), 1e-10, true));
  }

  bool all_pass = true;
  for (const auto& row : rows) all_pass = all_pass && row.pass;

  Json report = Json::object();
  report.set("subcommand", Json::str("verify-matrix"));
  report.set("rng", Json::str(kRngName));
  report.set("seed", Json::integer(static_cast<std::int64_t>(seed)));
  report.set("n", Json::integer(n));
  report.set("p", Json::number(p));
  report.set("draws", Json::integer(draws));
  report.set("checks", rows_to_json(rows));
  report.set("pass", Json::boolean(all_pass));
  emit(rc, report, rows_to_csv(rows));
  return all_pass ? 0 : 1;
}

// ----------------------------------------------------------- verify-lemma ----

int run_verify_lemma(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "verify-lemma",
             {"n", "C", "delta", "dist", "eps_factors", "radial", "angular"});
  const int n = get_dim(cfg, "verify-lemma");
  const double C = get_number_or(cfg, "verify-lemma", "C", 1.0);
  const double delta = get_number_or(cfg, "verify-lemma", "delta", 0.5);
  const double dist = get_number_or(cfg, "verify-lemma", "dist", 0.5);
  quadrature::BallQuadSpec quad;
  quad.radial = static_cast<int>(get_int_or(cfg, "verify-lemma", "radial", 64));
  quad.angular = static_cast<int>(get_int_or(cfg, "verify-lemma", "angular", 256));
  std::vector<double> eps_list;
  if (cfg.contains("eps_factors")) {
    for (const json& v : cfg.at("eps_factors")) eps_list.push_back(v.get<double>() * dist);
  } else {
    eps_list = {0.04 * dist, 0.02 * dist, 0.01 * dist};
  }

  const Eigen::VectorXd x0 = dist * Eigen::VectorXd::Unit(n, 0);
  const Eigen::VectorXd y0 = Eigen::VectorXd::Zero(n);
  const auto cf = matrixlab::ComparisonFn::make(C, delta);
  const auto result = matrixlab::lemma_negativity_check(x0, y0, cf, eps_list, quad);

  bool all_pass = true;
  Json rows = Json::array();
  std::string csv = "eps,integral,taylor,ratio,negative,identity_integral,point_reflection\n";
  for (const auto& row : result.rows) {
    bool pass = row.negative && std::abs(row.identity_integral) <= 1e-12;
    if (n >= 2) pass = pass && row.point_reflection_integral > 0.0;
    all_pass = all_pass && pass;
    Json r = Json::object();
    r.set("eps", Json::number(row.eps));
    r.set("integral", Json::number(row.integral));
    r.set("taylor", Json::number(row.taylor));
    r.set("ratio", Json::number(row.ratio));
    r.set("negative", Json::boolean(row.negative));
    r.set("identity_integral", Json::number(row.identity_integral));
    r.set("point_reflection_integral", Json::number(row.point_reflection_integral));
    r.set("tol", Json::number(1e-12));
    r.set("pass", Json::boolean(pass));
    rows.push(std::move(r));
    csv += fmt17(row.eps) + ',' + fmt17(row.integral) + ',' + fmt17(row.taylor) + ',' +
           fmt17(row.ratio) + ',' + (row.negative ? "1" : "0") + ',' +
           fmt17(row.identity_integral) + ',' + fmt17(row.point_reflection_integral) + '\n';
  }

  Json report = Json::object();
  report.set("subcommand", Json::str("verify-lemma"));
  report.set("n", Json::integer(n));
  report.set("C", Json::number(C));
  report.set("delta", Json::number(delta));
  report.set("dist", Json::number(dist));
  report.set("rows", std::move(rows));
  report.set("pass", Json::boolean(all_pass));
  emit(rc, report, csv);
  return all_pass ? 0 : 1;
}

// ------------------------------------------------------------- expansion ----

int run_expansion(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "expansion", {"n", "p", "u", "axis", "x", "eps_list", "radial", "angular"});
  const int n = get_dim(cfg, "expansion");
  const double p = parse_p(cfg, "expansion", 0.0);
  if (!std::isinf(p) && p < 2.0) throw ConfigInvalid("expansion requires p in [2, inf]");
  const auto params = geometry::GameParams::make(n, p, 1.0);
  const Eigen::VectorXd x = parse_point(cfg, "expansion", "x", n);
  const std::string name = require_key(cfg, "expansion", "u").get<std::string>();
  std::function<double(const Eigen::VectorXd&)> u;
  if (name == "coordinate") {
    const int axis = static_cast<int>(get_int_or(cfg, "expansion", "axis", 0));
    u = [axis](const Eigen::VectorXd& z) { return z[axis]; };
  } else if (name == "quadratic") {
    u = [](const Eigen::VectorXd& z) { return z.squaredNorm(); };
  } else if (name == "radial_pharmonic") {
    if (std::isinf(p)) throw ConfigInvalid("radial_pharmonic expansion needs finite p");
    const double exponent = (p - n) / (p - 1.0);
    u = [exponent](const Eigen::VectorXd& z) { return std::pow(z.norm(), exponent); };
  } else {
    throw ConfigInvalid("unknown test function \"" + name + "\" in expansion");
  }
  const json& ej = require_key(cfg, "expansion", "eps_list");
  std::vector<double> eps_list;
  for (const json& v : ej) eps_list.push_back(v.get<double>());
  quadrature::BallQuadSpec quad;
  quad.radial = static_cast<int>(get_int_or(cfg, "expansion", "radial", 64));
  quad.angular = static_cast<int>(get_int_or(cfg, "expansion", "angular", 256));

  const auto result = dpp::expansion_check(u, x, params, eps_list, quad);

  Json rows = Json::array();
  std::string csv = "eps,remainder,remainder_over_eps2\n";
  for (const auto& row : result.rows) {
    Json r = Json::object();
    r.set("eps", Json::number(row.eps));
    r.set("remainder", Json::number(row.remainder));
    r.set("remainder_over_eps2", Json::number(row.remainder_over_eps2));
    rows.push(std::move(r));
    csv += fmt17(row.eps) + ',' + fmt17(row.remainder) + ',' + fmt17(row.remainder_over_eps2) +
           '\n';
  }
  Json report = Json::object();
  report.set("subcommand", Json::str("expansion"));
  report.set("u", Json::str(name));
  report.set("p", Json::number(p));
  report.set("predicted_limit", Json::number(result.predicted_limit));
  report.set("rows", std::move(rows));
  emit(rc, report, csv);
  return 0;
}

// ---------------------------------------------------------------- holder ----

int run_holder(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "holder",
             {"domain", "p", "payoff", "tol", "max_iter", "damping", "delta", "region",
              "pair_budget", "seed"});
  const DomainConfig dc = parse_domain(cfg, "holder");
  const double p = parse_p(cfg, "holder", 0.0);
  if (!std::isinf(p) && p < 2.0) throw ConfigInvalid("holder requires p in [2, inf]");
  const auto dom = geometry::build_grid(dc.descriptor, dc.epsilon, dc.spacing);
  const auto params = geometry::GameParams::make(dom.n(), p, dc.epsilon);
  const auto payoff = parse_payoff(cfg, "holder", dom, p);
  const double delta = get_number(cfg, "holder", "delta");
  if (!(delta > 0 && delta < 1)) throw ConfigInvalid("delta must lie in (0,1)");

  const json& rj = require_key(cfg, "holder", "region");
  check_keys(rj, "holder.region", {"center", "radius"});
  regularity::RegionSpec region;
  region.center = parse_point(rj, "holder.region", "center", dom.n());
  region.radius = get_number(rj, "holder.region", "radius");

  dpp::SolveOptions sopt;
  sopt.tol = get_number_or(cfg, "holder", "tol", 1e-10);
  sopt.max_iter = static_cast<int>(get_int_or(cfg, "holder", "max_iter", 200000));
  sopt.damping = get_number_or(cfg, "holder", "damping", 1.0);
  sopt.threads = rc.threads;
  const auto field = dpp::dpp_solve(dom, payoff, params, sopt);

  const std::int64_t budget = get_int_or(cfg, "holder", "pair_budget", 10000000);
  const std::uint64_t seed = pick_seed(rc, cfg, "holder");
  const auto rep = regularity::holder_seminorm(field, delta, region, budget, seed, rc.threads);

  Json report = Json::object();
  report.set("subcommand", Json::str("holder"));
  report.set("delta", Json::number(rep.delta));
  report.set("seminorm", Json::number(rep.seminorm));
  report.set("argmax_node_i", Json::integer(rep.node_i));
  report.set("argmax_node_j", Json::integer(rep.node_j));
  report.set("pairs_scanned", Json::integer(rep.pairs));
  report.set("exact", Json::boolean(rep.exact));
  report.set("seed", Json::integer(static_cast<std::int64_t>(rep.seed)));
  report.set("solve", solve_summary(field, sopt));
  emit(rc, report, "");
  return field.converged && std::isfinite(rep.seminorm) ? 0 : 1;
}

// ---------------------------------------------------------------- certify ----

int run_certify(const RunConfig& rc, const json& cfg) {
  check_keys(cfg, "certify", {"n", "p", "C", "delta", "x0", "y0", "z0"});
  const int n = get_dim(cfg, "certify");
  const double p = parse_p(cfg, "certify", 1.0);
  const double C = get_number(cfg, "certify", "C");
  if (!(C > 0)) throw ConfigInvalid("C must be positive in certify");
  const double delta = get_number(cfg, "certify", "delta");
  if (!(delta > 0 && delta < 1)) throw ConfigInvalid("delta must lie in (0,1)");
  const Eigen::VectorXd x0 = parse_point(cfg, "certify", "x0", n);
  const Eigen::VectorXd y0 = parse_point(cfg, "certify", "y0", n);
  std::optional<Eigen::VectorXd> z0;
  if (cfg.contains("z0")) z0 = parse_point(cfg, "certify", "z0", n);

  const auto rep = regularity::ishii_lions_certificate(n, p, C, delta, x0, y0, z0);

  Json checks = Json::array();
  std::string csv = "name,value,bound,margin,tol,pass\n";
  for (const auto& c : rep.checks) {
    Json r = Json::object();
    r.set("name", Json::str(c.name));
    r.set("value", Json::number(c.value));
    r.set("bound", Json::number(c.bound));
    r.set("margin", Json::number(c.margin));
    r.set("tol", Json::number(c.tol));
    r.set("pass", Json::boolean(c.pass));
    checks.push(std::move(r));
    csv += c.name + ',' + fmt17(c.value) + ',' + fmt17(c.bound) + ',' + fmt17(c.margin) + ',' +
           fmt17(c.tol) + ',' + (c.pass ? "1" : "0") + '\n';
  }

  Json report = Json::object();
  report.set("subcommand", Json::str("certify"));
  report.set("n", Json::integer(rep.n));
  report.set("p", Json::number(rep.p));
  report.set("C", Json::number(rep.C));
  report.set("delta", Json::number(rep.delta));
  report.set("dist", Json::number(rep.dist));
  report.set("mu", Json::number(rep.mu));
  report.set("L", Json::number(rep.L));
  report.set("minimal_C", Json::number(rep.minimal_C));
  report.set("worst_dist", Json::number(rep.worst_dist));
  report.set("checks", std::move(checks));
  report.set("pass", Json::boolean(rep.pass));
  emit(rc, report, csv);
  return rep.pass ? 0 : 1;
}

}  // namespace

int run(const RunConfig& rc) {
  const json cfg = load_config(rc.config_path);
  if (rc.format != "json" && rc.format != "csv")
    throw ConfigInvalid("format must be \"json\" or \"csv\"");
  if (rc.threads < 1) throw ConfigInvalid("threads must be >= 1");
  if (rc.subcommand == "solve") return run_solve(rc, cfg);
  if (rc.subcommand == "simulate") return run_simulate(rc, cfg);
  if (rc.subcommand == "couple") return run_couple(rc, cfg);
  if (rc.subcommand == "verify-matrix") return run_verify_matrix(rc, cfg);
  if (rc.subcommand == "verify-lemma") return run_verify_lemma(rc, cfg);
  if (rc.subcommand == "expansion") return run_expansion(rc, cfg);
  if (rc.subcommand == "holder") return run_holder(rc, cfg);
  if (rc.subcommand == "certify") return run_certify(rc, cfg);
  throw ConfigInvalid("unknown subcommand: " + rc.subcommand);
}

}  // namespace towlab::cli
