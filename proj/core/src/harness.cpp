#include "varinv/harness.hpp"

#include <algorithm>
#include <cmath>
#include <cstdlib>
#include <iostream>
#include <map>
#include <sstream>
#include <stdexcept>

#include "varinv/io.hpp"
#include "varinv/rng.hpp"

namespace varinv {

namespace {

// Experiment i reuses the base patterns cyclically with a mild rescale so
// arbitrary I stays exact for the analytic phantoms.
double experiment_scale(int i) { return 1.0 + 0.5 * (i / 2); }

Eigen::VectorXd nodal_field(const TriMesh& mesh, const std::function<double(double, double)>& f) {
  Eigen::VectorXd u(mesh.node_count());
  for (int v = 0; v < mesh.node_count(); ++v)
    u[v] = f(mesh.nodes[static_cast<std::size_t>(v)].x(),
             mesh.nodes[static_cast<std::size_t>(v)].y());
  return u;
}

}  // namespace

Eigen::VectorXd phantom_sigma(const TriMesh& mesh, const ElementGradients& eg,
                              const PhantomSpec& phantom) {
  (void)eg;
  Eigen::VectorXd sigma(mesh.triangle_count());
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    const Eigen::Vector2d mid = (mesh.nodes[static_cast<std::size_t>(tri[0])] +
                                 mesh.nodes[static_cast<std::size_t>(tri[1])] +
                                 mesh.nodes[static_cast<std::size_t>(tri[2])]) /
                                3.0;
    switch (phantom.kind) {
      case PhantomSpec::Kind::affine:
        sigma[t] = phantom.background;
        break;
      case PhantomSpec::Kind::layered:
        sigma[t] = mid.x() < 0.5 ? phantom.value : phantom.background;
        break;
      case PhantomSpec::Kind::disk:
        sigma[t] = (mid - phantom.center).norm() <= phantom.radius ? phantom.value
                                                                   : phantom.background;
        break;
    }
  }
  return sigma;
}

Eigen::VectorXd nodal_current(const TriMesh& mesh, const ElementGradients& eg,
                              const BoundaryTrace& trace, const Eigen::VectorXd& sigma,
                              const Eigen::VectorXd& phi) {
  // Boundary edge -> adjacent triangle.
  std::map<std::pair<int, int>, int> edge_tri;
  for (int t = 0; t < mesh.triangle_count(); ++t) {
    const auto& tri = mesh.triangles[static_cast<std::size_t>(t)];
    for (int e = 0; e < 3; ++e) {
      const int a = tri[e], b = tri[(e + 1) % 3];
      edge_tri[{std::min(a, b), std::max(a, b)}] = t;
    }
  }

  const int b = trace.size();
  Eigen::VectorXd edge_flux(b);
  for (int k = 0; k < b; ++k) {
    const auto& edge = mesh.boundary_edges[static_cast<std::size_t>(k)];
    const auto it = edge_tri.find({std::min(edge[0], edge[1]), std::max(edge[0], edge[1])});
    if (it == edge_tri.end()) throw std::runtime_error("nodal_current: dangling boundary edge");
    const Eigen::Vector2d t_vec = (mesh.nodes[static_cast<std::size_t>(edge[1])] -
                                   mesh.nodes[static_cast<std::size_t>(edge[0])])
                                      .normalized();
    const Eigen::Vector2d nu(t_vec.y(), -t_vec.x());  // outward for a ccw loop
    edge_flux[k] = sigma[it->second] * eg.field_gradient(mesh, phi, it->second).dot(nu);
  }

  Eigen::VectorXd j(b);
  for (int k = 0; k < b; ++k) j[k] = 0.5 * (edge_flux[(k + b - 1) % b] + edge_flux[k]);
  return j;
}

EitInstance build_instance(const RunConfig& config) {
  EitInstance inst;
  inst.mesh = build_structured_mesh(config.mesh_n);
  inst.eg = p1_gradients(inst.mesh);
  inst.trace = boundary_trace_indices(inst.mesh);
  inst.reg = config.reg;
  inst.reg_ops = RegOperators::assemble(inst.mesh, inst.eg, inst.reg);

  if (config.phantom.kind == PhantomSpec::Kind::layered && config.mesh_n % 2 != 0)
    throw std::invalid_argument("layered phantom needs an even mesh_n (interface at x=1/2)");

  inst.sigma_true.values = phantom_sigma(inst.mesh, inst.eg, config.phantom);
  inst.sigma_true.lower = config.sigma_lower;
  inst.sigma_true.upper = config.sigma_upper;

  const int ne = config.experiments;
  inst.state_true = StateEnsemble::zeros(ne, inst.mesh.node_count());
  inst.exact.upsilon.resize(static_cast<std::size_t>(ne));
  inst.exact.gamma.resize(static_cast<std::size_t>(ne));
  inst.exact.current.resize(static_cast<std::size_t>(ne));
  inst.exact.delta = 0.0;
  inst.exact.tau = config.reg.tau;
  inst.exact.seed = config.seed;

  for (int i = 0; i < ne; ++i) {
    const double scale = experiment_scale(i);
    Eigen::VectorXd phi, psi;
    switch (config.phantom.kind) {
      case PhantomSpec::Kind::affine: {
        const double theta = M_PI * i / std::max(1, ne);
        const Eigen::Vector2d a(std::cos(theta), std::sin(theta));
        const double c = config.phantom.background;
        phi = scale * nodal_field(inst.mesh, [&](double x, double y) {
          return a.x() * x + a.y() * y;
        });
        psi = scale * nodal_field(inst.mesh, [&](double x, double y) {
          return c * (a.y() * x - a.x() * y);
        });
        break;
      }
      case PhantomSpec::Kind::layered: {
        const double sl = config.phantom.value, sr = config.phantom.background;
        if (i % 2 == 0) {
          const double flux = 2.0 * sl * sr / (sl + sr);  // phi(1) = 1
          const double al = flux / sl, ar = flux / sr;
          phi = scale * nodal_field(inst.mesh, [&](double x, double) {
            return x <= 0.5 ? al * x : 0.5 * al + ar * (x - 0.5);
          });
          psi = scale * nodal_field(inst.mesh, [&](double, double y) { return -flux * y; });
        } else {
          phi = scale * nodal_field(inst.mesh, [&](double, double y) { return y; });
          psi = scale * nodal_field(inst.mesh, [&](double x, double) {
            return x <= 0.5 ? sl * x : 0.5 * sl + sr * (x - 0.5);
          });
        }
        break;
      }
      case PhantomSpec::Kind::disk: {
        // Measured data path: excite, solve, integrate the current.
        const double theta = M_PI * i / std::max(1, ne);
        const Eigen::Vector2d a(std::cos(theta), std::sin(theta));
        const Eigen::VectorXd probe = nodal_field(inst.mesh, [&](double x, double y) {
          return a.x() * x + a.y() * y;
        });
        const Eigen::VectorXd background =
            Eigen::VectorXd::Constant(inst.mesh.triangle_count(), config.phantom.background);
        const Eigen::VectorXd j =
            scale * nodal_current(inst.mesh, inst.eg, inst.trace, background, probe);
        phi = forward_neumann(inst.mesh, inst.eg, inst.sigma_true.values, inst.trace, j);
        const Eigen::VectorXd gamma = gamma_from_current(inst.mesh, inst.trace, j);
        psi = forward_dirichlet(inst.mesh, inst.eg, inst.sigma_true.values.cwiseInverse(),
                                inst.trace, gamma);
        inst.exact.current[static_cast<std::size_t>(i)] = j;
        break;
      }
    }
    inst.state_true.phi[static_cast<std::size_t>(i)] = phi;
    inst.state_true.psi[static_cast<std::size_t>(i)] = psi;
    inst.exact.upsilon[static_cast<std::size_t>(i)] = trace_values(inst.trace, phi);
    inst.exact.gamma[static_cast<std::size_t>(i)] = trace_values(inst.trace, psi);
    if (config.phantom.kind != PhantomSpec::Kind::disk) {
      inst.exact.current[static_cast<std::size_t>(i)] =
          nodal_current(inst.mesh, inst.eg, inst.trace, inst.sigma_true.values, phi);
    }
  }

  inst.noisy = add_noise(inst.exact, config.delta, config.seed);
  return inst;
}

nlohmann::json record_to_json(const BoundaryRecord& record) {
  nlohmann::json j;
  j["upsilon"] = nlohmann::json::array();
  j["gamma"] = nlohmann::json::array();
  j["current"] = nlohmann::json::array();
  for (const auto& v : record.upsilon) j["upsilon"].push_back(eigen_to_json(v));
  for (const auto& v : record.gamma) j["gamma"].push_back(eigen_to_json(v));
  for (const auto& v : record.current) j["current"].push_back(eigen_to_json(v));
  j["delta"] = record.delta;
  j["tau"] = record.tau;
  j["seed"] = record.seed;
  return j;
}

BoundaryRecord record_from_json(const nlohmann::json& j) {
  BoundaryRecord record;
  for (const auto& v : j.at("upsilon")) record.upsilon.push_back(eigen_from_json(v));
  for (const auto& v : j.at("gamma")) record.gamma.push_back(eigen_from_json(v));
  for (const auto& v : j.at("current")) record.current.push_back(eigen_from_json(v));
  record.delta = j.at("delta").get<double>();
  record.tau = j.at("tau").get<double>();
  record.seed = j.at("seed").get<std::uint64_t>();
  if (record.upsilon.size() != record.gamma.size())
    throw std::invalid_argument("record: upsilon/gamma length mismatch");
  return record;
}

nlohmann::json state_to_json(const StateEnsemble& state) {
  nlohmann::json j;
  j["phi"] = nlohmann::json::array();
  j["psi"] = nlohmann::json::array();
  for (const auto& v : state.phi) j["phi"].push_back(eigen_to_json(v));
  for (const auto& v : state.psi) j["psi"].push_back(eigen_to_json(v));
  return j;
}

StateEnsemble state_from_json(const nlohmann::json& j) {
  StateEnsemble state;
  for (const auto& v : j.at("phi")) state.phi.push_back(eigen_from_json(v));
  for (const auto& v : j.at("psi")) state.psi.push_back(eigen_from_json(v));
  if (state.phi.size() != state.psi.size())
    throw std::invalid_argument("state: phi/psi length mismatch");
  return state;
}

nlohmann::json report_to_json(const SolveReport& report) {
  nlohmann::json j;
  j["objective_history"] = report.objective_history;
  j["history_segments"] = report.history_segments;
  j["final_qa"] = report.final_qa;
  j["final_jkv"] = report.final_jkv;
  j["final_r"] = report.final_r;
  j["final_objective"] = report.final_objective;
  j["box_violation"] = report.box_violation;
  j["morozov_slack"] = report.morozov_slack;
  j["w11_slack"] = report.w11_slack;
  j["minimality_gap"] = report.minimality_gap;
  j["truth_admissible"] = report.truth_admissible;
  j["truth_objective"] = report.truth_objective;
  j["iterations"] = report.iterations;
  j["stability_norm"] = report.stability_norm;
  j["converged"] = report.converged;
  j["stop_reason"] = report.stop_reason;
  j["alpha"] = report.alpha;
  j["seed"] = report.seed;
  j["config_hash"] = report.config_hash;
  return j;
}

std::string sigma_to_csv(const Eigen::VectorXd& sigma) {
  std::ostringstream os;
  os.precision(17);
  os << "triangle,sigma\n";
  for (int t = 0; t < sigma.size(); ++t) os << t << ',' << sigma[t] << '\n';
  return os.str();
}

Eigen::VectorXd sigma_from_csv(const std::string& text) {
  std::istringstream is(text);
  std::string line;
  if (!std::getline(is, line) || line != "triangle,sigma")
    throw std::invalid_argument("sigma csv: bad header");
  std::vector<double> values;
  while (std::getline(is, line)) {
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos) throw std::invalid_argument("sigma csv: bad line");
    values.push_back(std::stod(line.substr(comma + 1)));
  }
  Eigen::VectorXd sigma(static_cast<Eigen::Index>(values.size()));
  for (std::size_t k = 0; k < values.size(); ++k)
    sigma[static_cast<Eigen::Index>(k)] = values[k];
  return sigma;
}

std::string history_to_csv(const SolveReport& report) {
  std::ostringstream os;
  os.precision(17);
  os << "iter,objective,qa,r,box_violation\n";
  for (std::size_t k = 0; k < report.objective_history.size(); ++k) {
    os << k << ',' << report.objective_history[k] << ',';
    if (k < report.qa_history.size()) os << report.qa_history[k];
    os << ',';
    if (k < report.r_history.size()) os << report.r_history[k];
    os << ',';
    if (k < report.violation_history.size()) os << report.violation_history[k];
    os << '\n';
  }
  return os.str();
}

double sigma_l2_error(const ElementGradients& eg, const Eigen::VectorXd& a,
                      const Eigen::VectorXd& b) {
  if (a.size() != b.size()) throw std::invalid_argument("sigma_l2_error: size mismatch");
  double sq = 0.0;
  for (int t = 0; t < a.size(); ++t) {
    const double d = a[t] - b[t];
    sq += eg.areas[static_cast<std::size_t>(t)] * d * d;
  }
  return std::sqrt(sq);
}

int sweep_thread_cap() {
  const char* env = std::getenv("VARINV_THREADS");
  if (!env) return 1;
  const int n = std::atoi(env);
  return n >= 1 ? n : 1;
}

SweepRow eit_sweep_row(const EitInstance& instance, const RunConfig& config, double delta,
                       std::size_t row_index) {
  const std::uint64_t row_seed =
      config.seed ^ (0x9E3779B97F4A7C15ull * (static_cast<std::uint64_t>(row_index) + 1));
  const BoundaryRecord noisy = add_noise(instance.exact, delta, row_seed);
  const AlphaChoice alpha = alpha_schedule(config.reg, delta);

  const EitProblem problem =
      EitProblem::make(instance.mesh, instance.eg, instance.trace, instance.reg_ops, config.reg,
                       noisy, config.mode, alpha.alpha);
  ConductivityField sigma0;
  StateEnsemble state0;
  make_default_start(problem, config.sigma_lower, config.sigma_upper, sigma0, state0);
  const EitSolution sol = solve_instance(problem, sigma0, state0, config.solver,
                                         &instance.sigma_true, &instance.state_true);

  SweepRow row;
  row.delta = delta;
  row.alpha = alpha.min_alpha();
  row.recon_error = sigma_l2_error(instance.eg, sol.sigma.values, instance.sigma_true.values);
  row.stability_norm = sol.report.stability_norm;
  row.minimality_gap = sol.report.minimality_gap;
  row.qa = sol.report.final_qa;
  row.feasible = sol.report.box_violation <= 1e-10 && sol.report.morozov_slack <= 1e-10 &&
                 sol.report.w11_slack <= 1e-8;
  return row;
}

int cmd_generate(const RunConfig& config, const std::filesystem::path& out_dir) {
  const EitInstance inst = build_instance(config);

  std::ostringstream mesh_text;
  write_mesh(mesh_text, inst.mesh);
  atomic_write_file(out_dir / "mesh.txt", mesh_text.str());
  save_json_atomic(out_dir / "record_exact.json", record_to_json(inst.exact));
  save_json_atomic(out_dir / "record_noisy.json", record_to_json(inst.noisy));
  atomic_write_file(out_dir / "truth_sigma.csv", sigma_to_csv(inst.sigma_true.values));
  save_json_atomic(out_dir / "truth_state.json", state_to_json(inst.state_true));
  return 0;
}

int cmd_solve(const RunConfig& config, const std::filesystem::path& data_dir,
              const std::filesystem::path& out_dir,
              const std::optional<std::string>& history_csv) {
  if (config.sigma_upper < config.sigma_lower) return 3;

  TriMesh mesh;
  {
    std::istringstream is(read_file(data_dir / "mesh.txt"));
    mesh = read_mesh(is);
  }
  const ElementGradients eg = p1_gradients(mesh);
  const BoundaryTrace trace = boundary_trace_indices(mesh);
  const RegOperators reg_ops = RegOperators::assemble(mesh, eg, config.reg);
  const BoundaryRecord noisy = record_from_json(load_json(data_dir / "record_noisy.json"));

  std::optional<ConductivityField> truth_sigma;
  std::optional<StateEnsemble> truth_state;
  if (std::filesystem::exists(data_dir / "truth_sigma.csv") &&
      std::filesystem::exists(data_dir / "truth_state.json")) {
    truth_sigma = ConductivityField{sigma_from_csv(read_file(data_dir / "truth_sigma.csv")),
                                    config.sigma_lower, config.sigma_upper};
    truth_state = state_from_json(load_json(data_dir / "truth_state.json"));
  }

  const AlphaChoice alpha = alpha_schedule(config.reg, noisy.delta);
  const EitProblem problem =
      EitProblem::make(mesh, eg, trace, reg_ops, config.reg, noisy, config.mode, alpha.alpha);

  ConductivityField sigma0;
  StateEnsemble state0;
  make_default_start(problem, config.sigma_lower, config.sigma_upper, sigma0, state0);

  SolverOptions opts = config.solver;
  opts.record_component_history = history_csv.has_value();
  EitSolution sol;
  try {
    sol = solve_instance(problem, sigma0, state0, opts,
                         truth_sigma ? &*truth_sigma : nullptr,
                         truth_state ? &*truth_state : nullptr);
  } catch (const InfeasibleError& err) {
    std::cerr << "infeasible: " << err.what() << "\n";
    return 3;
  }
  sol.report.seed = noisy.seed;
  sol.report.config_hash = config.hash();

  atomic_write_file(out_dir / "sigma.csv", sigma_to_csv(sol.sigma.values));
  save_json_atomic(out_dir / "state.json", state_to_json(sol.state));
  save_json_atomic(out_dir / "report.json", report_to_json(sol.report));
  if (history_csv) atomic_write_file(out_dir / *history_csv, history_to_csv(sol.report));

  std::cout << "solve: objective " << sol.report.final_objective << ", qa " << sol.report.final_qa
            << ", iterations " << sol.report.iterations << ", wall " << sol.report.wall_time
            << " s, stop " << sol.report.stop_reason << "\n";
  return sol.report.converged ? 0 : 2;
}

int cmd_sweep(const RunConfig& config, const std::vector<double>& deltas,
              const std::filesystem::path& out_dir) {
  const EitInstance inst = build_instance(config);
  const ConvergenceTable table = delta_sweep(
      deltas,
      [&](double delta, std::size_t row) { return eit_sweep_row(inst, config, delta, row); },
      sweep_thread_cap());

  std::ostringstream csv;
  table.write_csv(csv);
  atomic_write_file(out_dir / "table.csv", csv.str());
  std::cout << "sweep trend: " << table.trend_verdict() << "\n";
  return 0;
}

int cmd_toy(std::uint64_t seed, int dim, double delta, double alpha,
            const std::filesystem::path& out_dir, bool sweep) {
  const ToyLinearProblem problem = make_toy(seed, dim, dim, dim);
  Rng rng(seed ^ 0xABCDEFull);
  Eigen::VectorXd y = problem.y_exact;
  for (int k = 0; k < y.size(); ++k) y[k] += delta * rng.symmetric();

  const Eigen::VectorXd x_red = reduced_tikhonov_solve(problem, y, alpha);
  const auto [x_aao, u_aao] = aao_tikhonov_solve(problem, y, alpha);
  const auto [x_mor, u_mor] = morozov_aao_solve(problem, y, delta, 1.5, alpha);

  nlohmann::json j;
  j["seed"] = seed;
  j["dim"] = dim;
  j["delta"] = delta;
  j["alpha"] = alpha;
  j["x_true"] = eigen_to_json(problem.x_true);
  j["reduced"] = {{"x", eigen_to_json(x_red)},
                  {"error", (x_red - problem.x_true).norm()}};
  j["aao"] = {{"x", eigen_to_json(x_aao)},
              {"u", eigen_to_json(u_aao)},
              {"error", (x_aao - problem.x_true).norm()}};
  j["morozov"] = {{"x", eigen_to_json(x_mor)},
                  {"u", eigen_to_json(u_mor)},
                  {"error", (x_mor - problem.x_true).norm()}};
  save_json_atomic(out_dir / "toy_report.json", j);

  if (sweep) {
    RegConfig schedule;
    schedule.alpha_c = {1.0};
    schedule.alpha_p = {1.0};
    const std::vector<double> deltas{4e-2, 2e-2, 1e-2, 5e-3};
    const ConvergenceTable table = delta_sweep(
        deltas,
        [&](double d, std::size_t row) {
          return toy_sweep_row(problem, schedule, d, seed ^ (row + 1));
        },
        sweep_thread_cap());
    std::ostringstream csv;
    table.write_csv(csv);
    atomic_write_file(out_dir / "toy_table.csv", csv.str());
    std::cout << "toy sweep trend: " << table.trend_verdict() << "\n";
  }
  return 0;
}

int cmd_convexity(const RunConfig& config, const std::filesystem::path& out_dir,
                  const ConvexityCmdOptions& opts) {
  ConvexityReport report;

  if (opts.toy) {
    const ToyLinearProblem problem = make_toy(config.seed, 4, 4, 4);
    const double alpha = std::max(config.reg.alpha_min, 1e-4);
    const Eigen::MatrixXd f = problem.forward();
    GradientFn fn;
    fn.value = [f, &problem, alpha](const Eigen::VectorXd& x) {
      return 0.5 * (f * x - problem.y_exact).squaredNorm() + 0.5 * alpha * x.squaredNorm();
    };
    fn.gradient = [f, &problem, alpha](const Eigen::VectorXd& x) {
      return (f.transpose() * (f * x - problem.y_exact) + alpha * x).eval();
    };
    const Eigen::VectorXd x = reduced_tikhonov_solve(problem, problem.y_exact, alpha);
    const Eigen::MatrixXd h = fd_hessian(fn, x);
    report.min_eigenvalue_projected = projected_min_eigenvalue(h, {});
    VectorFn linear;
    linear.dim_in = static_cast<int>(f.cols());
    linear.dim_out = static_cast<int>(f.rows());
    linear.eval = [f](const Eigen::VectorXd& xx) { return (f * xx).eval(); };
    const RatioResult ratio = nonlinearity_ratio(
        linear, [](const Eigen::VectorXd& hh) { return hh.norm(); }, x,
        {opts.ratio_samples, opts.ratio_seed, RatioKind::reduced, 1e-14, 1e-4});
    report.nonlinearity_ratio = ratio.sup_ratio;
    report.kernel_directions = ratio.kernel_directions;
    report.cbar = ratio.sup_ratio;
    report.point_description = "toy reduced Tikhonov minimizer";
  } else {
    RunConfig cfg = config;
    cfg.reg.sigma_component = true;  // the L of the convexity conditions
    const EitInstance inst = build_instance(cfg);
    const AlphaChoice alpha = alpha_schedule(cfg.reg, inst.noisy.delta);
    const EitProblem problem = EitProblem::make(inst.mesh, inst.eg, inst.trace, inst.reg_ops,
                                                cfg.reg, inst.noisy, cfg.mode, alpha.alpha);

    ConductivityField sigma = inst.sigma_true;
    StateEnsemble state = inst.state_true;
    if (opts.at_solution) {
      ConductivityField sigma0;
      StateEnsemble state0;
      make_default_start(problem, cfg.sigma_lower, cfg.sigma_upper, sigma0, state0);
      const EitSolution sol = solve_instance(problem, sigma0, state0, cfg.solver,
                                             &inst.sigma_true, &inst.state_true);
      sigma = sol.sigma;
      state = sol.state;
      report.point_description = "solver output";
    } else {
      report.point_description = "manufactured truth";
    }

    const GradientFn fn = eit_objective_fn(problem, sigma, state);
    Eigen::VectorXd point(sigma.values.size() + 2 * state.experiments() * inst.mesh.node_count());
    point.head(sigma.values.size()) = sigma.values;
    point.tail(point.size() - sigma.values.size()) = pack_state(state);
    const Eigen::MatrixXd h = fd_hessian(fn, point);
    report.min_eigenvalue_projected =
        projected_min_eigenvalue(h, active_coordinates(problem, sigma, state));

    const VectorFn residual = eit_residual_fn(problem, sigma, state);
    const auto l_norm = eit_l_norm(problem, state.experiments());
    const RatioResult reduced = nonlinearity_ratio(
        residual, l_norm, point,
        {opts.ratio_samples, opts.ratio_seed, RatioKind::reduced, 1e-14, 1e-4});
    const RatioResult cbar = nonlinearity_ratio(
        residual, l_norm, point,
        {opts.ratio_samples, opts.ratio_seed, RatioKind::cbar, 1e-14, 1e-4});
    report.nonlinearity_ratio = reduced.sup_ratio;
    report.kernel_directions = reduced.kernel_directions;
    report.cbar = cbar.sup_ratio;

    if (opts.fixpoint) {
      std::vector<double> residuals;
      auto solve_at = [&](double a) {
        std::vector<double> avec = alpha.alpha;
        avec[0] = a;
        const EitProblem p = EitProblem::make(inst.mesh, inst.eg, inst.trace, inst.reg_ops,
                                              cfg.reg, inst.noisy, cfg.mode, avec);
        ConductivityField s0;
        StateEnsemble u0;
        make_default_start(p, cfg.sigma_lower, cfg.sigma_upper, s0, u0);
        const EitSolution sol = solve_instance(p, s0, u0, cfg.solver);
        const double rn = std::sqrt(2.0 * sol.report.final_qa);
        residuals.push_back(rn);
        return rn;
      };
      FixpointOptions fopts;
      fopts.max_iter = opts.fixpoint_max_iter;
      fopts.alpha_floor = cfg.reg.alpha_min;
      report.alpha_fixpoint_history =
          alpha_convexity_fixpoint(solve_at, std::max(report.cbar, 1e-8), alpha.alpha[0], fopts);

      std::ostringstream csv;
      csv.precision(17);
      csv << "k,alpha,residual_norm\n";
      for (std::size_t k = 0; k < report.alpha_fixpoint_history.size(); ++k) {
        csv << k << ',' << report.alpha_fixpoint_history[k] << ',';
        if (k < residuals.size()) csv << residuals[k];
        csv << '\n';
      }
      atomic_write_file(out_dir / "alpha_history.csv", csv.str());
    }
  }

  nlohmann::json j;
  j["min_eigenvalue_projected"] = report.min_eigenvalue_projected;
  j["nonlinearity_ratio"] = report.nonlinearity_ratio;
  j["kernel_directions"] = report.kernel_directions;
  j["cbar"] = report.cbar;
  j["alpha_fixpoint_history"] = report.alpha_fixpoint_history;
  j["point"] = report.point_description;
  save_json_atomic(out_dir / "convexity_report.json", j);
  return 0;
}

}  // namespace varinv
