// deferq: loss systems with customer deferrals. Solve, simulate and optimize
// blocking probabilities, and run Halfin-Whitt experiment sweeps.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include "deferq/dsrt.hpp"
#include "deferq/esrt.hpp"
#include "deferq/experiments.hpp"
#include "deferq/model.hpp"
#include "deferq/optimize.hpp"
#include "deferq/simulate.hpp"

namespace {

using nlohmann::json;

std::string fmt(double v, const char* spec = "%.6g") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

// Values from --config fill in any flag the user did not pass explicitly.
struct ConfigOverlay {
  json values = json::object();

  template <typename T>
  void fill(const CLI::Option* opt, const char* key, T& var) const {
    if (opt->count() == 0 && values.contains(key)) {
      var = values.at(key).get<T>();
    }
  }
};

ConfigOverlay load_config(int argc, char** argv) {
  std::string path;
  for (int i = 1; i < argc; ++i) {
    const std::string arg = argv[i];
    if (arg == "--config" && i + 1 < argc) {
      path = argv[i + 1];
    } else if (arg.rfind("--config=", 0) == 0) {
      path = arg.substr(9);
    }
  }
  ConfigOverlay overlay;
  if (path.empty()) return overlay;
  std::ifstream in(path);
  if (!in) throw deferq::InvalidParameter("config", "cannot open '" + path + "'");
  in >> overlay.values;
  if (!overlay.values.is_object()) {
    throw deferq::InvalidParameter("config", "must be a JSON object");
  }
  return overlay;
}

void emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(out_path);
  if (!out) throw deferq::InvalidParameter("out", "cannot open '" + out_path + "'");
  out << text;
}

struct InstanceFlags {
  int servers = 1;
  double lambda = 1.0;
  double mu = 1.0;
  double t_hat = 10.0;
  int d_hat = 1;

  CLI::Option* servers_opt = nullptr;
  CLI::Option* lambda_opt = nullptr;
  CLI::Option* mu_opt = nullptr;
  CLI::Option* t_hat_opt = nullptr;
  CLI::Option* d_hat_opt = nullptr;

  void attach(CLI::App* cmd) {
    servers_opt = cmd->add_option("--servers", servers, "Number of servers K");
    lambda_opt = cmd->add_option("--lambda", lambda, "Arrival rate");
    mu_opt = cmd->add_option("--mu", mu, "Service rate per server");
    t_hat_opt = cmd->add_option("--t-hat", t_hat, "Deferral time bound");
    d_hat_opt = cmd->add_option("--d-hat", d_hat, "Deferral count bound");
  }
  void fill(const ConfigOverlay& cfg) {
    cfg.fill(servers_opt, "servers", servers);
    cfg.fill(lambda_opt, "lambda", lambda);
    cfg.fill(mu_opt, "mu", mu);
    cfg.fill(t_hat_opt, "t-hat", t_hat);
    cfg.fill(d_hat_opt, "d-hat", d_hat);
  }
  deferq::ValidatedParams validated() const {
    return deferq::validate_params(
        deferq::SystemParams{servers, lambda, mu, t_hat, d_hat});
  }
};

std::string simulate_text(const deferq::sim::SimEstimate& est) {
  std::string out;
  out += "blocking " + fmt(est.blocking_estimate, "%.12g") + "\n";
  out += "ci_halfwidth_95 " + fmt(est.ci_halfwidth_95, "%.12g") + "\n";
  out += "arrivals " + std::to_string(est.counters.arrivals) + "\n";
  out += "deferrals " + std::to_string(est.counters.deferrals) + "\n";
  out += "dropped_on_arrival " + std::to_string(est.counters.dropped_on_arrival) + "\n";
  out += "dropped_on_rearrival " +
         std::to_string(est.counters.dropped_on_rearrival) + "\n";
  out += "replications " + std::to_string(est.replications) + "\n";
  out += "seed " + std::to_string(est.seed) + "\n";
  return out;
}

int dispatch(int argc, char** argv) {
  const ConfigOverlay cfg = load_config(argc, argv);

  CLI::App app{"Loss systems with customer deferrals: exact solvers, "
               "simulation and experiment sweeps"};
  app.require_subcommand(1);
  std::string config_path;
  app.add_option("--config", config_path,
                 "JSON file with flag values; command line overrides");
  std::string out_path;
  app.add_option("--out", out_path, "Write results to this file instead of stdout");

  // ---- erlang-b ------------------------------------------------------
  CLI::App* erlang = app.add_subcommand("erlang-b", "Erlang B blocking probability");
  int eb_servers = 1;
  double eb_rho = -1.0, eb_lambda = -1.0, eb_mu = -1.0;
  CLI::Option* eb_servers_opt = erlang->add_option("--servers", eb_servers, "Servers K");
  CLI::Option* eb_rho_opt = erlang->add_option("--rho", eb_rho, "Offered load lambda/mu");
  CLI::Option* eb_lambda_opt = erlang->add_option("--lambda", eb_lambda, "Arrival rate");
  CLI::Option* eb_mu_opt = erlang->add_option("--mu", eb_mu, "Service rate");

  // ---- solve dsrt / solve esrt ---------------------------------------
  CLI::App* solve = app.add_subcommand("solve", "Analytic blocking probability");
  solve->require_subcommand(1);

  CLI::App* solve_dsrt = solve->add_subcommand("dsrt", "Deterministic rearrival spacing");
  InstanceFlags dsrt_inst;
  dsrt_inst.attach(solve_dsrt);
  double dsrt_x = 1.0;
  CLI::Option* dsrt_x_opt = solve_dsrt->add_option("--x", dsrt_x, "Rearrival spacing");

  CLI::App* solve_esrt = solve->add_subcommand("esrt", "Exponential rearrival spacing");
  InstanceFlags esrt_inst;
  esrt_inst.attach(solve_esrt);
  double esrt_alpha = 1.0;
  CLI::Option* esrt_alpha_opt =
      solve_esrt->add_option("--alpha", esrt_alpha, "Rearrival rate");
  std::string esrt_method = "matrix-geometric";
  CLI::Option* esrt_method_opt =
      solve_esrt->add_option("--method", esrt_method, "Solution route")
          ->check(CLI::IsMember({"matrix-geometric", "full-generator"}));

  // ---- simulate -------------------------------------------------------
  CLI::App* simulate = app.add_subcommand("simulate", "Discrete-event simulation");
  InstanceFlags sim_inst;
  sim_inst.attach(simulate);
  std::string sim_policy = "no-deferral";
  CLI::Option* sim_policy_opt =
      simulate->add_option("--policy", sim_policy, "Deferral policy")
          ->check(CLI::IsMember({"no-deferral", "fixed-max", "uniform-random",
                                 "dsrt", "esrt"}));
  double sim_x = 0.0, sim_alpha = 0.0;
  CLI::Option* sim_x_opt = simulate->add_option("--x", sim_x, "DSRT spacing");
  CLI::Option* sim_alpha_opt = simulate->add_option("--alpha", sim_alpha, "ESRT rate");
  std::uint64_t sim_arrivals = 100000, sim_warmup = 0, sim_seed = 1;
  int sim_replications = 1;
  CLI::Option* sim_arrivals_opt =
      simulate->add_option("--arrivals", sim_arrivals, "Fresh arrivals per replication");
  CLI::Option* sim_warmup_opt =
      simulate->add_option("--warmup", sim_warmup, "Uncounted initial arrivals");
  CLI::Option* sim_reps_opt =
      simulate->add_option("--replications", sim_replications, "Independent replications");
  CLI::Option* sim_seed_opt = simulate->add_option("--seed", sim_seed, "Base RNG seed");

  // ---- optimize -------------------------------------------------------
  CLI::App* optimize = app.add_subcommand("optimize", "Minimize blocking over the policy parameter");
  InstanceFlags opt_inst;
  opt_inst.attach(optimize);
  std::string opt_policy = "dsrt";
  CLI::Option* opt_policy_opt =
      optimize->add_option("--policy", opt_policy, "dsrt or esrt")
          ->check(CLI::IsMember({"dsrt", "esrt"}));
  std::string opt_objective = "analytic";
  CLI::Option* opt_objective_opt =
      optimize->add_option("--objective", opt_objective, "Objective kind")
          ->check(CLI::IsMember({"analytic", "simulated"}));
  double opt_lower = 0.0, opt_upper = 0.0, opt_tol = 1e-4;
  CLI::Option* opt_lower_opt = optimize->add_option("--lower", opt_lower, "Lower bound");
  CLI::Option* opt_upper_opt = optimize->add_option("--upper", opt_upper, "Upper bound");
  CLI::Option* opt_tol_opt = optimize->add_option("--tol", opt_tol, "Relative tolerance");
  std::uint64_t opt_arrivals = 1000000, opt_seed = 1;
  int opt_reps = 1;
  CLI::Option* opt_arrivals_opt =
      optimize->add_option("--arrivals", opt_arrivals, "Arrivals per simulated evaluation");
  CLI::Option* opt_reps_opt =
      optimize->add_option("--replications", opt_reps, "Replications per simulated evaluation");
  CLI::Option* opt_seed_opt = optimize->add_option("--seed", opt_seed, "Seed (common random numbers)");

  // ---- halfin-whitt ---------------------------------------------------
  CLI::App* sweep = app.add_subcommand("halfin-whitt", "Sweep K with lambda = K + beta sqrt(K)");
  double hw_beta = 0.1, hw_mu = 1.0, hw_t_hat = 10.0;
  int hw_d_hat = 1;
  CLI::Option* hw_beta_opt = sweep->add_option("--beta", hw_beta, "Halfin-Whitt slack");
  CLI::Option* hw_mu_opt = sweep->add_option("--mu", hw_mu, "Service rate");
  CLI::Option* hw_t_hat_opt = sweep->add_option("--t-hat", hw_t_hat, "Deferral time bound");
  CLI::Option* hw_d_hat_opt = sweep->add_option("--d-hat", hw_d_hat, "Deferral count bound");
  std::vector<int> hw_k_list;
  CLI::Option* hw_k_list_opt =
      sweep->add_option("--k-list", hw_k_list, "Explicit K values")->delimiter(',');
  int hw_k_min = 0, hw_k_max = 0, hw_k_step = 1;
  CLI::Option* hw_k_min_opt = sweep->add_option("--k-min", hw_k_min, "First K");
  CLI::Option* hw_k_max_opt = sweep->add_option("--k-max", hw_k_max, "Last K");
  CLI::Option* hw_k_step_opt = sweep->add_option("--k-step", hw_k_step, "K increment");
  std::vector<std::string> hw_policies = {"dsrt", "fixed-max", "uniform-random"};
  CLI::Option* hw_policies_opt =
      sweep->add_option("--policies", hw_policies, "Policies to evaluate")->delimiter(',');
  std::string hw_objective = "analytic";
  CLI::Option* hw_objective_opt =
      sweep->add_option("--objective", hw_objective, "Objective for tunable policies")
          ->check(CLI::IsMember({"analytic", "simulated"}));
  std::uint64_t hw_arrivals = 100000, hw_warmup = 0, hw_seed = 1;
  int hw_reps = 1;
  CLI::Option* hw_arrivals_opt = sweep->add_option("--arrivals", hw_arrivals, "Arrivals per run");
  CLI::Option* hw_warmup_opt = sweep->add_option("--warmup", hw_warmup, "Warmup arrivals");
  CLI::Option* hw_reps_opt = sweep->add_option("--replications", hw_reps, "Replications per run");
  CLI::Option* hw_seed_opt = sweep->add_option("--seed", hw_seed, "Base seed");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);  // prints help text or the usage error
    return code == 0 ? 0 : 2;
  }

  if (*erlang) {
    cfg.fill(eb_servers_opt, "servers", eb_servers);
    cfg.fill(eb_rho_opt, "rho", eb_rho);
    cfg.fill(eb_lambda_opt, "lambda", eb_lambda);
    cfg.fill(eb_mu_opt, "mu", eb_mu);
    double rho = eb_rho;
    if (rho < 0.0) {
      if (eb_lambda <= 0.0 || eb_mu <= 0.0) {
        throw CLI::ValidationError("erlang-b", "need --rho or both --lambda and --mu");
      }
      rho = eb_lambda / eb_mu;
    }
    emit(fmt(deferq::erlang_b_blocking(eb_servers, rho)) + "\n", out_path);
    return 0;
  }

  if (*solve_dsrt) {
    dsrt_inst.fill(cfg);
    cfg.fill(dsrt_x_opt, "x", dsrt_x);
    const auto params = dsrt_inst.validated();
    const deferq::BlockingReport report = deferq::dsrt::blocking_general(params, dsrt_x);
    emit(fmt(report.total) + "\n", out_path);
    return 0;
  }

  if (*solve_esrt) {
    esrt_inst.fill(cfg);
    cfg.fill(esrt_alpha_opt, "alpha", esrt_alpha);
    cfg.fill(esrt_method_opt, "method", esrt_method);
    const auto params = esrt_inst.validated();
    const auto method = esrt_method == "full-generator"
                            ? deferq::esrt::Method::FullGenerator
                            : deferq::esrt::Method::MatrixGeometric;
    const deferq::BlockingReport report =
        deferq::esrt::blocking(params, esrt_alpha, method);
    emit(fmt(report.total) + "\n", out_path);
    return 0;
  }

  if (*simulate) {
    sim_inst.fill(cfg);
    cfg.fill(sim_policy_opt, "policy", sim_policy);
    cfg.fill(sim_x_opt, "x", sim_x);
    cfg.fill(sim_alpha_opt, "alpha", sim_alpha);
    cfg.fill(sim_arrivals_opt, "arrivals", sim_arrivals);
    cfg.fill(sim_warmup_opt, "warmup", sim_warmup);
    cfg.fill(sim_reps_opt, "replications", sim_replications);
    cfg.fill(sim_seed_opt, "seed", sim_seed);

    const deferq::PolicyKind kind = deferq::policy_from_name(sim_policy);
    double parameter = 0.0;
    if (kind == deferq::PolicyKind::DSRT) parameter = sim_x;
    if (kind == deferq::PolicyKind::ESRT) parameter = sim_alpha;
    if ((kind == deferq::PolicyKind::DSRT && sim_x <= 0.0) ||
        (kind == deferq::PolicyKind::ESRT && sim_alpha <= 0.0)) {
      throw CLI::ValidationError("simulate", "policy needs --x (dsrt) or --alpha (esrt)");
    }
    std::uint64_t warmup = sim_warmup_opt->count() || cfg.values.contains("warmup")
                               ? sim_warmup
                               : sim_arrivals / 10;
    const auto params = sim_inst.validated();
    const deferq::sim::SimEstimate est = deferq::sim::estimate_blocking(
        params, deferq::PolicySpec{kind, parameter}, sim_arrivals, sim_replications,
        sim_seed, warmup);
    emit(simulate_text(est), out_path);
    return 0;
  }

  if (*optimize) {
    opt_inst.fill(cfg);
    cfg.fill(opt_policy_opt, "policy", opt_policy);
    cfg.fill(opt_objective_opt, "objective", opt_objective);
    cfg.fill(opt_lower_opt, "lower", opt_lower);
    cfg.fill(opt_upper_opt, "upper", opt_upper);
    cfg.fill(opt_tol_opt, "tol", opt_tol);
    cfg.fill(opt_arrivals_opt, "arrivals", opt_arrivals);
    cfg.fill(opt_reps_opt, "replications", opt_reps);
    cfg.fill(opt_seed_opt, "seed", opt_seed);

    deferq::opt::Options options;
    options.bounds = {opt_lower, opt_upper};
    options.relative_tol = opt_tol;
    options.objective = opt_objective == "simulated"
                            ? deferq::opt::Objective::Simulated
                            : deferq::opt::Objective::Analytic;
    options.sim_arrivals = opt_arrivals;
    options.sim_replications = opt_reps;
    options.sim_seed = opt_seed;

    const auto params = opt_inst.validated();
    const deferq::opt::OptimizationResult result = deferq::opt::minimize_blocking(
        params, deferq::policy_from_name(opt_policy), options);
    std::string text;
    text += "best_parameter " + fmt(result.best_parameter, "%.12g") + "\n";
    text += "best_blocking " + fmt(result.best_blocking, "%.12g") + "\n";
    text += "evaluations " + std::to_string(result.evaluations) + "\n";
    emit(text, out_path);
    return 0;
  }

  if (*sweep) {
    cfg.fill(hw_beta_opt, "beta", hw_beta);
    cfg.fill(hw_mu_opt, "mu", hw_mu);
    cfg.fill(hw_t_hat_opt, "t-hat", hw_t_hat);
    cfg.fill(hw_d_hat_opt, "d-hat", hw_d_hat);
    cfg.fill(hw_k_list_opt, "k-list", hw_k_list);
    cfg.fill(hw_k_min_opt, "k-min", hw_k_min);
    cfg.fill(hw_k_max_opt, "k-max", hw_k_max);
    cfg.fill(hw_k_step_opt, "k-step", hw_k_step);
    cfg.fill(hw_policies_opt, "policies", hw_policies);
    cfg.fill(hw_objective_opt, "objective", hw_objective);
    cfg.fill(hw_arrivals_opt, "arrivals", hw_arrivals);
    cfg.fill(hw_warmup_opt, "warmup", hw_warmup);
    cfg.fill(hw_reps_opt, "replications", hw_reps);
    cfg.fill(hw_seed_opt, "seed", hw_seed);

    deferq::experiments::SweepSpec spec;
    spec.beta = hw_beta;
    spec.mu = hw_mu;
    spec.t_hat = hw_t_hat;
    spec.d_hat = hw_d_hat;
    if (!hw_k_list.empty()) {
      spec.k_values = hw_k_list;
    } else if (hw_k_min >= 1 && hw_k_max >= hw_k_min && hw_k_step >= 1) {
      for (int k = hw_k_min; k <= hw_k_max; k += hw_k_step) spec.k_values.push_back(k);
    } else {
      throw CLI::ValidationError("halfin-whitt", "need --k-list or --k-min/--k-max");
    }
    for (const std::string& name : hw_policies) {
      spec.policies.push_back(deferq::policy_from_name(name));
    }
    spec.objective = hw_objective == "simulated" ? deferq::opt::Objective::Simulated
                                                 : deferq::opt::Objective::Analytic;
    spec.sim.arrivals = hw_arrivals;
    spec.sim.warmup = hw_warmup;
    spec.sim.replications = hw_reps;
    spec.sim.base_seed = hw_seed;

    std::ofstream file;
    std::ostream* out = &std::cout;
    if (!out_path.empty()) {
      file.open(out_path);
      if (!file) throw deferq::InvalidParameter("out", "cannot open '" + out_path + "'");
      out = &file;
    }
    *out << "policy,servers,lambda,parameter,blocking,ci_halfwidth,method,seed\n";
    // Stream rows as their prefix completes so partial results survive a failure.
    deferq::experiments::run_halfin_whitt_sweep(
        spec, [&](const deferq::experiments::ResultRow& row) {
          const std::string csv = deferq::experiments::to_csv({row});
          *out << csv.substr(csv.find('\n') + 1);
          out->flush();
        });
    return 0;
  }

  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  try {
    return dispatch(argc, argv);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 3;
  }
}
