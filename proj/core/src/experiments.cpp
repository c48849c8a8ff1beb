#include "deferq/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <exception>
#include <mutex>
#include <sstream>
#include <thread>

#include "deferq/rng.hpp"
#include "deferq/simulate.hpp"

namespace deferq::experiments {

namespace {

std::string format_double(double v) {
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%.12g", v);
  return buf;
}

ResultRow simulated_row(PolicyKind kind, const SweepSpec& spec,
                        const ValidatedParams& p, double parameter,
                        std::uint64_t row_seed) {
  const sim::SimEstimate est = sim::estimate_blocking(
      p, PolicySpec{kind, parameter}, spec.sim.arrivals, spec.sim.replications,
      row_seed, spec.sim.warmup);
  ResultRow row;
  row.policy = policy_name(kind);
  row.num_servers = p.num_servers();
  row.lambda = p.arrival_rate();
  if (kind == PolicyKind::DSRT || kind == PolicyKind::ESRT) row.parameter = parameter;
  row.blocking = est.blocking_estimate;
  row.ci_halfwidth = est.ci_halfwidth_95;
  row.method = "simulated";
  row.seed = row_seed;
  return row;
}

}  // namespace

int max_worker_threads() {
  if (const char* env = std::getenv("DEFERQ_THREADS")) {
    const int n = std::atoi(env);
    if (n >= 1) return n;
  }
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

std::vector<ResultRow> run_halfin_whitt_sweep(
    const SweepSpec& spec, const std::function<void(const ResultRow&)>& on_row) {
  if (spec.k_values.empty()) {
    throw InvalidParameter("k_values", "must be non-empty");
  }
  if (!std::is_sorted(spec.k_values.begin(), spec.k_values.end())) {
    throw InvalidParameter("k_values", "must be ascending");
  }

  struct Task {
    PolicyKind kind;
    bool erlang_baseline;
    int num_servers;
    std::uint64_t row_seed;
  };
  std::vector<Task> tasks;
  std::uint64_t task_index = 0;
  auto push_tasks = [&](PolicyKind kind, bool baseline) {
    for (int k : spec.k_values) {
      tasks.push_back(Task{kind, baseline, k,
                           replication_seed(spec.sim.base_seed, task_index)});
      ++task_index;
    }
  };
  push_tasks(PolicyKind::NoDeferral, /*baseline=*/true);  // Erlang B group
  for (PolicyKind kind : spec.policies) push_tasks(kind, false);

  auto run_task = [&spec](const Task& task) {
    const double k = static_cast<double>(task.num_servers);
    const double lambda = k + spec.beta * std::sqrt(k);
    if (!(lambda > 0.0)) {
      throw InvalidParameter("beta", "arrival rate K + beta sqrt(K) must be positive");
    }
    const ValidatedParams p = validate_params(SystemParams{
        task.num_servers, lambda, spec.mu, spec.t_hat, spec.d_hat});

    if (task.erlang_baseline || task.kind == PolicyKind::NoDeferral) {
      ResultRow row;
      row.policy = task.erlang_baseline ? "erlang-b" : policy_name(task.kind);
      row.num_servers = task.num_servers;
      row.lambda = lambda;
      row.blocking = erlang_b_blocking(task.num_servers, p.offered_load());
      row.method = "analytic";
      return row;
    }

    if (task.kind == PolicyKind::FixedMax || task.kind == PolicyKind::UniformRandom) {
      return simulated_row(task.kind, spec, p, 0.0, task.row_seed);
    }

    // Tunable policies: pick the best parameter, then report its objective.
    opt::Options options;
    options.objective = spec.objective;
    options.sim_arrivals = spec.sim.arrivals;
    options.sim_replications = spec.sim.replications;
    options.sim_seed = task.row_seed;
    const opt::OptimizationResult best = opt::minimize_blocking(p, task.kind, options);

    if (spec.objective == opt::Objective::Simulated) {
      return simulated_row(task.kind, spec, p, best.best_parameter, task.row_seed);
    }
    ResultRow row;
    row.policy = policy_name(task.kind);
    row.num_servers = task.num_servers;
    row.lambda = lambda;
    row.parameter = best.best_parameter;
    row.blocking = best.best_blocking;
    row.method = "analytic";
    return row;
  };

  const int workers =
      std::min<int>(max_worker_threads(), static_cast<int>(tasks.size()));
  std::vector<std::optional<ResultRow>> results(tasks.size());
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex error_mutex;

  auto worker = [&] {
    for (;;) {
      const std::size_t i = next.fetch_add(1);
      if (i >= tasks.size() || failed.load()) return;
      try {
        results[i] = run_task(tasks[i]);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!first_error) first_error = std::current_exception();
        failed.store(true);
        return;
      }
    }
  };

  if (workers <= 1) {
    worker();
  } else {
    std::vector<std::thread> pool;
    pool.reserve(workers);
    for (int w = 0; w < workers; ++w) pool.emplace_back(worker);
    for (std::thread& t : pool) t.join();
  }

  // Deliver the complete prefix in deterministic (policy, K) order; on
  // failure that is everything finished before the error.
  std::vector<ResultRow> rows;
  rows.reserve(tasks.size());
  for (const std::optional<ResultRow>& r : results) {
    if (!r.has_value()) break;
    rows.push_back(*r);
    if (on_row) on_row(rows.back());
  }
  if (first_error) std::rethrow_exception(first_error);
  return rows;
}

std::string to_csv(const std::vector<ResultRow>& rows) {
  std::string out = "policy,servers,lambda,parameter,blocking,ci_halfwidth,method,seed\n";
  for (const ResultRow& row : rows) {
    out += row.policy;
    out += ',' + std::to_string(row.num_servers);
    out += ',' + format_double(row.lambda);
    out += ',';
    if (row.parameter) out += format_double(*row.parameter);
    out += ',' + format_double(row.blocking);
    out += ',';
    if (row.ci_halfwidth) out += format_double(*row.ci_halfwidth);
    out += ',' + row.method;
    out += ',';
    if (row.seed) out += std::to_string(*row.seed);
    out += '\n';
  }
  return out;
}

std::vector<ResultRow> parse_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  if (!std::getline(in, line)) throw InvalidParameter("csv", "empty input");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  if (line != "policy,servers,lambda,parameter,blocking,ci_halfwidth,method,seed") {
    throw InvalidParameter("csv", "unexpected header");
  }

  std::vector<ResultRow> rows;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::string field;
    std::istringstream ls(line);
    while (std::getline(ls, field, ',')) fields.push_back(field);
    if (line.back() == ',') fields.push_back("");
    if (fields.size() != 8) throw InvalidParameter("csv", "row needs 8 fields");

    ResultRow row;
    row.policy = fields[0];
    row.num_servers = std::stoi(fields[1]);
    row.lambda = std::stod(fields[2]);
    if (!fields[3].empty()) row.parameter = std::stod(fields[3]);
    row.blocking = std::stod(fields[4]);
    if (!fields[5].empty()) row.ci_halfwidth = std::stod(fields[5]);
    row.method = fields[6];
    if (!fields[7].empty()) row.seed = std::stoull(fields[7]);
    rows.push_back(std::move(row));
  }
  return rows;
}

}  // namespace deferq::experiments
