#include "deferq/model.hpp"

#include <cmath>

namespace deferq {

ValidatedParams validate_params(const SystemParams& p) {
  if (p.num_servers < 1) {
    throw InvalidParameter("num_servers", "must be at least 1");
  }
  if (!(p.arrival_rate > 0.0) || !std::isfinite(p.arrival_rate)) {
    throw InvalidParameter("arrival_rate", "must be positive and finite");
  }
  if (!(p.service_rate > 0.0) || !std::isfinite(p.service_rate)) {
    throw InvalidParameter("service_rate", "must be positive and finite");
  }
  if (!(p.deferral_time_bound > 0.0) || !std::isfinite(p.deferral_time_bound)) {
    throw InvalidParameter("deferral_time_bound", "must be positive and finite");
  }
  if (p.deferral_count_bound < 0) {
    throw InvalidParameter("deferral_count_bound", "must be non-negative");
  }
  const double rho = p.arrival_rate / p.service_rate;
  if (!std::isfinite(rho)) {
    throw InvalidParameter("service_rate", "offered load overflows");
  }
  return ValidatedParams(p, rho);
}

void validate_policy(const ValidatedParams& p, const PolicySpec& policy) {
  switch (policy.kind) {
    case PolicyKind::DSRT:
      if (!(policy.parameter > 0.0) || policy.parameter > p.deferral_time_bound()) {
        throw InvalidParameter("spacing", "DSRT requires 0 < x <= deferral_time_bound");
      }
      break;
    case PolicyKind::ESRT:
      if (!(policy.parameter > 0.0) ||
          1.0 / policy.parameter > p.deferral_time_bound()) {
        throw InvalidParameter("rearrival_rate",
                               "ESRT requires 1/alpha <= deferral_time_bound");
      }
      break;
    default:
      break;
  }
}

int effective_deferral_limit(const ValidatedParams& p, const PolicySpec& policy) {
  const int d_hat = p.deferral_count_bound();
  const double t_hat = p.deferral_time_bound();
  switch (policy.kind) {
    case PolicyKind::NoDeferral:
      return 0;
    case PolicyKind::FixedMax:
    case PolicyKind::UniformRandom:
      return d_hat;
    case PolicyKind::DSRT: {
      const double x = policy.parameter;
      if (!(x > 0.0)) throw InvalidParameter("spacing", "must be positive");
      int d = static_cast<int>(std::floor(t_hat / x));
      // Guard against division rounding up: keep D * x <= t_hat exact.
      while (d > 0 && static_cast<double>(d) * x > t_hat) --d;
      return std::min(d_hat, d);
    }
    case PolicyKind::ESRT: {
      const double alpha = policy.parameter;
      if (!(alpha > 0.0)) throw InvalidParameter("rearrival_rate", "must be positive");
      const int d = static_cast<int>(std::floor(t_hat * alpha));
      return std::min(d_hat, d);
    }
  }
  throw InvalidParameter("policy", "unknown policy kind");
}

double erlang_b_blocking(int num_servers, double rho) {
  if (num_servers < 0) throw InvalidParameter("num_servers", "must be non-negative");
  if (!(rho >= 0.0) || !std::isfinite(rho)) {
    throw InvalidParameter("rho", "must be non-negative and finite");
  }
  double b = 1.0;
  for (int k = 1; k <= num_servers; ++k) {
    b = rho * b / (static_cast<double>(k) + rho * b);
  }
  return b;
}

const char* policy_name(PolicyKind kind) {
  switch (kind) {
    case PolicyKind::NoDeferral: return "no-deferral";
    case PolicyKind::FixedMax: return "fixed-max";
    case PolicyKind::UniformRandom: return "uniform-random";
    case PolicyKind::DSRT: return "dsrt";
    case PolicyKind::ESRT: return "esrt";
  }
  return "unknown";
}

PolicyKind policy_from_name(std::string_view name) {
  if (name == "no-deferral") return PolicyKind::NoDeferral;
  if (name == "fixed-max") return PolicyKind::FixedMax;
  if (name == "uniform-random") return PolicyKind::UniformRandom;
  if (name == "dsrt") return PolicyKind::DSRT;
  if (name == "esrt") return PolicyKind::ESRT;
  throw InvalidParameter("policy", "unknown policy '" + std::string(name) + "'");
}

}  // namespace deferq
