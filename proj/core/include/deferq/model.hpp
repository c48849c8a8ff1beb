#pragma once

#include <string>
#include <string_view>

#include "deferq/errors.hpp"

namespace deferq {

/// One instance of the loss system with deferrals: K identical servers,
/// Poisson(lambda) arrivals, Exp(mu) service, deferral times bounded by
/// t-hat and at most d-hat jobs deferred at any one time.
struct SystemParams {
  int num_servers = 1;              ///< K >= 1
  double arrival_rate = 1.0;        ///< lambda > 0, per unit time
  double service_rate = 1.0;        ///< mu > 0, per unit time
  double deferral_time_bound = 1.0; ///< T-hat > 0
  int deferral_count_bound = 0;     ///< D-hat >= 0
};

/// SystemParams that passed validation, plus the derived offered load.
/// The load is always derived from lambda and mu, never set directly.
class ValidatedParams {
 public:
  int num_servers() const { return p_.num_servers; }
  double arrival_rate() const { return p_.arrival_rate; }
  double service_rate() const { return p_.service_rate; }
  double deferral_time_bound() const { return p_.deferral_time_bound; }
  int deferral_count_bound() const { return p_.deferral_count_bound; }
  double offered_load() const { return rho_; }
  const SystemParams& raw() const { return p_; }

 private:
  friend ValidatedParams validate_params(const SystemParams& p);
  ValidatedParams(const SystemParams& p, double rho) : p_(p), rho_(rho) {}

  SystemParams p_;
  double rho_;
};

enum class PolicyKind { NoDeferral, FixedMax, UniformRandom, DSRT, ESRT };

/// A deferral policy plus its scalar parameter: the rearrival spacing x for
/// DSRT, the rearrival rate alpha for ESRT, unused for the rest.
struct PolicySpec {
  PolicyKind kind = PolicyKind::NoDeferral;
  double parameter = 0.0;

  static PolicySpec no_deferral() { return {PolicyKind::NoDeferral, 0.0}; }
  static PolicySpec fixed_max() { return {PolicyKind::FixedMax, 0.0}; }
  static PolicySpec uniform_random() { return {PolicyKind::UniformRandom, 0.0}; }
  static PolicySpec dsrt(double spacing) { return {PolicyKind::DSRT, spacing}; }
  static PolicySpec esrt(double rate) { return {PolicyKind::ESRT, rate}; }
};

/// Checks the domain of every field and derives rho = lambda / mu.
/// Throws InvalidParameter naming the offending field.
ValidatedParams validate_params(const SystemParams& p);

/// Checks the policy parameter against the instance: DSRT needs
/// 0 < x <= t-hat, ESRT needs 1/alpha <= t-hat. Throws InvalidParameter.
void validate_policy(const ValidatedParams& p, const PolicySpec& policy);

/// Effective cap D on concurrently deferred jobs for a policy:
/// min(d-hat, floor(t-hat / x)) for DSRT, min(d-hat, floor(t-hat * alpha))
/// for ESRT, d-hat otherwise. For DSRT the result additionally satisfies
/// D * x <= t-hat exactly. D = 0 means the policy degenerates to NoDeferral.
int effective_deferral_limit(const ValidatedParams& p, const PolicySpec& policy);

/// Erlang B blocking probability B(K, rho) via the stable recursion
/// B_0 = 1, B_k = rho B_{k-1} / (k + rho B_{k-1}). K = 0 yields 1.
double erlang_b_blocking(int num_servers, double rho);

const char* policy_name(PolicyKind kind);
PolicyKind policy_from_name(std::string_view name);

}  // namespace deferq
