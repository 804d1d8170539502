#pragma once

#include <string>
#include <vector>

#include "dialscore/policy.hpp"

namespace dialscore {

struct GrpoConfig {
  int group_size = 8;        // N
  double clip_epsilon = 0.2; // epsilon
  double kl_beta = 0.01;     // beta
  int inner_epochs = 1;      // mu

  void validate() const;
};

// One group of N rollouts for a single instance. rewards/advantages and the
// old/reference logprobs are treated as constants by the objective.
struct RolloutGroup {
  std::string instance_id;
  Observation obs;
  std::vector<SampledSequence> sequences;
  std::vector<double> rewards;
  std::vector<double> advantages;  // populated by normalize_advantages
  std::vector<std::vector<double>> logprobs_old;
  std::vector<std::vector<double>> logprobs_ref;
};

// Group standardization with population std; all-equal rewards give all-zero
// advantages rather than a denominator epsilon.
std::vector<double> normalize_advantages(const std::vector<double>& rewards);

// Per-token estimator rho - ln(rho) - 1 with rho = exp(logp_ref - logp_cur).
double kl_estimate(double logp_ref, double logp_cur);

// min(r*A, clip(r, 1-eps, 1+eps)*A) with r = exp(logp_cur - logp_old).
double clipped_surrogate(double logp_cur, double logp_old, double advantage,
                         double epsilon);

struct GrpoResult {
  double objective = 0.0;
  PolicyGradient gradient;
  double mean_kl = 0.0;  // token-averaged KL estimate
};

// Full objective and its exact gradient with respect to `current`. Current
// logprobs are recomputed from `current` inside; the clip nondifferentiability
// uses the standard subgradient (zero on the clipped constant branch).
GrpoResult grpo_objective(const PolicyParameters& current, const RolloutGroup& group,
                          const GrpoConfig& cfg);

}  // namespace dialscore
