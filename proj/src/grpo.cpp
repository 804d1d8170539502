#include "dialscore/grpo.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

namespace dialscore {

void GrpoConfig::validate() const {
  if (group_size < 2) throw std::invalid_argument("group_size must be >= 2");
  if (!(clip_epsilon > 0.0 && clip_epsilon < 1.0)) {
    throw std::invalid_argument("clip_epsilon must be in (0,1)");
  }
  if (kl_beta < 0.0) throw std::invalid_argument("kl_beta must be >= 0");
  if (inner_epochs < 1) throw std::invalid_argument("inner_epochs must be >= 1");
}

std::vector<double> normalize_advantages(const std::vector<double>& rewards) {
  const std::size_t n = rewards.size();
  if (n < 2) throw std::invalid_argument("advantage normalization needs N >= 2");
  double mean = 0.0;
  for (double r : rewards) mean += r;
  mean /= static_cast<double>(n);
  double var = 0.0;
  for (double r : rewards) var += (r - mean) * (r - mean);
  var /= static_cast<double>(n);
  const double std = std::sqrt(var);
  std::vector<double> adv(n, 0.0);
  if (std < 1e-12) return adv;  // degenerate group: no preference direction
  for (std::size_t i = 0; i < n; ++i) adv[i] = (rewards[i] - mean) / std;
  return adv;
}

double kl_estimate(double logp_ref, double logp_cur) {
  const double log_rho = logp_ref - logp_cur;
  return std::exp(log_rho) - log_rho - 1.0;
}

double clipped_surrogate(double logp_cur, double logp_old, double advantage,
                         double epsilon) {
  const double r = std::exp(logp_cur - logp_old);
  const double clipped = std::clamp(r, 1.0 - epsilon, 1.0 + epsilon);
  return std::min(r * advantage, clipped * advantage);
}

GrpoResult grpo_objective(const PolicyParameters& current, const RolloutGroup& group,
                          const GrpoConfig& cfg) {
  cfg.validate();
  const std::size_t n = group.sequences.size();
  if (n < 2 || group.rewards.size() != n || group.advantages.size() != n ||
      group.logprobs_old.size() != n || group.logprobs_ref.size() != n) {
    throw std::runtime_error("grpo_objective: group not fully populated");
  }

  GrpoResult out;
  out.gradient = PolicyParameters::zeros();
  double kl_sum = 0.0;
  std::size_t token_count = 0;

  for (std::size_t i = 0; i < n; ++i) {
    const auto& tokens = group.sequences[i].tokens;
    const std::size_t len = tokens.size();
    if (group.logprobs_old[i].size() != len || group.logprobs_ref[i].size() != len) {
      throw std::runtime_error("grpo_objective: logprob length mismatch");
    }
    const auto lp_cur = sequence_logprobs(current, group.obs, tokens);
    const double adv = group.advantages[i];
    const double norm = 1.0 / (static_cast<double>(n) * static_cast<double>(len));

    std::vector<double> weights(len, 0.0);
    for (std::size_t t = 0; t < len; ++t) {
      const double lp_old = group.logprobs_old[i][t];
      const double lp_ref = group.logprobs_ref[i][t];
      const double r = std::exp(lp_cur[t] - lp_old);
      const double clipped = std::clamp(r, 1.0 - cfg.clip_epsilon, 1.0 + cfg.clip_epsilon);
      const double surr = std::min(r * adv, clipped * adv);
      const double rho = std::exp(lp_ref - lp_cur[t]);
      const double kl = rho - (lp_ref - lp_cur[t]) - 1.0;

      out.objective += norm * (surr - cfg.kl_beta * kl);
      kl_sum += kl;
      ++token_count;

      // d surr / d lp_cur: r*adv on the unclipped branch, 0 on the clipped one
      const double dsurr = (r * adv <= clipped * adv) ? r * adv : 0.0;
      // d(-beta*kl)/d lp_cur = beta * (rho - 1)
      weights[t] = norm * (dsurr + cfg.kl_beta * (rho - 1.0));
    }
    out.gradient += logprob_gradient(current, group.obs, tokens, weights);
  }
  out.mean_kl = token_count ? kl_sum / static_cast<double>(token_count) : 0.0;
  return out;
}

}  // namespace dialscore
