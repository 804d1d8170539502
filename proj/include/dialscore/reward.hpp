#pragma once

#include <optional>
#include <span>
#include <vector>

namespace dialscore {

struct RewardConfig {
  double sigma = 1.0;         // width of the Gaussian accuracy reward
  double scale = 10.0;        // peak accuracy reward at exact match
  double cutoff = 4.0;        // |p - g| beyond this yields zero
  double format_value = 5.0;  // reward for a grammar-conforming sequence
  bool cot_enabled = true;    // require the think block before the score
  bool nonlinear_enabled = true;  // false: linear 0/5 exact-match reward

  void validate() const;  // throws std::invalid_argument on bad fields
};

struct RewardBreakdown {
  double accuracy = 0.0;
  double format = 0.0;
  double total = 0.0;
  std::optional<int> parsed_score;  // 1..5 when the sequence parses
};

// Gaussian-shaped reward in the score error, hard zero past the cutoff.
double accuracy_reward(int predicted, int ground_truth, const RewardConfig& cfg);

// Exact-match 0/5 reward (ablation variant).
double linear_reward(int predicted, int ground_truth);

// format_value iff tokens match the active grammar exactly, else 0.
// cot grammar:     THINK_OPEN THOUGHT* THINK_CLOSE SCORE_k EOS
// non-cot grammar: SCORE_k EOS
double format_reward(std::span<const int> tokens, const RewardConfig& cfg);

// Score k iff the sequence satisfies the active grammar; absent otherwise.
std::optional<int> parse_score(std::span<const int> tokens, const RewardConfig& cfg);

RewardBreakdown total_reward(std::span<const int> tokens, int ground_truth,
                             const RewardConfig& cfg);

}  // namespace dialscore
