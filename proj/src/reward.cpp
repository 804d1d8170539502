#include "dialscore/reward.hpp"

#include <cmath>
#include <cstdlib>
#include <stdexcept>

#include "dialscore/vocab.hpp"

namespace dialscore {

namespace {

void check_ground_truth(int g) {
  if (g < 1 || g > 5) {
    throw std::invalid_argument("ground-truth score must be in 1..5, got " +
                                std::to_string(g));
  }
}

// Returns the score token position's value when the token sequence matches
// the active grammar exactly, absent otherwise.
std::optional<int> match_grammar(std::span<const int> tokens, bool cot) {
  std::size_t i = 0;
  const std::size_t n = tokens.size();
  if (cot) {
    if (i >= n || tokens[i] != vocab::THINK_OPEN) return std::nullopt;
    ++i;
    while (i < n && vocab::is_thought(tokens[i])) ++i;
    if (i >= n || tokens[i] != vocab::THINK_CLOSE) return std::nullopt;
    ++i;
  }
  if (i >= n || !vocab::is_score(tokens[i])) return std::nullopt;
  const int score = vocab::score_value(tokens[i]);
  ++i;
  if (i >= n || tokens[i] != vocab::EOS) return std::nullopt;
  ++i;
  if (i != n) return std::nullopt;  // trailing tokens break the grammar
  return score;
}

}  // namespace

void RewardConfig::validate() const {
  if (!(sigma > 0.0)) throw std::invalid_argument("sigma must be > 0");
  if (!(scale > 0.0)) throw std::invalid_argument("scale must be > 0");
  if (!(cutoff > 0.0)) throw std::invalid_argument("cutoff must be > 0");
}

double accuracy_reward(int predicted, int ground_truth, const RewardConfig& cfg) {
  check_ground_truth(ground_truth);
  const double diff = static_cast<double>(predicted) - ground_truth;
  if (std::abs(diff) > cfg.cutoff) return 0.0;
  return cfg.scale * std::exp(-(diff * diff) / (2.0 * cfg.sigma * cfg.sigma));
}

double linear_reward(int predicted, int ground_truth) {
  check_ground_truth(ground_truth);
  return predicted == ground_truth ? 5.0 : 0.0;
}

double format_reward(std::span<const int> tokens, const RewardConfig& cfg) {
  return match_grammar(tokens, cfg.cot_enabled) ? cfg.format_value : 0.0;
}

std::optional<int> parse_score(std::span<const int> tokens, const RewardConfig& cfg) {
  return match_grammar(tokens, cfg.cot_enabled);
}

RewardBreakdown total_reward(std::span<const int> tokens, int ground_truth,
                             const RewardConfig& cfg) {
  check_ground_truth(ground_truth);
  RewardBreakdown out;
  out.format = format_reward(tokens, cfg);
  out.parsed_score = parse_score(tokens, cfg);
  if (out.parsed_score) {
    out.accuracy = cfg.nonlinear_enabled
                       ? accuracy_reward(*out.parsed_score, ground_truth, cfg)
                       : linear_reward(*out.parsed_score, ground_truth);
  }
  out.total = out.accuracy + out.format;
  return out;
}

}  // namespace dialscore
