#pragma once

#include <array>
#include <string>

namespace dialscore::vocab {

// Fixed token space of the scorer policy. Indices are stable and contiguous.
enum Token : int {
  THINK_OPEN = 0,
  THINK_CLOSE = 1,
  SCORE_1 = 2,
  SCORE_2 = 3,
  SCORE_3 = 4,
  SCORE_4 = 5,
  SCORE_5 = 6,
  EOS = 7,
  PAD = 8,
  THOUGHT_0 = 9,  // THOUGHT_0..THOUGHT_15 occupy 9..24
};

inline constexpr int kSize = 25;
inline constexpr int kNumThoughts = 16;

inline constexpr bool is_score(int t) { return t >= SCORE_1 && t <= SCORE_5; }
inline constexpr bool is_thought(int t) { return t >= THOUGHT_0 && t < THOUGHT_0 + kNumThoughts; }

// SCORE_k token for k in 1..5
inline constexpr int score_token(int k) { return SCORE_1 + (k - 1); }
// k in 1..5 for a SCORE_k token
inline constexpr int score_value(int t) { return t - SCORE_1 + 1; }

inline std::string token_name(int t) {
  if (t == THINK_OPEN) return "THINK_OPEN";
  if (t == THINK_CLOSE) return "THINK_CLOSE";
  if (is_score(t)) return "SCORE_" + std::to_string(score_value(t));
  if (t == EOS) return "EOS";
  if (t == PAD) return "PAD";
  if (is_thought(t)) return "THOUGHT_" + std::to_string(t - THOUGHT_0);
  return "UNKNOWN_" + std::to_string(t);
}

}  // namespace dialscore::vocab
