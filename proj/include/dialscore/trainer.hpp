#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "dialscore/datagen.hpp"
#include "dialscore/grpo.hpp"
#include "dialscore/policy.hpp"
#include "dialscore/reward.hpp"

namespace dialscore {

enum class TrainMode : int { Rl = 0, Sft = 1 };

struct TrainConfig {
  TrainMode mode = TrainMode::Rl;
  int steps = 3500;
  double learning_rate = 0.01;
  int batch_questions = 8;
  GrpoConfig grpo;
  RewardConfig reward;
  bool multi_sample = true;  // false: one random answer level per question
  std::uint64_t seed = 0;
  int checkpoint_every = 500;
  // Supervised warm start before RL; the reference policy snapshots whatever
  // initializes the RL phase. Random-init sequences almost never satisfy the
  // score grammar, so RL needs a format-capable starting point, mirroring a
  // pretrained base model.
  int sft_warmup_steps = 300;

  void validate() const;
};

struct StepMetrics {
  int step = 0;
  double objective = 0.0;
  double mean_reward = 0.0;
  double format_rate = 0.0;
  double mean_kl = 0.0;
  double wall_ms = 0.0;
};

struct TrainResult {
  PolicyParameters params;
  PolicyParameters params_ref;
  std::vector<StepMetrics> metrics;
  bool aborted = false;      // non-finite objective or parameters
  int abort_step = -1;
  std::uint64_t final_rng_state = 0;
};

using CheckpointHook = std::function<void(int step, const PolicyParameters&)>;

TrainResult train(const TrainConfig& config,
                  const std::vector<DialogueInstance>& train_instances,
                  const CheckpointHook& on_checkpoint = nullptr);

void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::string& path);

struct GradCheckReport {
  double policy_max_rel_err = 0.0;
  double grpo_max_rel_err = 0.0;
  bool pass = false;
  std::string text;
};

// Central finite-difference audit of the analytic gradients at step 1e-5;
// passes when every coordinate's relative error stays below 1e-4.
// corrupt_gradient is a test fixture that negates one gradient tensor.
GradCheckReport gradcheck(std::uint64_t seed, bool corrupt_gradient = false);

}  // namespace dialscore
