#pragma once

#include <Eigen/Core>
#include <cstdint>
#include <string>
#include <vector>

#include "dialscore/rng.hpp"

namespace dialscore {

inline constexpr int kHiddenSize = 32;   // H
inline constexpr int kObsDim = 24;       // D
inline constexpr int kMaxSeqLen = 12;    // L_max

// Feature encoding of one dialogue instance (question + candidate answer).
struct Observation {
  Eigen::VectorXd features;  // dimension kObsDim, last slot is the 1.0 bias
};

// All learnable tensors of the recurrent scorer policy. Also used as the
// gradient container since gradients share every shape.
struct PolicyParameters {
  Eigen::MatrixXd obs_proj;  // H x D
  Eigen::MatrixXd embed;     // V x H
  Eigen::MatrixXd rec_in;    // H x H
  Eigen::MatrixXd rec_hid;   // H x H
  Eigen::VectorXd rec_bias;  // H
  Eigen::MatrixXd out_head;  // V x H
  Eigen::VectorXd out_bias;  // V

  static PolicyParameters zeros();

  PolicyParameters& operator+=(const PolicyParameters& other);
  PolicyParameters& operator*=(double s);
  // Largest absolute coordinate difference across all tensors.
  double max_abs_diff(const PolicyParameters& other) const;
  bool all_finite() const;
};

using PolicyGradient = PolicyParameters;

struct SampledSequence {
  std::vector<int> tokens;       // length <= kMaxSeqLen, ends in EOS or truncated
  std::vector<double> logprobs;  // temperature-1 full-vocabulary logprobs
};

// Deterministic initialization; entries uniform with scale 1/sqrt(H).
PolicyParameters init_parameters(std::uint64_t seed);

// Autoregressive categorical sampling at the given temperature. PAD is masked
// out of the sampling distribution; recorded logprobs are temperature-1 over
// the full vocabulary.
SampledSequence sample_sequence(const PolicyParameters& params, const Observation& obs,
                                double temperature, RngStream& rng,
                                int max_len = kMaxSeqLen);

// Teacher-forced temperature-1 logprobs of `tokens` under `params`.
std::vector<double> sequence_logprobs(const PolicyParameters& params,
                                      const Observation& obs,
                                      const std::vector<int>& tokens);

// Exact gradient of sum_t weights[t] * log pi(tokens[t] | obs, tokens[<t])
// with respect to every parameter tensor (backpropagation through time).
PolicyGradient logprob_gradient(const PolicyParameters& params, const Observation& obs,
                                const std::vector<int>& tokens,
                                const std::vector<double>& weights);

// Deep copy; value semantics already guarantee isolation, kept as an explicit
// named operation for snapshotting old/reference policies.
PolicyParameters clone_frozen(const PolicyParameters& params);

// One cross-entropy descent step toward target_tokens; returns pre-step loss.
double sft_step(PolicyParameters& params, const Observation& obs,
                const std::vector<int>& target_tokens, double learning_rate);

// Greedy argmax decoding (PAD masked), used at evaluation time.
std::vector<int> greedy_decode(const PolicyParameters& params, const Observation& obs,
                               int max_len = kMaxSeqLen);

// Structured text checkpoint; round-trips bit-exactly.
void save_checkpoint(const PolicyParameters& params, std::uint64_t rng_state,
                     const std::string& path);
struct Checkpoint {
  PolicyParameters params;
  std::uint64_t rng_state = 0;
};
Checkpoint load_checkpoint(const std::string& path);

}  // namespace dialscore
