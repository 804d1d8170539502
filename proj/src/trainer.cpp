#include "dialscore/trainer.hpp"

#include <algorithm>
#include <charconv>
#include <chrono>
#include <cmath>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <unordered_map>

#include "dialscore/vocab.hpp"

namespace dialscore {

namespace {

using Clock = std::chrono::steady_clock;

double ms_since(Clock::time_point t0) {
  return std::chrono::duration<double, std::milli>(Clock::now() - t0).count();
}

std::vector<std::vector<std::size_t>> group_by_question(
    const std::vector<DialogueInstance>& instances) {
  std::vector<std::vector<std::size_t>> groups;
  std::unordered_map<std::string, std::size_t> index;
  for (std::size_t i = 0; i < instances.size(); ++i) {
    auto [it, inserted] = index.try_emplace(instances[i].question_id, groups.size());
    if (inserted) groups.emplace_back();
    groups[it->second].push_back(i);
  }
  return groups;
}

std::vector<std::size_t> draw_batch(RngStream& rng, std::size_t population, int want) {
  std::vector<std::size_t> out;
  if (static_cast<std::size_t>(want) >= population) {
    out.resize(population);
    for (std::size_t i = 0; i < population; ++i) out[i] = i;
    return out;
  }
  while (out.size() < static_cast<std::size_t>(want)) {
    const std::size_t q = rng.uniform_int(population);
    if (std::find(out.begin(), out.end(), q) == out.end()) out.push_back(q);
  }
  return out;
}

struct SftStepResult {
  double mean_loss = 0.0;
  double mean_reward = 0.0;
  double format_rate = 0.0;
};

SftStepResult run_sft_step(PolicyParameters& params, const TrainConfig& cfg,
                           const std::vector<DialogueInstance>& instances,
                           const std::vector<std::size_t>& batch) {
  SftStepResult res;
  for (std::size_t idx : batch) {
    const auto& inst = instances[idx];
    const Observation obs = encode_observation(inst);
    res.mean_loss +=
        sft_step(params, obs, target_tokens(inst, cfg.reward.cot_enabled), cfg.learning_rate);
  }
  res.mean_loss /= static_cast<double>(batch.size());
  // post-update greedy metrics on the same batch
  for (std::size_t idx : batch) {
    const auto& inst = instances[idx];
    const auto tokens = greedy_decode(params, encode_observation(inst));
    const auto rb = total_reward(tokens, inst.gt_score, cfg.reward);
    res.mean_reward += rb.total;
    if (rb.format > 0.0) res.format_rate += 1.0;
  }
  res.mean_reward /= static_cast<double>(batch.size());
  res.format_rate /= static_cast<double>(batch.size());
  return res;
}

}  // namespace

void TrainConfig::validate() const {
  if (steps < 1) throw std::invalid_argument("steps must be >= 1");
  if (learning_rate < 0.0) throw std::invalid_argument("learning_rate must be >= 0");
  if (batch_questions < 1) throw std::invalid_argument("batch_questions must be >= 1");
  if (checkpoint_every < 1) throw std::invalid_argument("checkpoint_every must be >= 1");
  if (sft_warmup_steps < 0) throw std::invalid_argument("sft_warmup_steps must be >= 0");
  grpo.validate();
  reward.validate();
}

TrainResult train(const TrainConfig& config,
                  const std::vector<DialogueInstance>& train_instances,
                  const CheckpointHook& on_checkpoint) {
  config.validate();
  if (train_instances.empty()) throw std::invalid_argument("training set is empty");

  const auto questions = group_by_question(train_instances);
  const RngStream root(config.seed);

  TrainResult result;
  result.params = init_parameters(config.seed);

  // supervised warm start (RL mode only); the reference policy snapshots
  // whatever initializes the RL phase
  if (config.mode == TrainMode::Rl) {
    for (int w = 0; w < config.sft_warmup_steps; ++w) {
      RngStream wrng = root.child(0xF0000000ULL + static_cast<std::uint64_t>(w));
      std::vector<std::size_t> batch;
      for (std::size_t q : draw_batch(wrng, questions.size(), config.batch_questions)) {
        for (std::size_t idx : questions[q]) batch.push_back(idx);
      }
      run_sft_step(result.params, config, train_instances, batch);
    }
  }
  result.params_ref = clone_frozen(result.params);
  PolicyParameters params_old = clone_frozen(result.params);

  for (int step = 0; step < config.steps; ++step) {
    const auto t0 = Clock::now();
    RngStream srng = root.child(static_cast<std::uint64_t>(step));
    RngStream select_rng = srng.child(0);
    RngStream sample_rng = srng.child(1);

    StepMetrics m;
    m.step = step;

    const auto batch_questions = draw_batch(select_rng, questions.size(), config.batch_questions);
    std::vector<std::size_t> batch;
    for (std::size_t q : batch_questions) {
      if (config.multi_sample) {
        for (std::size_t idx : questions[q]) batch.push_back(idx);
      } else {
        batch.push_back(questions[q][select_rng.uniform_int(questions[q].size())]);
      }
    }

    if (config.mode == TrainMode::Sft) {
      const auto res = run_sft_step(result.params, config, train_instances, batch);
      m.objective = -res.mean_loss;
      m.mean_reward = res.mean_reward;
      m.format_rate = res.format_rate;
    } else {
      params_old = clone_frozen(result.params);  // old-policy refresh

      std::vector<RolloutGroup> groups;
      groups.reserve(batch.size());
      int seq_count = 0;
      int format_count = 0;
      for (std::size_t idx : batch) {
        const auto& inst = train_instances[idx];
        RolloutGroup g;
        g.instance_id = inst.id;
        g.obs = encode_observation(inst);
        for (int k = 0; k < config.grpo.group_size; ++k) {
          auto seq = sample_sequence(params_old, g.obs, 1.0, sample_rng);
          const auto rb = total_reward(seq.tokens, inst.gt_score, config.reward);
          g.rewards.push_back(rb.total);
          m.mean_reward += rb.total;
          if (rb.format > 0.0) ++format_count;
          ++seq_count;
          g.logprobs_old.push_back(seq.logprobs);
          g.logprobs_ref.push_back(sequence_logprobs(result.params_ref, g.obs, seq.tokens));
          g.sequences.push_back(std::move(seq));
        }
        g.advantages = normalize_advantages(g.rewards);
        groups.push_back(std::move(g));
      }
      m.mean_reward /= static_cast<double>(seq_count);
      m.format_rate = static_cast<double>(format_count) / seq_count;

      for (int epoch = 0; epoch < config.grpo.inner_epochs; ++epoch) {
        PolicyGradient grad = PolicyParameters::zeros();
        double obj = 0.0;
        double kl = 0.0;
        for (const auto& g : groups) {
          auto res = grpo_objective(result.params, g, config.grpo);
          grad += res.gradient;
          obj += res.objective;
          kl += res.mean_kl;
        }
        const double inv = 1.0 / static_cast<double>(groups.size());
        obj *= inv;
        kl *= inv;
        if (epoch == 0) {
          m.objective = obj;
          m.mean_kl = kl;
        }
        grad *= config.learning_rate * inv;
        result.params += grad;  // gradient ascent
      }
    }

    m.wall_ms = ms_since(t0);
    result.metrics.push_back(m);

    if (!std::isfinite(m.objective) || !result.params.all_finite()) {
      result.aborted = true;
      result.abort_step = step;
      break;
    }
    if (on_checkpoint && (step + 1) % config.checkpoint_every == 0) {
      on_checkpoint(step + 1, result.params);
    }
  }

  result.final_rng_state = root.child(static_cast<std::uint64_t>(config.steps)).state();
  return result;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

}  // namespace

void write_metrics_csv(const std::vector<StepMetrics>& metrics, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << "step,objective,mean_reward,format_rate,mean_kl,wall_ms\n";
  for (const auto& m : metrics) {
    os << m.step << ',' << fmt(m.objective) << ',' << fmt(m.mean_reward) << ','
       << fmt(m.format_rate) << ',' << fmt(m.mean_kl) << ',' << fmt(m.wall_ms) << '\n';
  }
}

namespace {

// flat views over the parameter tensors, in a fixed order
std::vector<std::pair<double*, std::size_t>> tensor_views(PolicyParameters& p) {
  return {
      {p.obs_proj.data(), static_cast<std::size_t>(p.obs_proj.size())},
      {p.embed.data(), static_cast<std::size_t>(p.embed.size())},
      {p.rec_in.data(), static_cast<std::size_t>(p.rec_in.size())},
      {p.rec_hid.data(), static_cast<std::size_t>(p.rec_hid.size())},
      {p.rec_bias.data(), static_cast<std::size_t>(p.rec_bias.size())},
      {p.out_head.data(), static_cast<std::size_t>(p.out_head.size())},
      {p.out_bias.data(), static_cast<std::size_t>(p.out_bias.size())},
  };
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({std::abs(a), std::abs(b), 1e-6});
}

// max per-coordinate relative error between analytic gradient and central
// finite differences of `objective`
double fd_compare(PolicyParameters& params, const PolicyGradient& analytic,
                  const std::function<double()>& objective, double h) {
  PolicyGradient analytic_copy = analytic;
  auto pviews = tensor_views(params);
  auto gviews = tensor_views(analytic_copy);
  double worst = 0.0;
  for (std::size_t t = 0; t < pviews.size(); ++t) {
    auto [pdata, n] = pviews[t];
    auto [gdata, gn] = gviews[t];
    for (std::size_t i = 0; i < n; ++i) {
      const double saved = pdata[i];
      pdata[i] = saved + h;
      const double fp = objective();
      pdata[i] = saved - h;
      const double fm = objective();
      pdata[i] = saved;
      worst = std::max(worst, rel_err(gdata[i], (fp - fm) / (2.0 * h)));
    }
    (void)gn;
  }
  return worst;
}

Observation random_observation(RngStream& rng) {
  Observation obs;
  obs.features = Eigen::VectorXd::Zero(kObsDim);
  obs.features(0) = static_cast<double>(rng.uniform_int(2));
  obs.features(1) = static_cast<double>(rng.uniform_int(2));
  obs.features(2 + rng.uniform_int(4)) = 1.0;
  if (rng.uniform() < 0.8) obs.features(6 + rng.uniform_int(kNumFamilies)) = 1.0;
  for (int i = 0; i < kNuisanceDim; ++i) obs.features(15 + i) = rng.uniform(-1.0, 1.0);
  obs.features(23) = 1.0;
  return obs;
}

}  // namespace

GradCheckReport gradcheck(std::uint64_t seed, bool corrupt_gradient) {
  constexpr double kStep = 1e-5;
  constexpr double kTol = 1e-4;
  constexpr int kInstances = 20;
  GradCheckReport report;
  RngStream rng = RngStream(seed).child(0x6AD);

  for (int i = 0; i < kInstances; ++i) {
    PolicyParameters params = init_parameters(seed * 31 + i + 1);
    Observation obs = random_observation(rng);
    const int len = 1 + static_cast<int>(rng.uniform_int(8));
    std::vector<int> tokens(len);
    std::vector<double> weights(len);
    for (int t = 0; t < len; ++t) {
      tokens[t] = static_cast<int>(rng.uniform_int(vocab::kSize));
      weights[t] = rng.uniform(-1.0, 1.0);
    }
    PolicyGradient g = logprob_gradient(params, obs, tokens, weights);
    if (corrupt_gradient) g.rec_bias = -g.rec_bias;
    auto objective = [&]() {
      double v = 0.0;
      const auto lps = sequence_logprobs(params, obs, tokens);
      for (int t = 0; t < len; ++t) v += weights[t] * lps[t];
      return v;
    };
    report.policy_max_rel_err =
        std::max(report.policy_max_rel_err, fd_compare(params, g, objective, kStep));
  }

  GrpoConfig cfg;
  cfg.group_size = 4;
  cfg.clip_epsilon = 0.2;
  cfg.kl_beta = 0.5;
  for (int i = 0; i < kInstances; ++i) {
    PolicyParameters params = init_parameters(seed * 57 + i + 101);
    PolicyParameters old_params = params;
    PolicyParameters ref_params = params;
    auto perturb = [&](PolicyParameters& p, std::uint64_t salt) {
      RngStream prng = rng.child(salt);
      for (auto [data, n] : tensor_views(p)) {
        for (std::size_t k = 0; k < n; ++k) data[k] += 0.01 * prng.normal();
      }
    };
    perturb(old_params, 1000 + i);
    perturb(ref_params, 2000 + i);

    RolloutGroup group;
    group.instance_id = "gradcheck";
    group.obs = random_observation(rng);
    for (int k = 0; k < cfg.group_size; ++k) {
      auto seq = sample_sequence(old_params, group.obs, 1.0, rng, 5);
      group.rewards.push_back(rng.uniform(0.0, 15.0));
      group.logprobs_old.push_back(seq.logprobs);
      group.logprobs_ref.push_back(sequence_logprobs(ref_params, group.obs, seq.tokens));
      group.sequences.push_back(std::move(seq));
    }
    group.advantages = normalize_advantages(group.rewards);

    auto res = grpo_objective(params, group, cfg);
    // objective-only evaluation keeps the finite-difference sweep cheap
    auto objective = [&]() {
      double obj = 0.0;
      for (std::size_t s = 0; s < group.sequences.size(); ++s) {
        const auto& tokens = group.sequences[s].tokens;
        const auto lp_cur = sequence_logprobs(params, group.obs, tokens);
        const double norm =
            1.0 / (static_cast<double>(group.sequences.size()) * tokens.size());
        for (std::size_t t = 0; t < tokens.size(); ++t) {
          obj += norm * (clipped_surrogate(lp_cur[t], group.logprobs_old[s][t],
                                           group.advantages[s], cfg.clip_epsilon) -
                         cfg.kl_beta * kl_estimate(group.logprobs_ref[s][t], lp_cur[t]));
        }
      }
      return obj;
    };
    report.grpo_max_rel_err =
        std::max(report.grpo_max_rel_err, fd_compare(params, res.gradient, objective, kStep));
  }

  report.pass = report.policy_max_rel_err < kTol && report.grpo_max_rel_err < kTol;
  std::ostringstream os;
  os << "policy logprob gradient: max relative error " << report.policy_max_rel_err
     << (report.policy_max_rel_err < kTol ? " (ok)" : " (FAIL)") << '\n';
  os << "grpo objective gradient: max relative error " << report.grpo_max_rel_err
     << (report.grpo_max_rel_err < kTol ? " (ok)" : " (FAIL)") << '\n';
  os << "gradcheck: " << (report.pass ? "PASS" : "FAIL") << '\n';
  report.text = os.str();
  return report;
}

}  // namespace dialscore
