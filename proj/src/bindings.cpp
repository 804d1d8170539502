#include <pybind11/eigen.h>
#include <pybind11/functional.h>
#include <pybind11/pybind11.h>
#include <pybind11/stl.h>

#include "dialscore/datagen.hpp"
#include "dialscore/eval.hpp"
#include "dialscore/grpo.hpp"
#include "dialscore/policy.hpp"
#include "dialscore/reward.hpp"
#include "dialscore/trainer.hpp"
#include "dialscore/vocab.hpp"

namespace py = pybind11;
using namespace dialscore;

PYBIND11_MODULE(_core, m) {
  m.doc() = "dialscore: desk-scale dialogue-scoring RL laboratory";

  // ---- rewards
  py::class_<RewardConfig>(m, "RewardConfig")
      .def(py::init<>())
      .def_readwrite("sigma", &RewardConfig::sigma)
      .def_readwrite("scale", &RewardConfig::scale)
      .def_readwrite("cutoff", &RewardConfig::cutoff)
      .def_readwrite("format_value", &RewardConfig::format_value)
      .def_readwrite("cot_enabled", &RewardConfig::cot_enabled)
      .def_readwrite("nonlinear_enabled", &RewardConfig::nonlinear_enabled);

  py::class_<RewardBreakdown>(m, "RewardBreakdown")
      .def_readonly("accuracy", &RewardBreakdown::accuracy)
      .def_readonly("format", &RewardBreakdown::format)
      .def_readonly("total", &RewardBreakdown::total)
      .def_readonly("parsed_score", &RewardBreakdown::parsed_score);

  m.def("accuracy_reward", &accuracy_reward, py::arg("predicted"), py::arg("ground_truth"),
        py::arg("cfg") = RewardConfig{});
  m.def("linear_reward", &linear_reward);
  m.def(
      "format_reward",
      [](const std::vector<int>& tokens, const RewardConfig& cfg) {
        return format_reward(tokens, cfg);
      },
      py::arg("tokens"), py::arg("cfg") = RewardConfig{});
  m.def(
      "parse_score",
      [](const std::vector<int>& tokens, const RewardConfig& cfg) {
        return parse_score(tokens, cfg);
      },
      py::arg("tokens"), py::arg("cfg") = RewardConfig{});
  m.def(
      "total_reward",
      [](const std::vector<int>& tokens, int g, const RewardConfig& cfg) {
        return total_reward(tokens, g, cfg);
      },
      py::arg("tokens"), py::arg("ground_truth"), py::arg("cfg") = RewardConfig{});

  // ---- grpo math
  m.def("normalize_advantages", &normalize_advantages);
  m.def("kl_estimate", &kl_estimate, py::arg("logp_ref"), py::arg("logp_cur"));
  m.def("clipped_surrogate", &clipped_surrogate, py::arg("logp_cur"), py::arg("logp_old"),
        py::arg("advantage"), py::arg("epsilon"));

  // ---- policy
  py::class_<Observation>(m, "Observation")
      .def(py::init<>())
      .def_readwrite("features", &Observation::features);
  py::class_<PolicyParameters>(m, "PolicyParameters")
      .def_readwrite("obs_proj", &PolicyParameters::obs_proj)
      .def_readwrite("embed", &PolicyParameters::embed)
      .def_readwrite("rec_in", &PolicyParameters::rec_in)
      .def_readwrite("rec_hid", &PolicyParameters::rec_hid)
      .def_readwrite("rec_bias", &PolicyParameters::rec_bias)
      .def_readwrite("out_head", &PolicyParameters::out_head)
      .def_readwrite("out_bias", &PolicyParameters::out_bias);
  py::class_<SampledSequence>(m, "SampledSequence")
      .def_readonly("tokens", &SampledSequence::tokens)
      .def_readonly("logprobs", &SampledSequence::logprobs);

  m.def("init_parameters", &init_parameters, py::arg("seed"));
  m.def(
      "sample_sequence",
      [](const PolicyParameters& p, const Observation& o, double temperature,
         std::uint64_t seed, int max_len) {
        RngStream rng(seed);
        return sample_sequence(p, o, temperature, rng, max_len);
      },
      py::arg("params"), py::arg("obs"), py::arg("temperature"), py::arg("seed"),
      py::arg("max_len") = kMaxSeqLen);
  m.def("sequence_logprobs", &sequence_logprobs);
  m.def("greedy_decode", &greedy_decode, py::arg("params"), py::arg("obs"),
        py::arg("max_len") = kMaxSeqLen);
  m.def("save_checkpoint", &save_checkpoint, py::arg("params"), py::arg("rng_state"),
        py::arg("path"));
  m.def("load_checkpoint",
        [](const std::string& path) { return load_checkpoint(path).params; });

  // ---- dataset
  py::enum_<Scenario>(m, "Scenario")
      .value("content", Scenario::Content)
      .value("understanding", Scenario::Understanding)
      .value("generation", Scenario::Generation)
      .value("implicit", Scenario::Implicit);

  py::class_<DialogueInstance>(m, "DialogueInstance")
      .def_readonly("id", &DialogueInstance::id)
      .def_readonly("question_id", &DialogueInstance::question_id)
      .def_readonly("scenario", &DialogueInstance::scenario)
      .def_readonly("attribute_family", &DialogueInstance::attribute_family)
      .def_readonly("attribute_value", &DialogueInstance::attribute_value)
      .def_readonly("level", &DialogueInstance::level)
      .def_readonly("content_match", &DialogueInstance::content_match)
      .def_readonly("acoustic_match", &DialogueInstance::acoustic_match)
      .def_readonly("gt_score", &DialogueInstance::gt_score)
      .def_readonly("confidence", &DialogueInstance::confidence);

  m.def(
      "generate_dataset",
      [](int total, std::uint64_t seed) {
        return generate_dataset(total, seed, AttributeCatalog::standard()).instances;
      },
      py::arg("total"), py::arg("seed"));
  m.def("read_jsonl", &read_jsonl);
  m.def("write_jsonl", &write_jsonl);
  m.def("encode_observation", &encode_observation);
  m.def("target_tokens", &target_tokens, py::arg("instance"), py::arg("cot_enabled") = true);

  // ---- training and evaluation
  py::enum_<TrainMode>(m, "TrainMode").value("rl", TrainMode::Rl).value("sft", TrainMode::Sft);
  py::class_<GrpoConfig>(m, "GrpoConfig")
      .def(py::init<>())
      .def_readwrite("group_size", &GrpoConfig::group_size)
      .def_readwrite("clip_epsilon", &GrpoConfig::clip_epsilon)
      .def_readwrite("kl_beta", &GrpoConfig::kl_beta)
      .def_readwrite("inner_epochs", &GrpoConfig::inner_epochs);
  py::class_<TrainConfig>(m, "TrainConfig")
      .def(py::init<>())
      .def_readwrite("mode", &TrainConfig::mode)
      .def_readwrite("steps", &TrainConfig::steps)
      .def_readwrite("learning_rate", &TrainConfig::learning_rate)
      .def_readwrite("batch_questions", &TrainConfig::batch_questions)
      .def_readwrite("grpo", &TrainConfig::grpo)
      .def_readwrite("reward", &TrainConfig::reward)
      .def_readwrite("multi_sample", &TrainConfig::multi_sample)
      .def_readwrite("seed", &TrainConfig::seed)
      .def_readwrite("checkpoint_every", &TrainConfig::checkpoint_every)
      .def_readwrite("sft_warmup_steps", &TrainConfig::sft_warmup_steps);
  py::class_<StepMetrics>(m, "StepMetrics")
      .def_readonly("step", &StepMetrics::step)
      .def_readonly("objective", &StepMetrics::objective)
      .def_readonly("mean_reward", &StepMetrics::mean_reward)
      .def_readonly("format_rate", &StepMetrics::format_rate)
      .def_readonly("mean_kl", &StepMetrics::mean_kl);
  py::class_<TrainResult>(m, "TrainResult")
      .def_readonly("params", &TrainResult::params)
      .def_readonly("params_ref", &TrainResult::params_ref)
      .def_readonly("metrics", &TrainResult::metrics)
      .def_readonly("aborted", &TrainResult::aborted);

  m.def(
      "train",
      [](const TrainConfig& cfg, const std::vector<DialogueInstance>& instances) {
        return train(cfg, instances);
      },
      py::arg("config"), py::arg("train_instances"));

  m.def(
      "score_instance",
      [](const PolicyParameters& p, const DialogueInstance& inst, const RewardConfig& cfg) {
        return score_instance(p, inst, cfg);
      },
      py::arg("params"), py::arg("instance"), py::arg("cfg") = RewardConfig{});
  m.def(
      "accuracy",
      [](const PolicyParameters& p, const std::vector<DialogueInstance>& instances,
         const RewardConfig& cfg) {
        return accuracy_report(p, instances, cfg).overall.accuracy();
      },
      py::arg("params"), py::arg("instances"), py::arg("cfg") = RewardConfig{});

  py::class_<GradCheckReport>(m, "GradCheckReport")
      .def_readonly("policy_max_rel_err", &GradCheckReport::policy_max_rel_err)
      .def_readonly("grpo_max_rel_err", &GradCheckReport::grpo_max_rel_err)
      .def_readonly("passed", &GradCheckReport::pass)
      .def_readonly("text", &GradCheckReport::text);
  m.def("gradcheck", &gradcheck, py::arg("seed"), py::arg("corrupt_gradient") = false);

  // token constants
  py::module_ tok = m.def_submodule("tokens");
  tok.attr("THINK_OPEN") = static_cast<int>(vocab::THINK_OPEN);
  tok.attr("THINK_CLOSE") = static_cast<int>(vocab::THINK_CLOSE);
  tok.attr("EOS") = static_cast<int>(vocab::EOS);
  tok.attr("PAD") = static_cast<int>(vocab::PAD);
  tok.attr("THOUGHT_0") = static_cast<int>(vocab::THOUGHT_0);
  tok.attr("VOCAB_SIZE") = vocab::kSize;
  tok.def("score_token", &vocab::score_token);
}
