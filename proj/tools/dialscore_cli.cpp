// dialscore: desk-scale lab for training and auditing dialogue scorer
// policies on synthetic scored-dialogue data.
//
// Exit codes: 0 ok, 1 check failure, 2 validation error, 3 I/O error,
// 4 numeric abort (diagnostic checkpoint written).

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>
#include <string>

#include <CLI11.hpp>
#include <json.hpp>

#include "dialscore/datagen.hpp"
#include "dialscore/eval.hpp"
#include "dialscore/trainer.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace dialscore;

namespace {

constexpr const char* kToolVersion = "dialscore 1.0.0";

constexpr int kExitOk = 0;
constexpr int kExitCheckFailed = 1;
constexpr int kExitValidation = 2;
constexpr int kExitIo = 3;
constexpr int kExitNumeric = 4;

struct CliError {
  int code;
  std::string message;
};

[[noreturn]] void fail(int code, const std::string& message) {
  throw CliError{code, message};
}

json load_config_file(const std::string& path) {
  if (path.empty()) return json::object();
  std::ifstream is(path);
  if (!is) fail(kExitValidation, "cannot open config file: " + path);
  try {
    return json::parse(is);
  } catch (const std::exception& e) {
    fail(kExitValidation, std::string("config parse error: ") + e.what());
  }
}

void reject_unknown_keys(const json& j, const std::set<std::string>& allowed,
                         const std::string& section) {
  if (!j.is_object()) fail(kExitValidation, "config section '" + section + "' must be an object");
  for (const auto& [key, value] : j.items()) {
    if (!allowed.count(key)) {
      fail(kExitValidation, "unknown config key '" + section + key + "'");
    }
    (void)value;
  }
}

template <typename T>
void read_key(const json& j, const char* key, T& out) {
  if (j.contains(key)) {
    try {
      out = j.at(key).get<T>();
    } catch (const std::exception&) {
      fail(kExitValidation, std::string("config key '") + key + "' has the wrong type");
    }
  }
}

RewardConfig parse_reward_config(const json& j) {
  RewardConfig cfg;
  reject_unknown_keys(j, {"sigma", "scale", "cutoff", "format_value", "cot_enabled",
                          "nonlinear_enabled"},
                      "reward.");
  read_key(j, "sigma", cfg.sigma);
  read_key(j, "scale", cfg.scale);
  read_key(j, "cutoff", cfg.cutoff);
  read_key(j, "format_value", cfg.format_value);
  read_key(j, "cot_enabled", cfg.cot_enabled);
  read_key(j, "nonlinear_enabled", cfg.nonlinear_enabled);
  return cfg;
}

GrpoConfig parse_grpo_config(const json& j) {
  GrpoConfig cfg;
  reject_unknown_keys(j, {"group_size", "clip_epsilon", "kl_beta", "inner_epochs"}, "grpo.");
  read_key(j, "group_size", cfg.group_size);
  read_key(j, "clip_epsilon", cfg.clip_epsilon);
  read_key(j, "kl_beta", cfg.kl_beta);
  read_key(j, "inner_epochs", cfg.inner_epochs);
  return cfg;
}

TrainConfig parse_train_config(const json& j) {
  TrainConfig cfg;
  reject_unknown_keys(j, {"mode", "steps", "learning_rate", "batch_questions", "multi_sample",
                          "seed", "checkpoint_every", "sft_warmup_steps", "grpo", "reward"},
                      "");
  std::string mode = "rl";
  read_key(j, "mode", mode);
  if (mode == "rl") {
    cfg.mode = TrainMode::Rl;
  } else if (mode == "sft") {
    cfg.mode = TrainMode::Sft;
  } else {
    fail(kExitValidation, "mode must be 'rl' or 'sft'");
  }
  read_key(j, "steps", cfg.steps);
  read_key(j, "learning_rate", cfg.learning_rate);
  read_key(j, "batch_questions", cfg.batch_questions);
  read_key(j, "multi_sample", cfg.multi_sample);
  read_key(j, "seed", cfg.seed);
  read_key(j, "checkpoint_every", cfg.checkpoint_every);
  read_key(j, "sft_warmup_steps", cfg.sft_warmup_steps);
  if (j.contains("grpo")) cfg.grpo = parse_grpo_config(j.at("grpo"));
  if (j.contains("reward")) cfg.reward = parse_reward_config(j.at("reward"));
  return cfg;
}

json reward_config_to_json(const RewardConfig& cfg) {
  return json{{"sigma", cfg.sigma},
              {"scale", cfg.scale},
              {"cutoff", cfg.cutoff},
              {"format_value", cfg.format_value},
              {"cot_enabled", cfg.cot_enabled},
              {"nonlinear_enabled", cfg.nonlinear_enabled}};
}

json train_config_to_json(const TrainConfig& cfg) {
  return json{{"mode", cfg.mode == TrainMode::Rl ? "rl" : "sft"},
              {"steps", cfg.steps},
              {"learning_rate", cfg.learning_rate},
              {"batch_questions", cfg.batch_questions},
              {"multi_sample", cfg.multi_sample},
              {"seed", cfg.seed},
              {"checkpoint_every", cfg.checkpoint_every},
              {"sft_warmup_steps", cfg.sft_warmup_steps},
              {"grpo",
               {{"group_size", cfg.grpo.group_size},
                {"clip_epsilon", cfg.grpo.clip_epsilon},
                {"kl_beta", cfg.grpo.kl_beta},
                {"inner_epochs", cfg.grpo.inner_epochs}}},
              {"reward", reward_config_to_json(cfg.reward)}};
}

void ensure_out_dir(const std::string& out) {
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) fail(kExitIo, "cannot create output directory " + out + ": " + ec.message());
}

void write_text(const std::string& path, const std::string& text) {
  std::ofstream os(path);
  if (!os) fail(kExitIo, "cannot open for writing: " + path);
  os << text;
  if (!os) fail(kExitIo, "write failed: " + path);
}

void echo_config(const std::string& out, const json& effective) {
  json j = effective;
  j["tool_version"] = kToolVersion;
  write_text(out + "/effective_config.json", j.dump(2) + "\n");
}

std::vector<DialogueInstance> load_dataset(const std::string& path) {
  std::vector<DialogueInstance> instances;
  try {
    instances = read_jsonl(path);
  } catch (const std::exception& e) {
    fail(kExitValidation, e.what());
  }
  if (instances.empty()) fail(kExitValidation, "dataset is empty: " + path);
  return instances;
}

PolicyParameters load_ckpt(const std::string& path) {
  try {
    return load_checkpoint(path).params;
  } catch (const std::exception& e) {
    fail(kExitValidation, e.what());
  }
}

int count_questions(const std::vector<DialogueInstance>& instances) {
  std::set<std::string> q;
  for (const auto& inst : instances) q.insert(inst.question_id);
  return static_cast<int>(q.size());
}

// ---------------------------------------------------------------- commands

struct GenOptions {
  std::string config_path;
  std::string out;
  std::uint64_t seed = 0;
  int total = 10000;
  bool shifted = false;
  bool seed_set = false, total_set = false;
};

void run_gen(const GenOptions& opt) {
  json cfg = load_config_file(opt.config_path);
  reject_unknown_keys(cfg, {"total", "seed", "train_fraction", "confidence_threshold", "shifted"},
                      "");
  int total = 10000;
  std::uint64_t seed = 0;
  double train_fraction = 0.85;
  double confidence_threshold = 0.5;
  bool shifted = false;
  read_key(cfg, "total", total);
  read_key(cfg, "seed", seed);
  read_key(cfg, "train_fraction", train_fraction);
  read_key(cfg, "confidence_threshold", confidence_threshold);
  read_key(cfg, "shifted", shifted);
  if (opt.total_set) total = opt.total;
  if (opt.seed_set) seed = opt.seed;
  if (opt.shifted) shifted = true;

  GeneratedDataset data;
  try {
    data = generate_dataset(total, seed, AttributeCatalog::standard());
  } catch (const std::invalid_argument& e) {
    fail(kExitValidation, e.what());
  }
  auto filtered = filter_dataset(data.instances, confidence_threshold);
  DatasetSplit split;
  try {
    split = split_dataset(filtered.kept, train_fraction, seed);
  } catch (const std::invalid_argument& e) {
    fail(kExitValidation, e.what());
  }
  data.manifest.train_questions = count_questions(split.train);
  data.manifest.test_questions = count_questions(split.test);

  ensure_out_dir(opt.out);
  try {
    write_jsonl(split.train, opt.out + "/train.jsonl");
    write_jsonl(split.test, opt.out + "/test.jsonl");
    if (shifted) {
      write_jsonl(shift_distribution(split.test, seed), opt.out + "/shifted.jsonl");
    }
    write_manifest(data.manifest, opt.out + "/manifest.json");
  } catch (const std::exception& e) {
    fail(kExitIo, e.what());
  }
  std::ostringstream rej;
  for (const auto& r : filtered.rejected) {
    rej << json{{"id", r.id}, {"confidence", r.confidence}}.dump() << '\n';
  }
  write_text(opt.out + "/rejected.jsonl", rej.str());
  echo_config(opt.out, json{{"command", "gen"},
                            {"total", total},
                            {"seed", seed},
                            {"train_fraction", train_fraction},
                            {"confidence_threshold", confidence_threshold},
                            {"shifted", shifted}});
  std::cout << "wrote dataset to " << opt.out << " (" << data.manifest.total_instances
            << " instances, " << filtered.rejected.size() << " rejected)\n";
}

struct TrainOptions {
  std::string data_path;
  std::string config_path;
  std::string out;
};

void run_train(const TrainOptions& opt) {
  const TrainConfig cfg = parse_train_config(load_config_file(opt.config_path));
  try {
    cfg.validate();
  } catch (const std::invalid_argument& e) {
    fail(kExitValidation, e.what());
  }
  const auto instances = load_dataset(opt.data_path);
  ensure_out_dir(opt.out);
  echo_config(opt.out, train_config_to_json(cfg));

  TrainResult result;
  try {
    result = train(cfg, instances, [&](int step, const PolicyParameters& params) {
      save_checkpoint(params, 0, opt.out + "/checkpoint_step_" + std::to_string(step) + ".txt");
    });
  } catch (const std::invalid_argument& e) {
    fail(kExitValidation, e.what());
  } catch (const std::exception& e) {
    fail(kExitIo, e.what());
  }

  try {
    write_metrics_csv(result.metrics, opt.out + "/metrics.csv");
  } catch (const std::exception& e) {
    fail(kExitIo, e.what());
  }
  if (result.aborted) {
    const std::string diag = opt.out + "/checkpoint_diagnostic.txt";
    save_checkpoint(result.params, result.final_rng_state, diag);
    fail(kExitNumeric, "non-finite objective at step " + std::to_string(result.abort_step) +
                           "; diagnostic checkpoint: " + diag);
  }
  try {
    save_checkpoint(result.params, result.final_rng_state, opt.out + "/checkpoint_final.txt");
    save_checkpoint(result.params_ref, 0, opt.out + "/checkpoint_ref.txt");
  } catch (const std::exception& e) {
    fail(kExitIo, e.what());
  }
  std::cout << "trained " << result.metrics.size() << " steps; final checkpoint: " << opt.out
            << "/checkpoint_final.txt\n";
}

struct EvalOptions {
  std::string ckpt;
  std::string data_path;
  std::string report;
  std::string config_path;
};

void run_eval(const EvalOptions& opt) {
  json cfg = load_config_file(opt.config_path);
  reject_unknown_keys(cfg, {"reward"}, "");
  RewardConfig reward = cfg.contains("reward") ? parse_reward_config(cfg.at("reward"))
                                               : RewardConfig{};
  const auto params = load_ckpt(opt.ckpt);
  const auto instances = load_dataset(opt.data_path);
  const auto report = accuracy_report(params, instances, reward);
  ensure_out_dir(opt.report);
  write_text(opt.report + "/report.json", report_to_json(report));
  write_text(opt.report + "/report.csv", report_to_csv(report));
  echo_config(opt.report, json{{"command", "eval"}, {"reward", reward_config_to_json(reward)}});
  std::cout << "overall accuracy: " << report.overall.accuracy() << " ("
            << report.overall.correct << "/" << report.overall.total << ")\n";
}

struct AbOptions {
  std::string ckpt_a;
  std::string ckpt_b;
  std::string data_path;
  std::string report;
  std::string config_path;
};

void run_ab(const AbOptions& opt) {
  json cfg = load_config_file(opt.config_path);
  reject_unknown_keys(cfg, {"reward"}, "");
  RewardConfig reward = cfg.contains("reward") ? parse_reward_config(cfg.at("reward"))
                                               : RewardConfig{};
  const auto params_a = load_ckpt(opt.ckpt_a);
  const auto params_b = load_ckpt(opt.ckpt_b);
  const auto instances = load_dataset(opt.data_path);
  const auto result = ab_compare(params_a, params_b, instances, reward);
  ensure_out_dir(opt.report);
  write_text(opt.report + "/ab.json", ab_to_json(result, static_cast<int>(instances.size())));
  echo_config(opt.report, json{{"command", "ab"}, {"reward", reward_config_to_json(reward)}});
  std::cout << "A wins " << result.wins << ", loses " << result.losses << ", ties "
            << result.ties << "\n";
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string(kToolVersion) +
               " - synthetic dialogue-scoring RL laboratory"};
  app.require_subcommand(1);
  app.set_version_flag("--version", kToolVersion);

  GenOptions gen;
  auto* cmd_gen = app.add_subcommand("gen", "generate a scored dialogue dataset");
  cmd_gen->add_option("--config", gen.config_path, "JSON config file");
  cmd_gen->add_option("--out", gen.out, "output directory")->required();
  cmd_gen->add_option("--seed", gen.seed)->each([&](const std::string&) { gen.seed_set = true; });
  cmd_gen->add_option("--total", gen.total)->each([&](const std::string&) { gen.total_set = true; });
  cmd_gen->add_flag("--shifted", gen.shifted, "also write a distribution-shifted test split");

  TrainOptions tr;
  auto* cmd_train = app.add_subcommand("train", "train a scorer policy (rl or sft)");
  cmd_train->add_option("--data", tr.data_path, "training JSONL")->required();
  cmd_train->add_option("--config", tr.config_path, "JSON config file");
  cmd_train->add_option("--out", tr.out, "output directory")->required();

  EvalOptions ev;
  auto* cmd_eval = app.add_subcommand("eval", "accuracy report for a checkpoint");
  cmd_eval->add_option("--ckpt", ev.ckpt)->required();
  cmd_eval->add_option("--data", ev.data_path)->required();
  cmd_eval->add_option("--report", ev.report, "report output directory")->required();
  cmd_eval->add_option("--config", ev.config_path);

  AbOptions ab;
  auto* cmd_ab = app.add_subcommand("ab", "A/B comparison of two checkpoints");
  cmd_ab->add_option("--ckpt-a", ab.ckpt_a)->required();
  cmd_ab->add_option("--ckpt-b", ab.ckpt_b)->required();
  cmd_ab->add_option("--data", ab.data_path)->required();
  cmd_ab->add_option("--report", ab.report, "report output directory")->required();
  cmd_ab->add_option("--config", ab.config_path);

  std::uint64_t gradcheck_seed = 0;
  bool gradcheck_corrupt = false;
  auto* cmd_gradcheck = app.add_subcommand("gradcheck", "finite-difference gradient audit");
  cmd_gradcheck->add_option("--seed", gradcheck_seed);
  // test fixture: negates one gradient tensor so the gate must trip
  cmd_gradcheck->add_flag("--corrupt-gradient", gradcheck_corrupt)->group("");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) return 0;  // --help / --version
    std::cerr << e.what() << "\n";
    return kExitValidation;
  }

  try {
    if (cmd_gen->parsed()) run_gen(gen);
    if (cmd_train->parsed()) run_train(tr);
    if (cmd_eval->parsed()) run_eval(ev);
    if (cmd_ab->parsed()) run_ab(ab);
    if (cmd_gradcheck->parsed()) {
      const auto report = gradcheck(gradcheck_seed, gradcheck_corrupt);
      std::cout << report.text;
      return report.pass ? kExitOk : kExitCheckFailed;
    }
  } catch (const CliError& e) {
    std::cerr << "error: " << e.message << "\n";
    return e.code;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitIo;
  }
  return kExitOk;
}
