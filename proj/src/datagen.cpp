#include "dialscore/datagen.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <numeric>
#include <stdexcept>
#include <unordered_set>

#include <json.hpp>

#include "dialscore/vocab.hpp"

namespace dialscore {

using nlohmann::json;

std::string to_string(Scenario s) {
  switch (s) {
    case Scenario::Content: return "content";
    case Scenario::Understanding: return "understanding";
    case Scenario::Generation: return "generation";
    case Scenario::Implicit: return "implicit";
  }
  throw std::invalid_argument("bad scenario");
}

std::string to_string(Split s) { return s == Split::Train ? "train" : "test"; }
std::string to_string(Domain d) { return d == Domain::In ? "in" : "shifted"; }

Scenario scenario_from_string(const std::string& s) {
  if (s == "content") return Scenario::Content;
  if (s == "understanding") return Scenario::Understanding;
  if (s == "generation") return Scenario::Generation;
  if (s == "implicit") return Scenario::Implicit;
  throw std::invalid_argument("unknown scenario '" + s + "'");
}

AttributeCatalog AttributeCatalog::standard() {
  return AttributeCatalog{{
      {"gender", {"male", "female"}},
      {"age", {"children", "elderly", "middle-aged", "adolescent"}},
      {"language", {"chinese", "english"}},
      {"accent", {"indian", "canadian", "british", "singaporean", "american", "australian"}},
      {"emotion", {"neutral", "happy", "sad", "angry", "surprised", "disgusted", "fearful"}},
      {"pitch", {"low", "high", "normal"}},
      {"speed", {"slow", "normal", "fast"}},
      {"volume", {"low", "normal", "high"}},
      {"audio",
       {"laughing", "crying", "bee", "bird", "car", "cat", "chirping", "clapping",
        "coughing", "dog", "screaming", "duck", "horse", "ice", "knocking", "ocean",
        "pig", "police", "sneezing", "thunder", "waterfall_burbling"}},
  }};
}

int AttributeCatalog::family_index(const std::string& name) const {
  for (std::size_t i = 0; i < families.size(); ++i) {
    if (families[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

namespace {

int level_to_score(int level) { return level == 1 ? 1 : (level == 2 ? 3 : 5); }

DialogueInstance make_instance(RngStream& rng, Scenario scenario,
                               const std::optional<std::string>& family,
                               const std::optional<std::string>& value,
                               const std::string& question_id, int answer_index,
                               int level, int content_match, int acoustic_match) {
  DialogueInstance inst;
  inst.id = question_id + "-a" + std::to_string(answer_index);
  inst.question_id = question_id;
  inst.scenario = scenario;
  inst.attribute_family = family;
  inst.attribute_value = value;
  inst.level = level;
  inst.content_match = content_match;
  inst.acoustic_match = acoustic_match;
  for (double& v : inst.nuisance) v = rng.uniform(-1.0, 1.0);
  inst.gt_score = level_to_score(level);
  inst.confidence = std::pow(rng.uniform(), 0.25);  // skewed high, ~6% below 0.5
  return inst;
}

}  // namespace

std::vector<DialogueInstance> generate_instance_triple(RngStream& rng, Scenario scenario,
                                                       const AttributeCatalog& catalog,
                                                       std::optional<int> family,
                                                       const std::string& question_id) {
  std::optional<std::string> fam_name;
  std::optional<std::string> fam_value;
  if (scenario != Scenario::Content) {
    int f;
    if (family) {
      f = *family;
    } else {
      // standalone default mirrors the dataset-level emotion emphasis
      if (rng.uniform() < 0.4) {
        f = kEmotionFamily;
      } else {
        f = static_cast<int>(rng.uniform_int(kNumFamilies - 1));
        if (f >= kEmotionFamily) ++f;
      }
    }
    if (f < 0 || f >= kNumFamilies) throw std::invalid_argument("bad attribute family index");
    const auto& fd = catalog.families[f];
    fam_name = fd.name;
    fam_value = fd.categories[rng.uniform_int(fd.categories.size())];
  }

  std::vector<DialogueInstance> out;
  if (scenario == Scenario::Content) {
    // text-only dialogue has no acoustic level to violate
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 0, 1, 0, 1));
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 1, 1, 0, 1));
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 2, 3, 1, 1));
  } else {
    const int l1_acoustic = static_cast<int>(rng.uniform_int(2));
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 0, 1, 0, l1_acoustic));
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 1, 2, 1, 0));
    out.push_back(make_instance(rng, scenario, fam_name, fam_value, question_id, 2, 3, 1, 1));
  }
  return out;
}

GeneratedDataset generate_dataset(int total, std::uint64_t seed,
                                  const AttributeCatalog& catalog,
                                  std::array<double, 4> mix) {
  if (total < 100) throw std::invalid_argument("total must be >= 100");
  double mix_sum = mix[0] + mix[1] + mix[2] + mix[3];
  if (std::abs(mix_sum - 1.0) > 1e-9) throw std::invalid_argument("scenario mix must sum to 1");

  // exact deterministic scenario counts, remainder goes to implicit
  std::array<int, 4> counts{};
  counts[0] = static_cast<int>(std::lround(mix[0] * total));
  counts[1] = static_cast<int>(std::lround(mix[1] * total));
  counts[2] = static_cast<int>(std::lround(mix[2] * total));
  counts[3] = total - counts[0] - counts[1] - counts[2];
  if (counts[3] < 0) throw std::invalid_argument("scenario mix is inconsistent with total");

  // per-scenario family plan: emotion gets 40% of acoustic questions, the
  // other eight families share the rest evenly
  auto family_plan = [&](int n) {
    std::vector<int> plan;
    plan.reserve(n);
    const int emo = static_cast<int>(std::lround(0.4 * n));
    const int rest = n - emo;
    std::array<int, 8> others{};
    for (int i = 0; i < 8; ++i) others[i] = rest / 8 + (i < rest % 8 ? 1 : 0);
    for (int i = 0; i < emo; ++i) plan.push_back(kEmotionFamily);
    int fam = 0;
    for (int i = 0; i < 8; ++i) {
      const int f = i < kEmotionFamily ? i : i + 1;
      for (int k = 0; k < others[i]; ++k) plan.push_back(f);
      (void)fam;
    }
    return plan;
  };

  GeneratedDataset out;
  out.manifest.seed = seed;
  out.manifest.total_questions = total;
  const RngStream root(seed);
  int qidx = 0;
  for (int s = 0; s < 4; ++s) {
    const Scenario scenario = static_cast<Scenario>(s);
    std::vector<int> plan;
    if (scenario != Scenario::Content) plan = family_plan(counts[s]);
    for (int i = 0; i < counts[s]; ++i, ++qidx) {
      char qid[16];
      std::snprintf(qid, sizeof(qid), "q%06d", qidx);
      RngStream qrng = root.child(static_cast<std::uint64_t>(qidx));
      std::optional<int> fam;
      if (scenario != Scenario::Content) fam = plan[i];
      auto triple = generate_instance_triple(qrng, scenario, catalog, fam, qid);
      for (auto& inst : triple) out.instances.push_back(std::move(inst));
    }
    out.manifest.questions_per_scenario[to_string(scenario)] = counts[s];
  }
  out.manifest.total_instances = static_cast<int>(out.instances.size());
  for (const auto& inst : out.instances) {
    if (inst.attribute_family) out.manifest.instances_per_family[*inst.attribute_family]++;
  }
  return out;
}

FilterResult filter_dataset(const std::vector<DialogueInstance>& instances,
                            double confidence_threshold) {
  FilterResult out;
  for (const auto& inst : instances) {
    if (inst.confidence < confidence_threshold) {
      out.rejected.push_back({inst.id, inst.confidence});
    } else {
      out.kept.push_back(inst);
    }
  }
  return out;
}

DatasetSplit split_dataset(const std::vector<DialogueInstance>& instances,
                           double train_fraction, std::uint64_t seed) {
  if (!(train_fraction > 0.0 && train_fraction < 1.0)) {
    throw std::invalid_argument("train_fraction must be in (0,1)");
  }
  std::vector<std::string> questions;  // first-appearance order
  std::unordered_set<std::string> seen;
  for (const auto& inst : instances) {
    if (seen.insert(inst.question_id).second) questions.push_back(inst.question_id);
  }
  // seeded Fisher-Yates over question identities
  RngStream rng = RngStream(seed).child(0x5B1A7);
  std::vector<std::size_t> order(questions.size());
  std::iota(order.begin(), order.end(), 0);
  for (std::size_t i = order.size(); i > 1; --i) {
    std::swap(order[i - 1], order[rng.uniform_int(i)]);
  }
  const std::size_t n_train =
      static_cast<std::size_t>(std::lround(train_fraction * static_cast<double>(questions.size())));
  std::map<std::string, Split> assignment;
  for (std::size_t i = 0; i < order.size(); ++i) {
    assignment[questions[order[i]]] = i < n_train ? Split::Train : Split::Test;
  }

  DatasetSplit out;
  for (auto inst : instances) {
    inst.split = assignment.at(inst.question_id);
    (inst.split == Split::Train ? out.train : out.test).push_back(std::move(inst));
  }
  return out;
}

std::vector<DialogueInstance> shift_distribution(const std::vector<DialogueInstance>& instances,
                                                 std::uint64_t seed) {
  const AttributeCatalog catalog = AttributeCatalog::standard();
  const RngStream root = RngStream(seed).child(0xD0);
  std::vector<DialogueInstance> out;
  out.reserve(instances.size());
  for (std::size_t i = 0; i < instances.size(); ++i) {
    DialogueInstance inst = instances[i];
    RngStream rng = root.child(i);
    for (double& v : inst.nuisance) v = rng.uniform(-2.0, 2.0);
    if (inst.attribute_family) {
      // skew the category prior geometrically toward the first categories
      const int f = catalog.family_index(*inst.attribute_family);
      const auto& cats = catalog.families[f].categories;
      double total = 0.0, w = 1.0;
      std::vector<double> weights(cats.size());
      for (std::size_t c = 0; c < cats.size(); ++c, w *= 0.6) {
        weights[c] = w;
        total += w;
      }
      double u = rng.uniform() * total;
      std::size_t pick = cats.size() - 1;
      for (std::size_t c = 0; c < cats.size(); ++c) {
        u -= weights[c];
        if (u < 0.0) {
          pick = c;
          break;
        }
      }
      inst.attribute_value = cats[pick];
    }
    inst.domain = Domain::Shifted;
    out.push_back(std::move(inst));
  }
  return out;
}

namespace {

json instance_to_json(const DialogueInstance& inst) {
  json j;
  j["id"] = inst.id;
  j["question_id"] = inst.question_id;
  j["scenario"] = to_string(inst.scenario);
  j["attribute_family"] = inst.attribute_family ? json(*inst.attribute_family) : json(nullptr);
  j["attribute_value"] = inst.attribute_value ? json(*inst.attribute_value) : json(nullptr);
  j["level"] = inst.level;
  j["content_match"] = inst.content_match;
  j["acoustic_match"] = inst.acoustic_match;
  j["nuisance"] = inst.nuisance;
  j["gt_score"] = inst.gt_score;
  j["confidence"] = inst.confidence;
  j["split"] = to_string(inst.split);
  j["domain"] = to_string(inst.domain);
  return j;
}

DialogueInstance instance_from_json(const json& j) {
  DialogueInstance inst;
  inst.id = j.at("id").get<std::string>();
  inst.question_id = j.at("question_id").get<std::string>();
  inst.scenario = scenario_from_string(j.at("scenario").get<std::string>());
  if (!j.at("attribute_family").is_null()) {
    inst.attribute_family = j.at("attribute_family").get<std::string>();
  }
  if (!j.at("attribute_value").is_null()) {
    inst.attribute_value = j.at("attribute_value").get<std::string>();
  }
  inst.level = j.at("level").get<int>();
  inst.content_match = j.at("content_match").get<int>();
  inst.acoustic_match = j.at("acoustic_match").get<int>();
  const auto& nu = j.at("nuisance");
  if (nu.size() != kNuisanceDim) throw std::invalid_argument("nuisance must have 8 entries");
  for (int i = 0; i < kNuisanceDim; ++i) inst.nuisance[i] = nu[i].get<double>();
  inst.gt_score = j.at("gt_score").get<int>();
  inst.confidence = j.at("confidence").get<double>();
  inst.split = j.at("split").get<std::string>() == "train" ? Split::Train : Split::Test;
  inst.domain = j.at("domain").get<std::string>() == "in" ? Domain::In : Domain::Shifted;
  if (inst.gt_score != 1 && inst.gt_score != 3 && inst.gt_score != 5) {
    throw std::invalid_argument("gt_score must be one of 1,3,5");
  }
  return inst;
}

}  // namespace

void write_jsonl(const std::vector<DialogueInstance>& instances, const std::string& path) {
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  for (const auto& inst : instances) os << instance_to_json(inst).dump() << '\n';
  if (!os) throw std::runtime_error("write failed: " + path);
}

std::vector<DialogueInstance> read_jsonl(const std::string& path) {
  std::ifstream is(path);
  if (!is) throw std::runtime_error("cannot open: " + path);
  std::vector<DialogueInstance> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    try {
      out.push_back(instance_from_json(json::parse(line)));
    } catch (const std::exception& e) {
      throw std::runtime_error(path + ":" + std::to_string(lineno) +
                               ": malformed instance line: " + e.what());
    }
  }
  return out;
}

void write_manifest(const DatasetManifest& manifest, const std::string& path) {
  json j;
  j["seed"] = manifest.seed;
  j["total_questions"] = manifest.total_questions;
  j["total_instances"] = manifest.total_instances;
  j["questions_per_scenario"] = manifest.questions_per_scenario;
  j["instances_per_family"] = manifest.instances_per_family;
  j["train_questions"] = manifest.train_questions;
  j["test_questions"] = manifest.test_questions;
  j["generator_version"] = manifest.generator_version;
  std::ofstream os(path);
  if (!os) throw std::runtime_error("cannot open for writing: " + path);
  os << j.dump(2) << '\n';
}

Observation encode_observation(const DialogueInstance& inst) {
  static const AttributeCatalog catalog = AttributeCatalog::standard();
  Observation obs;
  obs.features = Eigen::VectorXd::Zero(kObsDim);
  obs.features(0) = inst.content_match;
  obs.features(1) = inst.acoustic_match;
  obs.features(2 + static_cast<int>(inst.scenario)) = 1.0;
  if (inst.attribute_family) {
    const int f = catalog.family_index(*inst.attribute_family);
    if (f < 0) throw std::invalid_argument("unknown attribute family " + *inst.attribute_family);
    obs.features(6 + f) = 1.0;
  }
  for (int i = 0; i < kNuisanceDim; ++i) obs.features(15 + i) = inst.nuisance[i];
  obs.features(23) = 1.0;
  return obs;
}

std::vector<int> target_tokens(const DialogueInstance& inst, bool cot_enabled) {
  const int score_tok = vocab::score_token(inst.gt_score);
  if (!cot_enabled) return {score_tok, vocab::EOS};
  const int thought = vocab::THOUGHT_0 + inst.content_match * 2 + inst.acoustic_match;
  return {vocab::THINK_OPEN, thought, vocab::THINK_CLOSE, score_tok, vocab::EOS};
}

}  // namespace dialscore
