#pragma once

#include <array>
#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialscore/policy.hpp"
#include "dialscore/rng.hpp"

namespace dialscore {

inline constexpr const char* kGeneratorVersion = "1";

enum class Scenario : int { Content = 0, Understanding = 1, Generation = 2, Implicit = 3 };
enum class Split : int { Train = 0, Test = 1 };
enum class Domain : int { In = 0, Shifted = 1 };

std::string to_string(Scenario s);
std::string to_string(Split s);
std::string to_string(Domain d);
Scenario scenario_from_string(const std::string& s);

struct AttributeFamily {
  std::string name;
  std::vector<std::string> categories;
};

struct AttributeCatalog {
  std::vector<AttributeFamily> families;  // exactly 9
  static AttributeCatalog standard();
  int family_index(const std::string& name) const;  // -1 if unknown
};

inline constexpr int kNumFamilies = 9;
inline constexpr int kEmotionFamily = 4;  // index within the standard catalog
inline constexpr int kNuisanceDim = 8;

// One synthetic user turn plus one candidate answer, encoded relationally.
struct DialogueInstance {
  std::string id;
  std::string question_id;
  Scenario scenario = Scenario::Content;
  std::optional<std::string> attribute_family;  // absent for content scenario
  std::optional<std::string> attribute_value;
  int level = 1;  // 1, 2, 3
  int content_match = 0;
  int acoustic_match = 0;
  std::array<double, kNuisanceDim> nuisance{};
  int gt_score = 1;  // in {1, 3, 5}
  double confidence = 1.0;  // synthetic quality gate value in [0, 1]
  Split split = Split::Train;
  Domain domain = Domain::In;
};

struct DatasetManifest {
  std::uint64_t seed = 0;
  int total_questions = 0;
  int total_instances = 0;
  std::map<std::string, int> questions_per_scenario;
  std::map<std::string, int> instances_per_family;
  int train_questions = 0;
  int test_questions = 0;
  std::string generator_version = kGeneratorVersion;
};

// Answers at graded quality levels for one question identity. Acoustic
// scenarios yield levels 1/2/3 (scores 1/3/5); the content scenario yields
// two independent level-1 negatives plus a level-3 positive.
std::vector<DialogueInstance> generate_instance_triple(RngStream& rng, Scenario scenario,
                                                       const AttributeCatalog& catalog,
                                                       std::optional<int> family = std::nullopt,
                                                       const std::string& question_id = "q0");

struct GeneratedDataset {
  std::vector<DialogueInstance> instances;
  DatasetManifest manifest;
};

// total counts question identities; each contributes three instances.
GeneratedDataset generate_dataset(int total, std::uint64_t seed,
                                  const AttributeCatalog& catalog,
                                  std::array<double, 4> mix = {0.15, 0.25, 0.35, 0.25});

struct Rejection {
  std::string id;
  double confidence;
};
struct FilterResult {
  std::vector<DialogueInstance> kept;
  std::vector<Rejection> rejected;
};
FilterResult filter_dataset(const std::vector<DialogueInstance>& instances,
                            double confidence_threshold = 0.5);

struct DatasetSplit {
  std::vector<DialogueInstance> train;
  std::vector<DialogueInstance> test;
};
// Splits by question identity; train share = round(fraction * question count).
DatasetSplit split_dataset(const std::vector<DialogueInstance>& instances,
                           double train_fraction, std::uint64_t seed);

// Out-of-domain variant: wider nuisance support and skewed attribute priors,
// ground-truth labels unchanged.
std::vector<DialogueInstance> shift_distribution(const std::vector<DialogueInstance>& instances,
                                                 std::uint64_t seed);

void write_jsonl(const std::vector<DialogueInstance>& instances, const std::string& path);
std::vector<DialogueInstance> read_jsonl(const std::string& path);

void write_manifest(const DatasetManifest& manifest, const std::string& path);

// Feature encoding consumed by the policy.
Observation encode_observation(const DialogueInstance& instance);

// Grammar-valid token sequence encoding the ground-truth score; the thought
// token carries the relational evidence bits.
std::vector<int> target_tokens(const DialogueInstance& instance, bool cot_enabled);

}  // namespace dialscore
