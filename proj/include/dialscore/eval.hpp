#pragma once

#include <array>
#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "dialscore/datagen.hpp"
#include "dialscore/policy.hpp"
#include "dialscore/reward.hpp"

namespace dialscore {

struct CellAccuracy {
  int correct = 0;
  int total = 0;
  double accuracy() const { return total ? static_cast<double>(correct) / total : 0.0; }
};

struct AccuracyReport {
  CellAccuracy overall;
  std::map<std::string, CellAccuracy> per_scenario;
  std::map<std::string, CellAccuracy> per_attribute;
  CellAccuracy in_domain;
  CellAccuracy shifted_domain;
  // rows: gt 1/3/5; cols: predicted 1..5 then unparsed
  std::array<std::array<int, 6>, 3> confusion{};
  int unparsed = 0;
};

using Predictor = std::function<std::optional<int>(const DialogueInstance&)>;

// Greedy decode + strict parse under the active grammar.
std::optional<int> score_instance(const PolicyParameters& params,
                                  const DialogueInstance& instance,
                                  const RewardConfig& cfg);

AccuracyReport accuracy_report(const Predictor& predictor,
                               const std::vector<DialogueInstance>& instances);
AccuracyReport accuracy_report(const PolicyParameters& params,
                               const std::vector<DialogueInstance>& instances,
                               const RewardConfig& cfg);

struct AbResult {
  int wins = 0;    // A strictly closer to ground truth
  int losses = 0;
  int ties = 0;
};

AbResult ab_compare(const Predictor& a, const Predictor& b,
                    const std::vector<DialogueInstance>& instances);
AbResult ab_compare(const PolicyParameters& params_a, const PolicyParameters& params_b,
                    const std::vector<DialogueInstance>& instances,
                    const RewardConfig& cfg);

std::string report_to_json(const AccuracyReport& report);
std::string report_to_csv(const AccuracyReport& report);
std::string ab_to_json(const AbResult& result, int instance_count);

}  // namespace dialscore
