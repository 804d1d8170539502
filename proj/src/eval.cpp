#include "dialscore/eval.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace dialscore {

using nlohmann::json;

std::optional<int> score_instance(const PolicyParameters& params,
                                  const DialogueInstance& instance,
                                  const RewardConfig& cfg) {
  const auto tokens = greedy_decode(params, encode_observation(instance));
  return parse_score(tokens, cfg);
}

namespace {

int gt_row(int gt) { return gt == 1 ? 0 : (gt == 3 ? 1 : 2); }

}  // namespace

AccuracyReport accuracy_report(const Predictor& predictor,
                               const std::vector<DialogueInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("accuracy_report: empty instance list");
  AccuracyReport rep;
  for (const auto& inst : instances) {
    const auto pred = predictor(inst);
    const bool correct = pred && *pred == inst.gt_score;
    auto tally = [&](CellAccuracy& cell) {
      ++cell.total;
      if (correct) ++cell.correct;
    };
    tally(rep.overall);
    tally(rep.per_scenario[to_string(inst.scenario)]);
    if (inst.attribute_family) tally(rep.per_attribute[*inst.attribute_family]);
    tally(inst.domain == Domain::In ? rep.in_domain : rep.shifted_domain);
    if (pred) {
      rep.confusion[gt_row(inst.gt_score)][*pred - 1]++;
    } else {
      rep.confusion[gt_row(inst.gt_score)][5]++;
      ++rep.unparsed;
    }
  }
  return rep;
}

AccuracyReport accuracy_report(const PolicyParameters& params,
                               const std::vector<DialogueInstance>& instances,
                               const RewardConfig& cfg) {
  return accuracy_report(
      [&](const DialogueInstance& inst) { return score_instance(params, inst, cfg); },
      instances);
}

AbResult ab_compare(const Predictor& a, const Predictor& b,
                    const std::vector<DialogueInstance>& instances) {
  if (instances.empty()) throw std::invalid_argument("ab_compare: empty instance list");
  AbResult res;
  for (const auto& inst : instances) {
    const auto pa = a(inst);
    const auto pb = b(inst);
    // unparsed counts as infinitely far from the ground truth
    const int da = pa ? std::abs(*pa - inst.gt_score) : 100;
    const int db = pb ? std::abs(*pb - inst.gt_score) : 100;
    if (da < db) {
      ++res.wins;
    } else if (db < da) {
      ++res.losses;
    } else {
      ++res.ties;
    }
  }
  return res;
}

AbResult ab_compare(const PolicyParameters& params_a, const PolicyParameters& params_b,
                    const std::vector<DialogueInstance>& instances,
                    const RewardConfig& cfg) {
  return ab_compare(
      [&](const DialogueInstance& inst) { return score_instance(params_a, inst, cfg); },
      [&](const DialogueInstance& inst) { return score_instance(params_b, inst, cfg); },
      instances);
}

namespace {

json cell_to_json(const CellAccuracy& cell) {
  return json{{"correct", cell.correct}, {"total", cell.total}, {"accuracy", cell.accuracy()}};
}

}  // namespace

std::string report_to_json(const AccuracyReport& rep) {
  json j;
  j["overall"] = cell_to_json(rep.overall);
  json scen;
  for (const auto& [name, cell] : rep.per_scenario) scen[name] = cell_to_json(cell);
  j["per_scenario"] = scen;
  json attr;
  for (const auto& [name, cell] : rep.per_attribute) attr[name] = cell_to_json(cell);
  j["per_attribute"] = attr;
  j["in_domain"] = cell_to_json(rep.in_domain);
  j["shifted_domain"] = cell_to_json(rep.shifted_domain);
  j["unparsed"] = rep.unparsed;
  json conf = json::array();
  const std::array<int, 3> gts{1, 3, 5};
  for (int r = 0; r < 3; ++r) {
    json row;
    row["gt"] = gts[r];
    for (int c = 0; c < 5; ++c) row["pred_" + std::to_string(c + 1)] = rep.confusion[r][c];
    row["unparsed"] = rep.confusion[r][5];
    conf.push_back(row);
  }
  j["confusion"] = conf;
  return j.dump(2) + "\n";
}

std::string report_to_csv(const AccuracyReport& rep) {
  std::ostringstream os;
  os << "cell,correct,total,accuracy\n";
  auto row = [&](const std::string& name, const CellAccuracy& cell) {
    os << name << ',' << cell.correct << ',' << cell.total << ',' << cell.accuracy() << '\n';
  };
  row("overall", rep.overall);
  for (const auto& [name, cell] : rep.per_scenario) row("scenario." + name, cell);
  for (const auto& [name, cell] : rep.per_attribute) row("attribute." + name, cell);
  row("domain.in", rep.in_domain);
  row("domain.shifted", rep.shifted_domain);
  return os.str();
}

std::string ab_to_json(const AbResult& result, int instance_count) {
  json j;
  j["wins"] = result.wins;
  j["losses"] = result.losses;
  j["ties"] = result.ties;
  j["instances"] = instance_count;
  return j.dump(2) + "\n";
}

}  // namespace dialscore
