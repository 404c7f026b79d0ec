#pragma once

// Detection and attack metrics. Percentages are kept at full precision and
// rendered with two decimals.

#include <iosfwd>
#include <map>
#include <string>
#include <vector>

#include "advkit/attack.hpp"
#include "advkit/data.hpp"

namespace advkit {

// 100 * successes / total; an empty set is an error.
double asr(const std::vector<AttackResult>& results);
double dsr(const std::vector<AttackResult>& results);
// Malicious-class recall on clean data, in percent.
double odr(const Model& model, const Dataset& clean);
// Unweighted mean of the values.
double avg_over_models(const std::map<std::string, double>& per_model);

struct DetectionStats {
  double precision = 0.0;
  double recall = 0.0;
  double f1 = 0.0;
  double accuracy = 0.0;
};
DetectionStats detection_stats(const Model& model, const Dataset& ds);

std::string format_percent(double v);

// Malicious rows of ds as attack inputs.
struct AttackInputs {
  std::vector<Vec> xs;
  std::vector<int> ys;
};
AttackInputs malicious_inputs(const Dataset& ds);

struct NamedAttack {
  std::string name;
  AttackSpec spec;
};
struct NamedModel {
  std::string name;
  ModelPtr model;
};

// cells[i][j] = DSR of model j under attack i, attacks crafted white-box (or
// query-based) against each model on the malicious rows of data.
struct TransferMatrix {
  std::vector<std::string> attacks;
  std::vector<std::string> defenses;
  std::vector<std::vector<double>> cells;
  void write_csv(std::ostream& out) const;
};
TransferMatrix transfer_matrix(const std::vector<NamedAttack>& attacks,
                               const std::vector<NamedModel>& defended, const Dataset& data,
                               const ConstraintSchema& schema, Seed seed,
                               Exec exec = Exec::kParallel);

}  // namespace advkit
