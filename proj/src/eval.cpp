#include "advkit/eval.hpp"

#include <cstdio>
#include <ostream>

namespace advkit {

double asr(const std::vector<AttackResult>& results) {
  if (results.empty()) throw Error("asr: empty result set");
  std::size_t ok = 0;
  for (const auto& r : results) ok += r.success;
  return 100.0 * static_cast<double>(ok) / static_cast<double>(results.size());
}

double dsr(const std::vector<AttackResult>& results) { return 100.0 - asr(results); }

double odr(const Model& model, const Dataset& clean) {
  std::size_t pos = 0, hit = 0;
  for (const auto& s : clean.samples) {
    if (s.label != kMalicious) continue;
    ++pos;
    hit += model.predict(s.features) == kMalicious;
  }
  if (pos == 0) throw Error("odr: dataset has no malicious samples");
  return 100.0 * static_cast<double>(hit) / static_cast<double>(pos);
}

double avg_over_models(const std::map<std::string, double>& per_model) {
  if (per_model.empty()) throw Error("avg_over_models: no entries");
  double s = 0.0;
  for (const auto& [name, v] : per_model) s += v;
  return s / static_cast<double>(per_model.size());
}

DetectionStats detection_stats(const Model& model, const Dataset& ds) {
  if (ds.empty()) throw Error("detection_stats: empty dataset");
  std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
  for (const auto& s : ds.samples) {
    const int p = model.predict(s.features);
    if (p == kMalicious) (s.label == kMalicious ? tp : fp)++;
    else (s.label == kMalicious ? fn : tn)++;
  }
  DetectionStats st;
  st.precision = tp + fp ? 100.0 * double(tp) / double(tp + fp) : 0.0;
  st.recall = tp + fn ? 100.0 * double(tp) / double(tp + fn) : 0.0;
  st.f1 = st.precision + st.recall > 0
              ? 2 * st.precision * st.recall / (st.precision + st.recall)
              : 0.0;
  st.accuracy = 100.0 * double(tp + tn) / double(ds.size());
  return st;
}

std::string format_percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.2f", v);
  return buf;
}

AttackInputs malicious_inputs(const Dataset& ds) {
  AttackInputs in;
  for (const auto& s : ds.samples)
    if (s.label == kMalicious) {
      in.xs.push_back(s.features);
      in.ys.push_back(kMalicious);
    }
  return in;
}

void TransferMatrix::write_csv(std::ostream& out) const {
  out << "attack";
  for (const auto& d : defenses) out << ',' << d;
  out << '\n';
  for (std::size_t i = 0; i < attacks.size(); ++i) {
    out << attacks[i];
    for (double v : cells[i]) out << ',' << format_percent(v);
    out << '\n';
  }
}

TransferMatrix transfer_matrix(const std::vector<NamedAttack>& attacks,
                               const std::vector<NamedModel>& defended, const Dataset& data,
                               const ConstraintSchema& schema, Seed seed, Exec exec) {
  if (attacks.empty() || defended.empty()) throw Error("transfer_matrix: empty axis");
  const AttackInputs in = malicious_inputs(data);
  if (in.xs.empty()) throw Error("transfer_matrix: no malicious samples");
  TransferMatrix m;
  for (const auto& a : attacks) m.attacks.push_back(a.name);
  for (const auto& d : defended) m.defenses.push_back(d.name);
  m.cells.assign(attacks.size(), std::vector<double>(defended.size(), 0.0));
  for (std::size_t i = 0; i < attacks.size(); ++i)
    for (std::size_t j = 0; j < defended.size(); ++j)
      m.cells[i][j] = dsr(attack_batch(attacks[i].spec, *defended[j].model, in.xs, in.ys, schema,
                                       derive(seed, i), exec));
  return m;
}

}  // namespace advkit
