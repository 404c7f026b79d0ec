#pragma once

#include <array>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "advkit/constraints.hpp"
#include "advkit/core.hpp"

namespace advkit {

struct Sample {
  Vec features;
  int label = 0;  // 0 benign, 1 malicious
};

struct Dataset {
  std::string name;
  std::string schema_id;
  std::vector<Sample> samples;

  std::size_t size() const { return samples.size(); }
  bool empty() const { return samples.empty(); }
  std::size_t dim() const { return samples.empty() ? 0 : samples.front().features.size(); }
  std::size_t count(int label) const;
  // Subset of samples carrying the given label, order preserved.
  Dataset with_label(int label) const;
};

// Throws unless every sample has dimension d and a 0/1 label.
void validate(const Dataset& ds, std::size_t d);

Dataset read_csv(std::istream& in, const ConstraintSchema& schema, const std::string& name = "");
Dataset load_csv(const std::string& path, const ConstraintSchema& schema);
void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& names);
void save_csv(const std::string& path, const Dataset& ds, const std::vector<std::string>& names);

struct Split {
  Dataset train, val, test;
};

// Seeded shuffle followed by floor-proportional partition; the remainder goes
// to train.
Split split(const Dataset& ds, std::array<unsigned, 3> ratios, Seed seed);

struct SynthSpec {
  std::size_t n_per_class = 100;
  std::size_t d = 2;
  // Distance between the two class means.
  double separation = 0.3;
  // Per-feature Gaussian standard deviation.
  double noise = 0.05;
  // Direction of mean separation; defaults to the all-ones diagonal.
  std::optional<Vec> direction;
};

// Two Gaussian blobs centred at 0.5 -/+ separation/2 along `direction`,
// clipped to [0, 1]. Benign samples come first.
Dataset synth(const SynthSpec& spec, Seed seed);

// Per-feature min-max scaling to [0, 1], fit on one dataset and applied to
// others (values outside the fitted range are clipped).
class MinMaxScaler {
 public:
  static MinMaxScaler fit(const Dataset& ds);
  MinMaxScaler(Vec lo, Vec hi) : lo_(std::move(lo)), hi_(std::move(hi)) {}
  Vec transform(ConstVecView x) const;
  Dataset transform(const Dataset& ds) const;
  const Vec& lo() const { return lo_; }
  const Vec& hi() const { return hi_; }

 private:
  Vec lo_, hi_;
};

}  // namespace advkit
