#include "advkit/data.hpp"

#include <algorithm>
#include <charconv>
#include <fstream>
#include <istream>
#include <ostream>
#include <sstream>

namespace advkit {

std::size_t Dataset::count(int label) const {
  return static_cast<std::size_t>(std::count_if(
      samples.begin(), samples.end(), [label](const Sample& s) { return s.label == label; }));
}

Dataset Dataset::with_label(int label) const {
  Dataset out{name, schema_id, {}};
  for (const auto& s : samples)
    if (s.label == label) out.samples.push_back(s);
  return out;
}

void validate(const Dataset& ds, std::size_t d) {
  for (std::size_t i = 0; i < ds.samples.size(); ++i) {
    const auto& s = ds.samples[i];
    if (s.features.size() != d)
      throw Error("sample " + std::to_string(i) + ": dimension " +
                  std::to_string(s.features.size()) + " != " + std::to_string(d));
    if (s.label != 0 && s.label != 1)
      throw Error("sample " + std::to_string(i) + ": label must be 0 or 1");
  }
}

namespace {

std::vector<std::string> split_row(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream in(line);
  while (std::getline(in, cell, ',')) cells.push_back(cell);
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string trim(std::string s) {
  const auto not_space = [](unsigned char c) { return !std::isspace(c); };
  s.erase(s.begin(), std::find_if(s.begin(), s.end(), not_space));
  s.erase(std::find_if(s.rbegin(), s.rend(), not_space).base(), s.end());
  return s;
}

bool parse_double(const std::string& text, double& out) {
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (first != last && *first == '+') ++first;
  const auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last;
}

std::string format_double(double v) {
  char buf[64];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

}  // namespace

Dataset read_csv(std::istream& in, const ConstraintSchema& schema, const std::string& name) {
  std::string line;
  if (!std::getline(in, line)) throw Error("csv: missing header row");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  // Strip a UTF-8 byte order mark.
  if (line.rfind("\xEF\xBB\xBF", 0) == 0) line.erase(0, 3);
  auto header = split_row(line);
  for (auto& h : header) h = trim(h);

  const auto names = schema.feature_names();
  std::vector<std::ptrdiff_t> column_of(names.size(), -1);
  std::ptrdiff_t label_col = -1;
  for (std::size_t c = 0; c < header.size(); ++c) {
    if (header[c] == "label") {
      if (label_col >= 0) throw Error("csv: duplicate 'label' column");
      label_col = static_cast<std::ptrdiff_t>(c);
      continue;
    }
    const auto it = std::find(names.begin(), names.end(), header[c]);
    if (it == names.end()) throw Error("csv: extra column '" + header[c] + "' not in schema");
    auto& slot = column_of[static_cast<std::size_t>(it - names.begin())];
    if (slot >= 0) throw Error("csv: duplicate column '" + header[c] + "'");
    slot = static_cast<std::ptrdiff_t>(c);
  }
  if (label_col < 0) throw Error("csv: missing 'label' column");
  for (std::size_t f = 0; f < names.size(); ++f)
    if (column_of[f] < 0) throw Error("csv: missing column '" + names[f] + "'");

  Dataset ds;
  ds.name = name;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (trim(line).empty()) continue;
    ++row;
    const auto cells = split_row(line);
    const std::string where = "csv row " + std::to_string(row);
    if (cells.size() != header.size())
      throw Error(where + ": expected " + std::to_string(header.size()) + " cells, got " +
                  std::to_string(cells.size()));
    Sample s;
    s.features.resize(names.size());
    for (std::size_t f = 0; f < names.size(); ++f) {
      const std::string cell = trim(cells[static_cast<std::size_t>(column_of[f])]);
      if (!parse_double(cell, s.features[f]))
        throw Error(where + ": non-numeric value '" + cell + "' in column '" + names[f] + "'");
    }
    const std::string lab = trim(cells[static_cast<std::size_t>(label_col)]);
    if (lab == "0") s.label = 0;
    else if (lab == "1") s.label = 1;
    else throw Error(where + ": unknown label value '" + lab + "' (expected 0 or 1)");
    ds.samples.push_back(std::move(s));
  }
  if (ds.samples.empty()) throw Error("csv: no samples");
  return ds;
}

Dataset load_csv(const std::string& path, const ConstraintSchema& schema) {
  std::ifstream in(path);
  if (!in) throw Error("cannot open csv file '" + path + "'");
  return read_csv(in, schema, path);
}

void write_csv(std::ostream& out, const Dataset& ds, const std::vector<std::string>& names) {
  for (const auto& n : names) out << n << ',';
  out << "label\n";
  for (const auto& s : ds.samples) {
    for (double v : s.features) out << format_double(v) << ',';
    out << s.label << '\n';
  }
}

void save_csv(const std::string& path, const Dataset& ds, const std::vector<std::string>& names) {
  std::ofstream out(path);
  if (!out) throw Error("cannot write csv file '" + path + "'");
  write_csv(out, ds, names);
}

Split split(const Dataset& ds, std::array<unsigned, 3> ratios, Seed seed) {
  const std::size_t n = ds.size();
  if (n < 5) throw Error("split: need at least 5 samples, got " + std::to_string(n));
  const unsigned total = ratios[0] + ratios[1] + ratios[2];
  if (total == 0) throw Error("split: ratios sum to zero");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  Rng rng = make_rng(seed);
  for (std::size_t i = n; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  const std::size_t n_val = n * ratios[1] / total;
  const std::size_t n_test = n * ratios[2] / total;
  const std::size_t n_train = n - n_val - n_test;

  Split out;
  for (Dataset* part : {&out.train, &out.val, &out.test}) {
    part->name = ds.name;
    part->schema_id = ds.schema_id;
  }
  for (std::size_t k = 0; k < n; ++k) {
    Dataset& dst = k < n_train ? out.train : (k < n_train + n_val ? out.val : out.test);
    dst.samples.push_back(ds.samples[order[k]]);
  }
  return out;
}

Dataset synth(const SynthSpec& spec, Seed seed) {
  if (spec.n_per_class == 0) throw Error("synth: n_per_class must be positive");
  if (spec.d < 2) throw Error("synth: d must be at least 2");
  if (spec.noise < 0) throw Error("synth: noise must be nonnegative");
  Vec u = spec.direction ? *spec.direction : Vec(spec.d, 1.0);
  if (u.size() != spec.d) throw Error("synth: direction length != d");
  const double len = norm_l2(u);
  if (len <= 0) throw Error("synth: zero direction");
  for (double& v : u) v /= len;

  Rng rng = make_rng(seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  Dataset ds;
  ds.name = "synth";
  for (int label : {0, 1}) {
    const double side = label == 0 ? -0.5 : 0.5;
    for (std::size_t k = 0; k < spec.n_per_class; ++k) {
      Sample s;
      s.label = label;
      s.features.resize(spec.d);
      for (std::size_t i = 0; i < spec.d; ++i) {
        const double v = 0.5 + side * spec.separation * u[i] + spec.noise * normal(rng);
        s.features[i] = std::clamp(v, 0.0, 1.0);
      }
      ds.samples.push_back(std::move(s));
    }
  }
  return ds;
}

MinMaxScaler MinMaxScaler::fit(const Dataset& ds) {
  if (ds.empty()) throw Error("MinMaxScaler: empty dataset");
  const std::size_t d = ds.dim();
  Vec lo(d, std::numeric_limits<double>::infinity());
  Vec hi(d, -std::numeric_limits<double>::infinity());
  for (const auto& s : ds.samples)
    for (std::size_t i = 0; i < d; ++i) {
      lo[i] = std::min(lo[i], s.features[i]);
      hi[i] = std::max(hi[i], s.features[i]);
    }
  return MinMaxScaler(std::move(lo), std::move(hi));
}

Vec MinMaxScaler::transform(ConstVecView x) const {
  if (x.size() != lo_.size()) throw Error("MinMaxScaler: dimension mismatch");
  Vec out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double range = hi_[i] - lo_[i];
    out[i] = range > 0 ? std::clamp((x[i] - lo_[i]) / range, 0.0, 1.0) : 0.0;
  }
  return out;
}

Dataset MinMaxScaler::transform(const Dataset& ds) const {
  Dataset out{ds.name, ds.schema_id, {}};
  out.samples.reserve(ds.size());
  for (const auto& s : ds.samples) out.samples.push_back({transform(s.features), s.label});
  return out;
}

}  // namespace advkit
