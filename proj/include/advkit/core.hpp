#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace advkit {

using Vec = std::vector<double>;
using ConstVecView = std::span<const double>;

// Class probabilities (benign, malicious).
using Proba = std::array<double, 2>;

inline constexpr int kBenign = 0;
inline constexpr int kMalicious = 1;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

struct Seed {
  std::uint64_t value = 0;
  friend bool operator==(const Seed&, const Seed&) = default;
};

using Rng = std::mt19937_64;

// SplitMix64 finalizer; used to derive independent streams from one seed.
inline std::uint64_t mix64(std::uint64_t z) {
  z += 0x9e3779b97f4a7c15ULL;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline Seed derive(Seed seed, std::uint64_t stream) {
  return Seed{mix64(seed.value ^ mix64(stream + 0x632be59bd9b4e019ULL))};
}

inline Rng make_rng(Seed seed) { return Rng(mix64(seed.value)); }

// Batch kernels take an execution policy; kSerial is the reference path.
enum class Exec { kSerial, kParallel };

enum class Norm { kLinf, kL2, kL1 };

Norm parse_norm(const std::string& name);
std::string to_string(Norm norm);

double norm_l1(ConstVecView v);
double norm_l2(ConstVecView v);
double norm_linf(ConstVecView v);
double norm(ConstVecView v, Norm which);
double dot(ConstVecView a, ConstVecView b);

Vec sub(ConstVecView a, ConstVecView b);
Vec add(ConstVecView a, ConstVecView b);
Vec scaled(ConstVecView a, double s);
// a + s * b
Vec axpy(ConstVecView a, double s, ConstVecView b);

inline double sigmoid(double z) {
  if (z >= 0) return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline double sign(double v) { return (v > 0) - (v < 0); }

Vec gaussian_vector(std::size_t n, Rng& rng);
// Uniform direction on the unit sphere in R^n.
Vec unit_sphere_vector(std::size_t n, Rng& rng);

}  // namespace advkit
