#include "advkit/core.hpp"

#include <algorithm>

namespace advkit {

Norm parse_norm(const std::string& name) {
  if (name == "linf" || name == "l_inf" || name == "inf") return Norm::kLinf;
  if (name == "l2") return Norm::kL2;
  if (name == "l1") return Norm::kL1;
  throw Error("unknown norm '" + name + "' (valid: linf, l2, l1)");
}

std::string to_string(Norm norm) {
  switch (norm) {
    case Norm::kLinf: return "linf";
    case Norm::kL2: return "l2";
    case Norm::kL1: return "l1";
  }
  return "?";
}

double norm_l1(ConstVecView v) {
  double s = 0;
  for (double x : v) s += std::abs(x);
  return s;
}

double norm_l2(ConstVecView v) {
  double s = 0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

double norm_linf(ConstVecView v) {
  double s = 0;
  for (double x : v) s = std::max(s, std::abs(x));
  return s;
}

double norm(ConstVecView v, Norm which) {
  switch (which) {
    case Norm::kLinf: return norm_linf(v);
    case Norm::kL2: return norm_l2(v);
    case Norm::kL1: return norm_l1(v);
  }
  return 0;
}

double dot(ConstVecView a, ConstVecView b) {
  double s = 0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

Vec sub(ConstVecView a, ConstVecView b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] - b[i];
  return out;
}

Vec add(ConstVecView a, ConstVecView b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + b[i];
  return out;
}

Vec scaled(ConstVecView a, double s) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] * s;
  return out;
}

Vec axpy(ConstVecView a, double s, ConstVecView b) {
  Vec out(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) out[i] = a[i] + s * b[i];
  return out;
}

Vec gaussian_vector(std::size_t n, Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Vec v(n);
  for (double& x : v) x = normal(rng);
  return v;
}

Vec unit_sphere_vector(std::size_t n, Rng& rng) {
  for (;;) {
    Vec v = gaussian_vector(n, rng);
    const double len = norm_l2(v);
    if (len > 1e-12) {
      for (double& x : v) x /= len;
      return v;
    }
  }
}

}  // namespace advkit
