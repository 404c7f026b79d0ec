#include <exception>

#include "advkit/attack.hpp"

namespace advkit {

std::vector<AttackResult> attack_batch(const AttackSpec& spec, const Model& model,
                                       const std::vector<Vec>& xs, const std::vector<int>& ys,
                                       const ConstraintSchema& schema, Seed seed, Exec exec) {
  if (xs.size() != ys.size()) throw Error("attack_batch: xs and ys differ in length");
  std::vector<AttackResult> out(xs.size());
  const auto n = static_cast<std::ptrdiff_t>(xs.size());
  if (exec == Exec::kSerial) {
    for (std::ptrdiff_t i = 0; i < n; ++i) {
      const auto k = static_cast<std::size_t>(i);
      out[k] = run_attack(spec, model, xs[k], ys[k], schema, derive(seed, k));
    }
    return out;
  }
  std::exception_ptr failure;
#pragma omp parallel for schedule(dynamic)
  for (std::ptrdiff_t i = 0; i < n; ++i) {
    const auto k = static_cast<std::size_t>(i);
    try {
      out[k] = run_attack(spec, model, xs[k], ys[k], schema, derive(seed, k));
    } catch (...) {
#pragma omp critical(advkit_batch_failure)
      if (!failure) failure = std::current_exception();
    }
  }
  if (failure) std::rethrow_exception(failure);
  return out;
}

}  // namespace advkit
