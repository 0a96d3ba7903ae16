#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcmcr/model.hpp"

namespace lcmcr {

enum class DfFlag { ok, saturated, negative };

std::string to_string(DfFlag flag);

/// Identifiability summary of a spec. degrees_of_freedom is always
/// independent_cells - parameter_count, where independent_cells = 2^K - 2
/// (observable profiles minus the sum-to-n constraint).
struct StructureReport {
  std::int64_t independent_cells = 0;
  std::int64_t parameter_count = 0;
  std::int64_t degrees_of_freedom = 0;
  DfFlag df_flag = DfFlag::ok;
  std::optional<int> jacobian_rank;
  std::optional<bool> rank_deficient;
};

/// Free parameters: (L-1) weights, L per independent register, L(2^m - 1)
/// per class-specific term, L*m + 2^m - 1 - m per shared term.
std::int64_t parameter_count(const ModelSpec& spec);

StructureReport degrees_of_freedom(const ModelSpec& spec);

struct RankCheck {
  int rank = 0;
  bool rank_deficient = false;
  std::vector<int> point_ranks;
};

/// Numerical rank of the map from free parameters to the capture-conditional
/// cell probabilities, by central differences (step 1e-6) in a logit/softmax
/// chart. Evaluated at `params` when given and at `num_points` seeded random
/// interior points; `rank` is the largest rank seen, and the model is rank
/// deficient when every point falls short of parameter_count. Singular
/// values below 1e-8 times the largest count as zero. Requires K <= 10.
RankCheck jacobian_rank_check(const ModelSpec& spec, const std::optional<ParameterSet>& params,
                              int num_points, std::uint64_t seed);

/// Map parameters into the unconstrained chart used by the rank check.
Vector to_chart(const ModelSpec& spec, const ParameterSet& params);
ParameterSet from_chart(const ModelSpec& spec, const Vector& theta);

}  // namespace lcmcr
