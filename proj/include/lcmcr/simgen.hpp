#pragma once

#include <array>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "lcmcr/counts.hpp"
#include "lcmcr/model.hpp"

namespace lcmcr {

enum class ClassRole { target, overcoverage };

std::string to_string(ClassRole role);
ClassRole parse_class_role(const std::string& text);

struct GeneratingConfig {
  ModelSpec spec;
  ParameterSet params;
  std::int64_t population_size = 0;
  std::vector<ClassRole> class_roles;
  std::uint64_t seed = 0;
  /// Class sizes from largest-remainder rounding of N * weights instead of a
  /// multinomial draw.
  bool fixed_classes = false;
};

std::vector<Violation> validate(const GeneratingConfig& config);

struct SimOutput {
  CountMatrix complete_table;  ///< 2^K x L, includes the all-zero row
  CaptureCounts observed_counts;
  std::int64_t true_target_size = 0;
  std::vector<std::int64_t> true_class_sizes;
};

/// Draws a synthetic population. Class sizes come from substream 0 of the
/// seed, then each unit of class x draws its profile from substream 1 + x,
/// so the output does not depend on `threads`.
SimOutput simulate(const GeneratingConfig& config, int threads = 1);

/// Two classes over registers A-D: weights (0.4, 0.6), class 0 probabilities
/// (0.25, 0.20, 0.21, 0.29) labelled overcoverage, class 1 probabilities
/// (0.70, 0.82, 0.86, 0.83) labelled target. With `cd_interaction` the spec
/// gains a shared C-D term holding that log-scale value.
GeneratingConfig preset_scenario1(std::int64_t population_size, std::uint64_t seed,
                                  std::optional<double> cd_interaction = {});

/// Settings of the three-class mixed regime. Defaults are a chosen
/// illustration, not published values.
struct CritiqueSettings {
  std::array<double, 3> weights{0.2, 0.3, 0.5};
  std::array<double, 4> overcoverage_probs{0.25, 0.20, 0.21, 0.29};
  std::array<double, 4> hard_to_reach_probs{0.35, 0.30, 0.32, 0.28};
  std::array<double, 4> mainstream_probs{0.70, 0.82, 0.86, 0.83};
};

/// Class 0 overcoverage, class 1 hard-to-reach target, class 2 mainstream
/// target, all over registers A-D with conditional independence.
GeneratingConfig preset_critique(std::int64_t population_size, std::uint64_t seed,
                                 const CritiqueSettings& settings = {});

/// P(C=1, D=1) of the 2x2 table with margins (a, b) and odds ratio psi.
double plackett_cell11(double a, double b, double psi);

/// Scenario 1 weights and probabilities with a class-specific C-D block whose
/// per-class odds ratios are `odds_ratios` and whose margins keep the
/// Scenario 1 values ([AX][BX][CDX]).
GeneratingConfig preset_cd_odds_ratios(std::int64_t population_size, std::uint64_t seed,
                                       std::array<double, 2> odds_ratios);

}  // namespace lcmcr
