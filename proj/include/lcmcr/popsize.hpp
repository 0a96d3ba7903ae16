#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcmcr/counts.hpp"
#include "lcmcr/emfit.hpp"
#include "lcmcr/model.hpp"

namespace lcmcr {

/// Class-wise size estimates under both readings of the latent classes.
///
/// total_all_classes adds every N_x (latent classes as heterogeneity);
/// total_target_only adds only the designated target classes (the rest
/// treated as overcoverage). Both are always filled.
struct PopEstimate {
  Vector class_sizes;             ///< N_x = m_x / (1 - q_x)
  Vector observed_class_counts;   ///< m_x, posterior-weighted observed units
  Vector miss_probs;              ///< q_x
  double total_all_classes = 0.0;
  double total_target_only = 0.0;
  std::vector<int> target_classes;
  std::int64_t observed_n = 0;
  /// Which total the caller asked for: "standard" or "overcoverage".
  std::string headline;

  double headline_value() const { return headline == "overcoverage" ? total_target_only : total_all_classes; }
};

/// q_x above this is treated as an unbounded class size.
inline constexpr double kUnboundedMissTolerance = 1e-9;

/// Horvitz-Thompson style inflation of each class's posterior mass.
/// Throws NumericalError naming the class when q_x is within 1e-9 of 1.
Vector class_sizes(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts);

/// Headline = sum over all classes.
PopEstimate estimate_standard(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts);

/// Headline = sum over `target_classes` only.
PopEstimate estimate_overcoverage(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts,
                                  const std::vector<int>& target_classes);

struct TargetRule {
  enum class Kind { highest_mean_inclusion, all, explicit_list };
  Kind kind = Kind::highest_mean_inclusion;
  std::vector<int> classes;

  /// "highest", "all", or a comma-separated list of class indices.
  static TargetRule parse(const std::string& text);
  std::string to_string() const;
};

std::vector<int> designate_target(const ModelSpec& spec, const FitResult& fit, const TargetRule& rule);

}  // namespace lcmcr
