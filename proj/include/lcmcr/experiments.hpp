#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "lcmcr/emfit.hpp"
#include "lcmcr/io.hpp"
#include "lcmcr/popsize.hpp"
#include "lcmcr/simgen.hpp"

namespace lcmcr {

/// One simulated-and-fitted replicate. Biases are (estimate - truth) / truth.
struct ReplicateRecord {
  int replicate = 0;
  std::uint64_t seed = 0;
  bool failed = false;
  std::string diagnostic;
  bool converged = false;
  bool boundary = false;
  double cond_loglik = 0.0;
  int iterations = 0;
  double max_trace_decrease = 0.0;

  std::vector<std::int64_t> true_class_sizes;
  std::int64_t true_total = 0;
  std::int64_t true_target = 0;

  Vector fitted_weights;
  Matrix fitted_margins;
  Vector class_sizes;
  std::vector<int> target_classes;
  double est_standard = 0.0;
  double est_target_only = 0.0;
  double rel_bias_target_only = 0.0;        ///< vs true target size
  double rel_bias_standard_vs_total = 0.0;  ///< vs N
  double rel_bias_standard_vs_target = 0.0;

  /// Critique only: observed posterior mass of the fitted low-inclusion class
  /// split by the generating class each unit came from.
  Vector origin_mass;
  double low_class_mass = 0.0;
};

struct SummaryStats {
  double mean = 0.0;
  double median = 0.0;
  int count = 0;
};

/// Headline aggregates over replicates that neither failed nor stopped
/// without converging; those are counted but left out.
struct Aggregates {
  int replicates = 0;
  int included = 0;
  int failures = 0;
  int nonconverged = 0;
  int boundary = 0;
  SummaryStats target_only;
  SummaryStats standard_vs_total;
  SummaryStats standard_vs_target;
  double fraction_target_only_negative = 0.0;
  Vector mean_weights;
  Matrix mean_margins;
  Vector mean_origin_share;
  double max_trace_decrease = 0.0;
};

Aggregates aggregate(const std::vector<ReplicateRecord>& records);

struct ExperimentReport {
  std::string experiment_id;
  std::uint64_t seed = 0;
  Json config;
  std::vector<ReplicateRecord> records;
  Aggregates aggregates;
};

struct Scenario1Options {
  int reps = 50;
  std::int64_t population_size = 100000;
  std::uint64_t seed = 0;
  FitConfig fit;
  /// Absent: independence variant. Present: shared C-D term in both the
  /// generating model and the fitted model.
  std::optional<double> cd_interaction;
  bool fixed_classes = false;
  TargetRule rule;
  int threads = 1;
};

struct CritiqueOptions {
  int reps = 50;
  std::int64_t population_size = 100000;
  std::uint64_t seed = 0;
  FitConfig fit;
  CritiqueSettings settings;
  int fitted_classes = 2;
  bool fixed_classes = false;
  TargetRule rule;
  int threads = 1;
};

/// Replicate r uses seed derive_seed(seed, r) for simulation and
/// derive_seed(that, 1) for fitting. Replicates run in parallel.
ExperimentReport run_scenario1(const Scenario1Options& options);
ExperimentReport run_critique(const CritiqueOptions& options);

struct DfRow {
  std::string notation;
  std::int64_t parameter_count = 0;
  std::int64_t degrees_of_freedom = 0;
  DfFlag flag = DfFlag::ok;
};

/// Four-register, two-class models with progressively more dependence,
/// ending at the first negative-df model.
std::vector<DfRow> df_family_table();

Json to_json(const ExperimentReport& report);
Json to_json(const std::vector<DfRow>& rows);

/// Flat per-replicate CSV for plotting.
void write_records_csv(std::ostream& out, const ExperimentReport& report);

}  // namespace lcmcr
