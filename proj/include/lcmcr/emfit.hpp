#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "lcmcr/counts.hpp"
#include "lcmcr/model.hpp"
#include "lcmcr/structure.hpp"

namespace lcmcr {

struct FitConfig {
  int num_starts = 20;
  /// Relative change in the conditional log-likelihood that ends a start;
  /// a max-abs parameter change below tol / 10 also ends it.
  double tol = 1e-8;
  int max_iter = 5000;
  std::uint64_t seed = 0;
  double ipf_tol = 1e-10;
  int ipf_max_iter = 1000;
  /// Caps workers across starts; results do not depend on it.
  int threads = 1;
  /// Fit even when the model has negative degrees of freedom.
  bool force = false;
};

std::vector<Violation> validate(const FitConfig& config);

/// Capture-conditional multinomial log-likelihood
///   sum_r n_r log(P(r) / (1 - P(0))),
/// with cell probabilities floored at kLikelihoodEpsilon.
double cond_loglik(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts);

struct EStepResult {
  /// 2^K x L responsibilities; row 0 is the class split of the unobserved cell.
  Matrix posteriors;
  /// Expected complete-data counts, 2^K x L. Row 0 imputes the unobserved
  /// units as n * pi_x q_x / (1 - P(0)).
  Matrix expected;
  /// cond_loglik of the parameters the step was taken at.
  double cond_loglik = 0.0;
};

EStepResult e_step(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts);

struct MStepControls {
  double ipf_tol = 1e-10;
  int ipf_max_iter = 1000;
};

/// Complete-data maximisation. Independent registers and class-specific
/// tables use weighted proportions; shared terms run IPF on the
/// (block x class) table, warm-started from `current` when given.
/// Throws NumericalError when IPF does not converge.
ParameterSet m_step(const ModelSpec& spec, const Matrix& expected, const MStepControls& controls = {},
                    const ParameterSet* current = nullptr);

struct SharedBlockFit {
  Matrix fitted;
  int iterations = 0;
  bool converged = false;
};

/// IPF of a 2^m x L table to its per-class one-register margins and its
/// pooled (summed over classes) block table, starting from `start`.
/// Convergence is the largest margin discrepancy relative to the table total.
SharedBlockFit fit_shared_block(const Matrix& expected_block, const Matrix& start, double tol, int max_iter);

/// Class order that sorts classes by ascending mean register margin, ties
/// broken by the lexicographic margin sequence, then by original index.
std::vector<int> canonical_order(const ModelSpec& spec, const ParameterSet& params);
ParameterSet permute_classes(const ParameterSet& params, const std::vector<int>& order);
ParameterSet canonicalize(const ModelSpec& spec, const ParameterSet& params);

/// Start 0 splits observed units into L groups by number of captures and
/// uses each group's capture rates; later starts are seeded uniform draws
/// kept 0.1 away from the simplex corners.
ParameterSet initial_parameters(const ModelSpec& spec, const CaptureCounts& counts, int start_index,
                                std::uint64_t seed);

struct StartSummary {
  int start_index = 0;
  double cond_loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  bool failed = false;
  std::string diagnostic;
  std::vector<double> loglik_trace;
};

struct BoundaryEstimate {
  int latent_class = 0;
  int register_index = -1;  ///< -1 flags the class weight
  double value = 0.0;
};

/// Estimates within this distance of 0 or 1 are reported as boundary.
inline constexpr double kBoundaryTolerance = 1e-6;

struct FitResult {
  ParameterSet params;  ///< canonicalized
  double cond_loglik = 0.0;
  int iterations = 0;
  bool converged = false;
  int start_index = 0;
  std::vector<double> loglik_trace;
  Matrix posteriors;  ///< 2^K x L at params
  StructureReport structure;
  double aic = 0.0;
  double bic = 0.0;
  std::vector<BoundaryEstimate> boundary;
  std::vector<StartSummary> starts;
};

/// Multi-start EM on the capture-conditional likelihood. The start with the
/// highest log-likelihood wins, ties going to the lowest start index.
/// Refuses negative degrees of freedom unless config.force is set.
FitResult fit(const ModelSpec& spec, const CaptureCounts& counts, const FitConfig& config);

/// Largest per-step decrease of a log-likelihood trace (0 when monotone).
double max_trace_decrease(const std::vector<double>& trace);

}  // namespace lcmcr
