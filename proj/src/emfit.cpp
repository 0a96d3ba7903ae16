#include "lcmcr/emfit.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <numeric>

#include "lcmcr/parallel.hpp"
#include "lcmcr/rng.hpp"

namespace lcmcr {

namespace {

constexpr double kMaxLogit = 40.0;
constexpr double kTinyMass = 1e-300;

void require_matching(const ModelSpec& spec, const CaptureCounts& counts) {
  if (counts.num_registers() != spec.num_registers())
    throw ValidationError("dimension-mismatch", "counts have " + std::to_string(counts.num_registers()) +
                                                    " registers, spec has " +
                                                    std::to_string(spec.num_registers()));
}

double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Sum over profiles of the expected table restricted to a block: 2^m x L.
Matrix block_table(const Matrix& expected, const Block& b, int num_registers) {
  Matrix out = Matrix::Zero(b.num_cells(), expected.cols());
  for (Eigen::Index r = 0; r < expected.rows(); ++r)
    out.row(b.cell(static_cast<std::uint32_t>(r), num_registers)) += expected.row(r);
  return out;
}

double max_abs_change(const ParameterSet& a, const ParameterSet& b) {
  double change = (a.class_weights - b.class_weights).cwiseAbs().maxCoeff();
  change = std::max(change, (a.inclusion_probs - b.inclusion_probs).cwiseAbs().maxCoeff());
  for (std::size_t j = 0; j < a.block_tables.size(); ++j)
    change = std::max(change, (a.block_tables[j] - b.block_tables[j]).cwiseAbs().maxCoeff());
  for (std::size_t j = 0; j < a.shared_interactions.size(); ++j)
    if (a.shared_interactions[j].size())
      change = std::max(change, (a.shared_interactions[j] - b.shared_interactions[j]).cwiseAbs().maxCoeff());
  return change;
}

}  // namespace

std::vector<Violation> validate(const FitConfig& config) {
  std::vector<Violation> out;
  if (config.num_starts < 1) out.push_back({"bad-fit-config", "num_starts must be at least 1"});
  if (!(config.tol > 0.0)) out.push_back({"bad-fit-config", "tol must be positive"});
  if (config.max_iter < 1) out.push_back({"bad-fit-config", "max_iter must be at least 1"});
  if (!(config.ipf_tol > 0.0)) out.push_back({"bad-fit-config", "ipf_tol must be positive"});
  if (config.ipf_max_iter < 1) out.push_back({"bad-fit-config", "ipf_max_iter must be at least 1"});
  return out;
}

EStepResult e_step(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts) {
  require_matching(spec, counts);
  const Matrix joint = class_conditional(spec, params) * params.class_weights.asDiagonal();
  const Vector cell = joint.rowwise().sum();
  const Eigen::Index cells = cell.size();
  const double observed_mass = std::max(cell.tail(cells - 1).sum(), kLikelihoodEpsilon);
  const auto n = static_cast<double>(counts.total());

  EStepResult out;
  out.posteriors.resize(cells, joint.cols());
  out.expected.resize(cells, joint.cols());
  long double loglik = 0.0L;
  const double log_observed = std::log(observed_mass);
  for (Eigen::Index r = 0; r < cells; ++r) {
    if (cell[r] > 0.0)
      out.posteriors.row(r) = joint.row(r) / cell[r];
    else
      out.posteriors.row(r) = params.class_weights.transpose();
    out.posteriors.row(r) /= out.posteriors.row(r).sum();
    if (r == 0) {
      out.expected.row(0) = joint.row(0) * (n / observed_mass);
      continue;
    }
    const auto c = static_cast<double>(counts[static_cast<std::uint32_t>(r)]);
    out.expected.row(r) = c * out.posteriors.row(r);
    if (c > 0.0) loglik += c * (std::log(std::max(cell[r], kLikelihoodEpsilon)) - log_observed);
  }
  out.cond_loglik = static_cast<double>(loglik);
  return out;
}

double cond_loglik(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts) {
  require_matching(spec, counts);
  const Vector cell = full_distribution(spec, params);
  const double observed_mass = std::max(cell.tail(cell.size() - 1).sum(), kLikelihoodEpsilon);
  const double log_observed = std::log(observed_mass);
  long double loglik = 0.0L;
  for (std::uint32_t r = 1; r < counts.num_cells(); ++r) {
    const auto c = static_cast<double>(counts[r]);
    if (c > 0.0) loglik += c * (std::log(std::max(cell[r], kLikelihoodEpsilon)) - log_observed);
  }
  return static_cast<double>(loglik);
}

SharedBlockFit fit_shared_block(const Matrix& expected_block, const Matrix& start, double tol, int max_iter) {
  const auto cells = static_cast<std::uint32_t>(expected_block.rows());
  const int m = std::countr_zero(cells);
  const Eigen::Index L = expected_block.cols();
  const double total = std::max(expected_block.sum(), kTinyMass);

  // margins[i](b, x): mass of class x with register i of the block at b.
  std::vector<Matrix> margins(static_cast<std::size_t>(m), Matrix::Zero(2, L));
  for (int i = 0; i < m; ++i) {
    const std::uint32_t bit = 1u << (m - 1 - i);
    for (std::uint32_t c = 0; c < cells; ++c) margins[static_cast<std::size_t>(i)].row((c & bit) ? 1 : 0) += expected_block.row(c);
  }
  const Vector pooled = expected_block.rowwise().sum();

  SharedBlockFit out{start, 0, false};
  Matrix& F = out.fitted;
  auto rescale = [](double target, double current) { return current > 0.0 ? target / current : 0.0; };
  while (out.iterations < max_iter) {
    ++out.iterations;
    for (int i = 0; i < m; ++i) {
      const std::uint32_t bit = 1u << (m - 1 - i);
      Matrix current = Matrix::Zero(2, L);
      for (std::uint32_t c = 0; c < cells; ++c) current.row((c & bit) ? 1 : 0) += F.row(c);
      for (std::uint32_t c = 0; c < cells; ++c) {
        const int b = (c & bit) ? 1 : 0;
        for (Eigen::Index x = 0; x < L; ++x)
          F(c, x) *= rescale(margins[static_cast<std::size_t>(i)](b, x), current(b, x));
      }
    }
    const Vector current = F.rowwise().sum();
    for (std::uint32_t c = 0; c < cells; ++c) F.row(c) *= rescale(pooled[c], current[c]);

    double gap = 0.0;
    for (int i = 0; i < m; ++i) {
      const std::uint32_t bit = 1u << (m - 1 - i);
      Matrix fitted = Matrix::Zero(2, L);
      for (std::uint32_t c = 0; c < cells; ++c) fitted.row((c & bit) ? 1 : 0) += F.row(c);
      gap = std::max(gap, (fitted - margins[static_cast<std::size_t>(i)]).cwiseAbs().maxCoeff());
    }
    if (gap / total < tol) {
      out.converged = true;
      break;
    }
  }
  return out;
}

ParameterSet m_step(const ModelSpec& spec, const Matrix& expected, const MStepControls& controls,
                    const ParameterSet* current) {
  require_valid(spec);
  const int K = spec.num_registers();
  const int L = spec.num_classes;
  if (expected.rows() != (Eigen::Index{1} << K) || expected.cols() != L)
    throw ValidationError("dimension-mismatch", "expected table must be 2^K x L");
  if (!expected.allFinite() || (expected.array() < 0.0).any())
    throw ValidationError("negative-expected-count", "expected table must be finite and non-negative");

  const Vector class_mass = expected.colwise().sum().transpose();
  const double total = class_mass.sum();
  if (!(total > 0.0)) throw ValidationError("empty-counts", "expected table has no mass");

  ParameterSet next = current ? *current
                              : independence_parameters(spec, Vector::Constant(L, 1.0 / L),
                                                        Matrix::Constant(L, K, 0.5));
  next.class_weights = class_mass / total;
  auto has_mass = [&](int x) { return class_mass[x] > kTinyMass; };

  const auto layout = blocks(spec);
  for (std::size_t bi = 0; bi < layout.size(); ++bi) {
    const Block& b = layout[bi];
    const Matrix table = block_table(expected, b, K);
    switch (b.kind) {
      case BlockKind::independent: {
        const int k = b.registers.front();
        for (int x = 0; x < L; ++x)
          if (has_mass(x)) next.inclusion_probs(x, k) = std::clamp(table(1, x) / table.col(x).sum(), 0.0, 1.0);
        break;
      }
      case BlockKind::class_specific: {
        auto& t = next.block_tables[static_cast<std::size_t>(b.slot)];
        for (int x = 0; x < L; ++x)
          if (has_mass(x)) t.row(x) = table.col(x).transpose() / table.col(x).sum();
        break;
      }
      case BlockKind::shared: {
        Matrix start(b.num_cells(), L);
        for (int x = 0; x < L; ++x) {
          const Vector d = current ? block_distribution(spec, *current, static_cast<int>(bi), x)
                                   : Vector::Constant(b.num_cells(), 1.0 / b.num_cells());
          start.col(x) = d * class_mass[x];
        }
        const SharedBlockFit ipf = fit_shared_block(table, start, controls.ipf_tol, controls.ipf_max_iter);
        if (!ipf.converged)
          throw NumericalError("IPF for shared term did not converge within " +
                               std::to_string(controls.ipf_max_iter) + " iterations");
        const auto cells = interaction_cells(b.size());
        Vector eta = Vector::Zero(static_cast<Eigen::Index>(cells.size()));
        double eta_mass = 0.0;
        for (int x = 0; x < L; ++x) {
          if (!has_mass(x)) continue;
          const Vector log_d = (ipf.fitted.col(x).array() / class_mass[x]).max(kTinyMass).log();
          std::vector<double> logits(static_cast<std::size_t>(b.size()));
          for (int i = 0; i < b.size(); ++i) {
            const std::uint32_t single = 1u << (b.size() - 1 - i);
            logits[static_cast<std::size_t>(i)] = std::clamp(log_d[single] - log_d[0], -kMaxLogit, kMaxLogit);
            next.inclusion_probs(x, b.registers[static_cast<std::size_t>(i)]) =
                logistic(logits[static_cast<std::size_t>(i)]);
          }
          for (std::size_t j = 0; j < cells.size(); ++j) {
            double v = log_d[cells[j]] - log_d[0];
            for (int i = 0; i < b.size(); ++i)
              if (cells[j] & (1u << (b.size() - 1 - i))) v -= logits[static_cast<std::size_t>(i)];
            eta[static_cast<Eigen::Index>(j)] += class_mass[x] * v;
          }
          eta_mass += class_mass[x];
        }
        if (eta_mass > 0.0) next.shared_interactions[static_cast<std::size_t>(b.slot)] = eta / eta_mass;
        break;
      }
    }
  }
  sync_block_margins(spec, next);
  return next;
}

std::vector<int> canonical_order(const ModelSpec& spec, const ParameterSet& params) {
  const Matrix margins = register_margins(spec, params);
  std::vector<int> order(static_cast<std::size_t>(spec.num_classes));
  std::iota(order.begin(), order.end(), 0);
  const Vector means = margins.rowwise().mean();
  std::stable_sort(order.begin(), order.end(), [&](int a, int b) {
    if (means[a] != means[b]) return means[a] < means[b];
    for (Eigen::Index k = 0; k < margins.cols(); ++k)
      if (margins(a, k) != margins(b, k)) return margins(a, k) < margins(b, k);
    return false;
  });
  return order;
}

ParameterSet permute_classes(const ParameterSet& params, const std::vector<int>& order) {
  ParameterSet out = params;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto src = static_cast<Eigen::Index>(order[i]);
    const auto dst = static_cast<Eigen::Index>(i);
    out.class_weights[dst] = params.class_weights[src];
    out.inclusion_probs.row(dst) = params.inclusion_probs.row(src);
    for (std::size_t j = 0; j < params.block_tables.size(); ++j)
      out.block_tables[j].row(dst) = params.block_tables[j].row(src);
  }
  return out;
}

ParameterSet canonicalize(const ModelSpec& spec, const ParameterSet& params) {
  return permute_classes(params, canonical_order(spec, params));
}

ParameterSet initial_parameters(const ModelSpec& spec, const CaptureCounts& counts, int start_index,
                                std::uint64_t seed) {
  require_valid(spec);
  require_matching(spec, counts);
  const int K = spec.num_registers();
  const int L = spec.num_classes;

  if (start_index == 0) {
    // Observed units ordered by number of captures, cut into L equal groups.
    std::vector<std::uint32_t> profiles;
    for (std::uint32_t r = 1; r < counts.num_cells(); ++r)
      if (counts[r] > 0) profiles.push_back(r);
    std::stable_sort(profiles.begin(), profiles.end(), [](std::uint32_t a, std::uint32_t b) {
      return std::popcount(a) < std::popcount(b);
    });
    const auto n = static_cast<double>(counts.total());
    Matrix captured = Matrix::Zero(L, K);
    Vector mass = Vector::Zero(L);
    double begin = 0.0;
    for (std::uint32_t r : profiles) {
      const double end = begin + static_cast<double>(counts[r]);
      for (int g = 0; g < L; ++g) {
        const double lo = n * g / L;
        const double hi = n * (g + 1) / L;
        const double overlap = std::max(0.0, std::min(end, hi) - std::max(begin, lo));
        if (overlap <= 0.0) continue;
        mass[g] += overlap;
        for (int k = 0; k < K; ++k)
          if (r & register_bit(k, K)) captured(g, k) += overlap;
      }
      begin = end;
    }
    Matrix probs(L, K);
    for (int g = 0; g < L; ++g)
      for (int k = 0; k < K; ++k)
        probs(g, k) = std::clamp(mass[g] > 0.0 ? captured(g, k) / mass[g] : 0.5, 0.05, 0.95);
    return independence_parameters(spec, Vector::Constant(L, 1.0 / L), probs);
  }

  Rng rng(derive_seed(seed, static_cast<std::uint64_t>(start_index)));
  Vector weights(L);
  for (int x = 0; x < L; ++x) weights[x] = 0.1 + rng.uniform();
  weights /= weights.sum();
  Matrix probs(L, K);
  for (int x = 0; x < L; ++x)
    for (int k = 0; k < K; ++k) probs(x, k) = rng.uniform(0.1, 0.9);
  ParameterSet params = independence_parameters(spec, weights, probs);
  for (auto& t : params.block_tables) {
    for (Eigen::Index x = 0; x < t.rows(); ++x) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(x, c) = 0.1 + rng.uniform();
      t.row(x) /= t.row(x).sum();
    }
  }
  sync_block_margins(spec, params);
  return params;
}

double max_trace_decrease(const std::vector<double>& trace) {
  double worst = 0.0;
  for (std::size_t i = 1; i < trace.size(); ++i) worst = std::max(worst, trace[i - 1] - trace[i]);
  return worst;
}

namespace {

StartSummary run_start(const ModelSpec& spec, const CaptureCounts& counts, const FitConfig& config, int start,
                       ParameterSet& params) {
  StartSummary summary;
  summary.start_index = start;
  const MStepControls controls{config.ipf_tol, config.ipf_max_iter};
  try {
    params = initial_parameters(spec, counts, start, config.seed);
    double change = std::numeric_limits<double>::infinity();
    for (int it = 0;; ++it) {
      const EStepResult step = e_step(spec, params, counts);
      summary.loglik_trace.push_back(step.cond_loglik);
      if (it > 0) {
        const double prev = summary.loglik_trace[static_cast<std::size_t>(it - 1)];
        const double rel = std::abs(step.cond_loglik - prev) / std::max(std::abs(prev), kTinyMass);
        if (rel < config.tol || change < config.tol / 10.0) {
          summary.converged = true;
          break;
        }
      }
      if (it == config.max_iter) break;
      ParameterSet next = m_step(spec, step.expected, controls, &params);
      change = max_abs_change(next, params);
      params = std::move(next);
    }
  } catch (const NumericalError& e) {
    summary.failed = true;
    summary.diagnostic = e.what();
  }
  summary.iterations = summary.loglik_trace.empty() ? 0 : static_cast<int>(summary.loglik_trace.size()) - 1;
  summary.cond_loglik = summary.loglik_trace.empty() ? -std::numeric_limits<double>::infinity()
                                                     : summary.loglik_trace.back();
  return summary;
}

}  // namespace

FitResult fit(const ModelSpec& spec, const CaptureCounts& counts, const FitConfig& config) {
  require_valid(spec);
  require_matching(spec, counts);
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  if (spec.num_registers() > kMaxDenseRegisters)
    throw CapacityError("fitting supports at most " + std::to_string(kMaxDenseRegisters) + " registers");

  FitResult result;
  result.structure = degrees_of_freedom(spec);
  if (result.structure.df_flag == DfFlag::negative && !config.force)
    throw ValidationError("negative-df", "model " + notation(spec) + " has " +
                                             std::to_string(result.structure.degrees_of_freedom) +
                                             " degrees of freedom; pass force to fit anyway");

  const auto S = static_cast<std::size_t>(config.num_starts);
  std::vector<StartSummary> starts(S);
  std::vector<ParameterSet> finals(S);
  parallel_for(config.num_starts, config.threads, [&](int s) {
    starts[static_cast<std::size_t>(s)] = run_start(spec, counts, config, s, finals[static_cast<std::size_t>(s)]);
  });

  int best = -1;
  for (std::size_t s = 0; s < S; ++s) {
    if (starts[s].failed) continue;
    if (best < 0 || starts[s].cond_loglik > starts[static_cast<std::size_t>(best)].cond_loglik)
      best = static_cast<int>(s);
  }
  if (best < 0) throw NumericalError("every EM start failed: " + starts.front().diagnostic);

  const auto& winner = starts[static_cast<std::size_t>(best)];
  result.params = canonicalize(spec, finals[static_cast<std::size_t>(best)]);
  const EStepResult step = e_step(spec, result.params, counts);
  result.cond_loglik = step.cond_loglik;
  result.posteriors = step.posteriors;
  result.iterations = winner.iterations;
  result.converged = winner.converged;
  result.start_index = best;
  result.loglik_trace = winner.loglik_trace;
  const auto P = static_cast<double>(result.structure.parameter_count);
  result.aic = -2.0 * result.cond_loglik + 2.0 * P;
  result.bic = -2.0 * result.cond_loglik + P * std::log(static_cast<double>(counts.total()));

  const Matrix margins = register_margins(spec, result.params);
  auto near_boundary = [](double v) { return v < kBoundaryTolerance || v > 1.0 - kBoundaryTolerance; };
  for (int x = 0; x < spec.num_classes; ++x) {
    if (spec.num_classes > 1 && near_boundary(result.params.class_weights[x]))
      result.boundary.push_back({x, -1, result.params.class_weights[x]});
    for (int k = 0; k < spec.num_registers(); ++k)
      if (near_boundary(margins(x, k))) result.boundary.push_back({x, k, margins(x, k)});
  }
  result.starts = std::move(starts);
  return result;
}

}  // namespace lcmcr
