#include "lcmcr/structure.hpp"

#include <cmath>

#include "lcmcr/rng.hpp"

namespace lcmcr {

namespace {

constexpr double kStep = 1e-6;
constexpr double kRankThreshold = 1e-8;
constexpr double kInteriorMargin = 1e-8;
constexpr int kMaxRankRegisters = 10;

double logit(double p) { return std::log(p) - std::log1p(-p); }
double logistic(double t) { return 1.0 / (1.0 + std::exp(-t)); }

// Softmax with the last entry as reference.
Vector softmax_last(const Eigen::Ref<const Vector>& theta) {
  Vector out(theta.size() + 1);
  const double m = std::max(0.0, theta.size() ? theta.maxCoeff() : 0.0);
  out.head(theta.size()) = (theta.array() - m).exp();
  out[theta.size()] = std::exp(-m);
  return out / out.sum();
}

void require_interior(double v, const char* what) {
  if (!(v > kInteriorMargin && v < 1.0 - kInteriorMargin))
    throw ValidationError("degenerate-params", std::string(what) + " lies on the boundary of its simplex");
}

ParameterSet random_interior(const ModelSpec& spec, Rng& rng) {
  const int L = spec.num_classes;
  const int K = spec.num_registers();
  Vector weights(L);
  for (int x = 0; x < L; ++x) weights[x] = rng.uniform(0.1, 1.0);
  weights /= weights.sum();
  Matrix probs(L, K);
  for (int x = 0; x < L; ++x)
    for (int k = 0; k < K; ++k) probs(x, k) = rng.uniform(0.1, 0.9);
  ParameterSet params = independence_parameters(spec, weights, probs);
  for (auto& t : params.block_tables) {
    for (Eigen::Index x = 0; x < t.rows(); ++x) {
      for (Eigen::Index c = 0; c < t.cols(); ++c) t(x, c) = rng.uniform(0.1, 1.0);
      t.row(x) /= t.row(x).sum();
    }
  }
  for (auto& eta : params.shared_interactions)
    for (Eigen::Index j = 0; j < eta.size(); ++j) eta[j] = rng.uniform(-1.0, 1.0);
  sync_block_margins(spec, params);
  return params;
}

Vector conditional_cells(const ModelSpec& spec, const ParameterSet& params) {
  const Vector full = full_distribution(spec, params);
  return full.tail(full.size() - 1) / (1.0 - full[0]);
}

int numerical_rank(const Matrix& jacobian) {
  Eigen::JacobiSVD<Matrix> svd(jacobian);
  const Vector& s = svd.singularValues();
  if (s.size() == 0 || s[0] <= 0.0) return 0;
  return static_cast<int>((s.array() > kRankThreshold * s[0]).count());
}

}  // namespace

std::string to_string(DfFlag flag) {
  switch (flag) {
    case DfFlag::ok:
      return "ok";
    case DfFlag::saturated:
      return "saturated";
    case DfFlag::negative:
      return "negative";
  }
  return "unknown";
}

std::int64_t parameter_count(const ModelSpec& spec) {
  require_valid(spec);
  const std::int64_t L = spec.num_classes;
  std::int64_t count = L - 1;
  for (const auto& b : blocks(spec)) {
    const std::int64_t m = b.size();
    const std::int64_t cells = std::int64_t{1} << m;
    switch (b.kind) {
      case BlockKind::independent:
        count += L;
        break;
      case BlockKind::class_specific:
        count += L * (cells - 1);
        break;
      case BlockKind::shared:
        count += L * m + (cells - 1 - m);
        break;
    }
  }
  return count;
}

StructureReport degrees_of_freedom(const ModelSpec& spec) {
  StructureReport report;
  report.independent_cells = (std::int64_t{1} << spec.num_registers()) - 2;
  report.parameter_count = parameter_count(spec);
  report.degrees_of_freedom = report.independent_cells - report.parameter_count;
  report.df_flag = report.degrees_of_freedom > 0    ? DfFlag::ok
                   : report.degrees_of_freedom == 0 ? DfFlag::saturated
                                                    : DfFlag::negative;
  return report;
}

Vector to_chart(const ModelSpec& spec, const ParameterSet& params) {
  require_valid(spec, params);
  const int L = spec.num_classes;
  std::vector<double> theta;
  if (L > 1)
    for (int x = 0; x < L; ++x) require_interior(params.class_weights[x], "class weight");
  for (int x = 0; x + 1 < L; ++x)
    theta.push_back(std::log(params.class_weights[x]) - std::log(params.class_weights[L - 1]));
  for (const auto& b : blocks(spec)) {
    if (b.kind == BlockKind::class_specific) {
      const auto& t = params.block_tables[static_cast<std::size_t>(b.slot)];
      for (int x = 0; x < L; ++x) {
        for (Eigen::Index c = 0; c < t.cols(); ++c) require_interior(t(x, c), "block table cell");
        for (Eigen::Index c = 0; c + 1 < t.cols(); ++c)
          theta.push_back(std::log(t(x, c)) - std::log(t(x, t.cols() - 1)));
      }
      continue;
    }
    for (int k : b.registers) {
      for (int x = 0; x < L; ++x) {
        require_interior(params.inclusion_probs(x, k), "inclusion probability");
        theta.push_back(logit(params.inclusion_probs(x, k)));
      }
    }
    if (b.kind == BlockKind::shared) {
      const auto& eta = params.shared_interactions[static_cast<std::size_t>(b.slot)];
      theta.insert(theta.end(), eta.data(), eta.data() + eta.size());
    }
  }
  return Eigen::Map<Vector>(theta.data(), static_cast<Eigen::Index>(theta.size()));
}

ParameterSet from_chart(const ModelSpec& spec, const Vector& theta) {
  require_valid(spec);
  const int L = spec.num_classes;
  const int K = spec.num_registers();
  Eigen::Index at = 0;
  ParameterSet params =
      independence_parameters(spec, softmax_last(theta.segment(0, L - 1)), Matrix::Constant(L, K, 0.5));
  at += L - 1;
  for (const auto& b : blocks(spec)) {
    if (b.kind == BlockKind::class_specific) {
      auto& t = params.block_tables[static_cast<std::size_t>(b.slot)];
      for (int x = 0; x < L; ++x) {
        t.row(x) = softmax_last(theta.segment(at, t.cols() - 1)).transpose();
        at += t.cols() - 1;
      }
      continue;
    }
    for (int k : b.registers)
      for (int x = 0; x < L; ++x) params.inclusion_probs(x, k) = logistic(theta[at++]);
    if (b.kind == BlockKind::shared) {
      auto& eta = params.shared_interactions[static_cast<std::size_t>(b.slot)];
      eta = theta.segment(at, eta.size());
      at += eta.size();
    }
  }
  if (at != theta.size()) throw ValidationError("dimension-mismatch", "chart vector has the wrong length");
  sync_block_margins(spec, params);
  return params;
}

RankCheck jacobian_rank_check(const ModelSpec& spec, const std::optional<ParameterSet>& params, int num_points,
                              std::uint64_t seed) {
  require_valid(spec);
  if (spec.num_registers() > kMaxRankRegisters)
    throw CapacityError("rank check supports at most " + std::to_string(kMaxRankRegisters) + " registers");
  if (num_points < 0) throw ValidationError("bad-argument", "num_points must be non-negative");

  std::vector<ParameterSet> points;
  if (params) points.push_back(*params);
  for (int i = 0; i < num_points; ++i) {
    Rng rng(derive_seed(seed, static_cast<std::uint64_t>(i)));
    points.push_back(random_interior(spec, rng));
  }
  if (points.empty()) throw ValidationError("bad-argument", "rank check needs at least one point");

  const auto P = parameter_count(spec);
  RankCheck out;
  for (const auto& point : points) {
    const Vector theta = to_chart(spec, point);
    Matrix jacobian((Eigen::Index{1} << spec.num_registers()) - 1, theta.size());
    for (Eigen::Index j = 0; j < theta.size(); ++j) {
      Vector plus = theta;
      Vector minus = theta;
      plus[j] += kStep;
      minus[j] -= kStep;
      jacobian.col(j) = (conditional_cells(spec, from_chart(spec, plus)) -
                         conditional_cells(spec, from_chart(spec, minus))) /
                        (2.0 * kStep);
    }
    out.point_ranks.push_back(numerical_rank(jacobian));
    out.rank = std::max(out.rank, out.point_ranks.back());
  }
  out.rank_deficient = out.rank < P;
  return out;
}

}  // namespace lcmcr
