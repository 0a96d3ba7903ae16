#include "lcmcr/simgen.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <thread>

#include "lcmcr/rng.hpp"

namespace lcmcr {

namespace {

const std::vector<std::string> kRegistersABCD{"A", "B", "C", "D"};

Matrix rows_of(std::initializer_list<std::array<double, 4>> rows) {
  Matrix m(static_cast<Eigen::Index>(rows.size()), 4);
  Eigen::Index x = 0;
  for (const auto& row : rows) {
    for (Eigen::Index k = 0; k < 4; ++k) m(x, k) = row[static_cast<std::size_t>(k)];
    ++x;
  }
  return m;
}

std::vector<std::int64_t> fixed_class_sizes(const Vector& weights, std::int64_t n) {
  const auto L = static_cast<std::size_t>(weights.size());
  std::vector<std::int64_t> sizes(L);
  std::vector<double> remainder(L);
  std::int64_t assigned = 0;
  for (std::size_t x = 0; x < L; ++x) {
    const double expected = weights[static_cast<Eigen::Index>(x)] * static_cast<double>(n);
    sizes[x] = static_cast<std::int64_t>(std::floor(expected));
    remainder[x] = expected - static_cast<double>(sizes[x]);
    assigned += sizes[x];
  }
  std::vector<std::size_t> order(L);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return remainder[a] > remainder[b]; });
  for (std::size_t i = 0; assigned < n; i = (i + 1) % L, ++assigned) ++sizes[order[i]];
  return sizes;
}

// Inverse-CDF sampler that never returns a zero-probability cell.
class Categorical {
 public:
  explicit Categorical(const Eigen::Ref<const Vector>& probs) : cdf_(static_cast<std::size_t>(probs.size())) {
    double acc = 0.0;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
      acc += probs[i];
      cdf_[static_cast<std::size_t>(i)] = acc;
      if (probs[i] > 0.0) last_positive_ = static_cast<std::size_t>(i);
    }
  }

  std::size_t draw(double u) const {
    const double target = u * cdf_.back();
    auto it = std::upper_bound(cdf_.begin(), cdf_.end(), target);
    return std::min(static_cast<std::size_t>(it - cdf_.begin()), last_positive_);
  }

 private:
  std::vector<double> cdf_;
  std::size_t last_positive_ = 0;
};

}  // namespace

std::string to_string(ClassRole role) { return role == ClassRole::target ? "target" : "overcoverage"; }

ClassRole parse_class_role(const std::string& text) {
  if (text == "target") return ClassRole::target;
  if (text == "overcoverage") return ClassRole::overcoverage;
  throw ValidationError("bad-role", "class role must be 'target' or 'overcoverage', got '" + text + "'");
}

std::vector<Violation> validate(const GeneratingConfig& config) {
  auto out = validate(config.spec, config.params);
  if (config.population_size < 1) out.push_back({"bad-population-size", "population size must be at least 1"});
  if (static_cast<int>(config.class_roles.size()) != config.spec.num_classes)
    out.push_back({"dimension-mismatch", "one class role per latent class is required"});
  if (std::none_of(config.class_roles.begin(), config.class_roles.end(),
                   [](ClassRole r) { return r == ClassRole::target; }))
    out.push_back({"no-target-class", "at least one class must be labelled target"});
  return out;
}

SimOutput simulate(const GeneratingConfig& config, int threads) {
  if (auto v = validate(config); !v.empty()) throw ValidationError(std::move(v));
  const int K = config.spec.num_registers();
  const int L = config.spec.num_classes;
  const Matrix conditional = class_conditional(config.spec, config.params);
  const std::int64_t N = config.population_size;

  std::vector<std::int64_t> sizes;
  if (config.fixed_classes) {
    sizes = fixed_class_sizes(config.params.class_weights, N);
  } else {
    sizes.assign(static_cast<std::size_t>(L), 0);
    Rng rng(derive_seed(config.seed, 0));
    const Categorical classes(config.params.class_weights);
    for (std::int64_t i = 0; i < N; ++i) ++sizes[classes.draw(rng.uniform())];
  }

  CountMatrix table = CountMatrix::Zero(conditional.rows(), L);
  auto fill_class = [&](int x) {
    Rng rng(derive_seed(config.seed, 1 + static_cast<std::uint64_t>(x)));
    const Categorical profiles(conditional.col(x));
    for (std::int64_t i = 0; i < sizes[static_cast<std::size_t>(x)]; ++i)
      ++table(static_cast<Eigen::Index>(profiles.draw(rng.uniform())), x);
  };
  const int workers = std::clamp(threads, 1, L);
  if (workers == 1) {
    for (int x = 0; x < L; ++x) fill_class(x);
  } else {
    std::vector<std::thread> pool;
    for (int w = 0; w < workers; ++w)
      pool.emplace_back([&, w] {
        for (int x = w; x < L; x += workers) fill_class(x);
      });
    for (auto& t : pool) t.join();
  }

  CountVector observed = table.rowwise().sum();
  observed[0] = 0;
  std::int64_t target = 0;
  for (int x = 0; x < L; ++x)
    if (config.class_roles[static_cast<std::size_t>(x)] == ClassRole::target) target += sizes[static_cast<std::size_t>(x)];
  return SimOutput{std::move(table), CaptureCounts(K, std::move(observed)), target, std::move(sizes)};
}

GeneratingConfig preset_scenario1(std::int64_t population_size, std::uint64_t seed,
                                  std::optional<double> cd_interaction) {
  ModelSpec spec{kRegistersABCD, 2, {}};
  if (cd_interaction) spec.dependence_terms.push_back({{2, 3}, false});
  Vector weights(2);
  weights << 0.4, 0.6;
  ParameterSet params = independence_parameters(
      spec, weights, rows_of({{0.25, 0.20, 0.21, 0.29}, {0.70, 0.82, 0.86, 0.83}}));
  if (cd_interaction) params.shared_interactions[0][0] = *cd_interaction;
  return {std::move(spec), std::move(params), population_size, {ClassRole::overcoverage, ClassRole::target},
          seed, false};
}

GeneratingConfig preset_critique(std::int64_t population_size, std::uint64_t seed,
                                 const CritiqueSettings& settings) {
  ModelSpec spec{kRegistersABCD, 3, {}};
  Vector weights(3);
  weights << settings.weights[0], settings.weights[1], settings.weights[2];
  ParameterSet params = independence_parameters(
      spec, weights, rows_of({settings.overcoverage_probs, settings.hard_to_reach_probs, settings.mainstream_probs}));
  return {std::move(spec), std::move(params), population_size,
          {ClassRole::overcoverage, ClassRole::target, ClassRole::target}, seed, false};
}

double plackett_cell11(double a, double b, double psi) {
  if (!(psi > 0.0)) throw ValidationError("bad-odds-ratio", "odds ratio must be positive");
  if (std::abs(psi - 1.0) < 1e-12) return a * b;
  const double s = 1.0 + (psi - 1.0) * (a + b);
  return (s - std::sqrt(s * s - 4.0 * psi * (psi - 1.0) * a * b)) / (2.0 * (psi - 1.0));
}

GeneratingConfig preset_cd_odds_ratios(std::int64_t population_size, std::uint64_t seed,
                                       std::array<double, 2> odds_ratios) {
  ModelSpec spec{kRegistersABCD, 2, {{{2, 3}, true}}};
  Vector weights(2);
  weights << 0.4, 0.6;
  const Matrix probs = rows_of({{0.25, 0.20, 0.21, 0.29}, {0.70, 0.82, 0.86, 0.83}});
  ParameterSet params = independence_parameters(spec, weights, probs);
  for (int x = 0; x < 2; ++x) {
    const double c = probs(x, 2);
    const double d = probs(x, 3);
    const double p11 = plackett_cell11(c, d, odds_ratios[static_cast<std::size_t>(x)]);
    // Cells ordered 00, 01, 10, 11 with C as the leading bit.
    params.block_tables[0].row(x) << 1.0 - c - d + p11, d - p11, c - p11, p11;
  }
  sync_block_margins(spec, params);
  return {std::move(spec), std::move(params), population_size, {ClassRole::overcoverage, ClassRole::target},
          seed, false};
}

}  // namespace lcmcr
