#include <doctest.h>

#include <cmath>

#include "lcmcr/simgen.hpp"
#include "support.hpp"

using namespace lcmcr;
using namespace lcmcr::test;

namespace {

bool same_output(const SimOutput& a, const SimOutput& b) {
  return a.complete_table == b.complete_table && a.observed_counts.dense() == b.observed_counts.dense() &&
         a.true_class_sizes == b.true_class_sizes && a.true_target_size == b.true_target_size;
}

void check_table_invariants(const GeneratingConfig& config, const SimOutput& out) {
  CHECK(out.complete_table.sum() == config.population_size);
  CHECK(out.observed_counts[0] == 0);
  const CountVector by_profile = out.complete_table.rowwise().sum();
  for (Eigen::Index r = 1; r < by_profile.size(); ++r) CHECK(out.observed_counts[static_cast<std::uint32_t>(r)] == by_profile[r]);
  std::int64_t target = 0;
  for (std::size_t x = 0; x < config.class_roles.size(); ++x) {
    CHECK(out.complete_table.col(static_cast<Eigen::Index>(x)).sum() == out.true_class_sizes[x]);
    if (config.class_roles[x] == ClassRole::target) target += out.true_class_sizes[x];
  }
  CHECK(out.true_target_size == target);
}

}  // namespace

TEST_CASE("certain capture puts everyone in 1111") {
  GeneratingConfig config;
  config.spec = four_register_spec(1);
  config.params.class_weights = Vector::Ones(1);
  config.params.inclusion_probs = Matrix::Ones(1, 4);
  config.population_size = 100;
  config.class_roles = {ClassRole::target};
  config.seed = 1;
  const auto out = simulate(config);
  CHECK(out.observed_counts.total() == 100);
  CHECK(out.observed_counts[15] == 100);
  check_table_invariants(config, out);
}

TEST_CASE("scenario preset matches the published tables") {
  const auto config = preset_scenario1(1000000, 7);
  CHECK(config.params.class_weights[0] == 0.4);
  CHECK(config.params.class_weights[1] == 0.6);
  const double class1[4] = {0.70, 0.82, 0.86, 0.83};
  const double class0[4] = {0.25, 0.20, 0.21, 0.29};
  for (int k = 0; k < 4; ++k) {
    CHECK(config.params.inclusion_probs(1, k) == class1[k]);
    CHECK(config.params.inclusion_probs(0, k) == class0[k]);
  }
  CHECK(config.class_roles == std::vector<ClassRole>{ClassRole::overcoverage, ClassRole::target});
  CHECK(config.spec.dependence_terms.empty());
  CHECK(validate(config).empty());
}

TEST_CASE("zero C-D interaction gives the independence distribution") {
  const auto plain = preset_scenario1(1000, 1);
  const auto zero = preset_scenario1(1000, 1, 0.0);
  CHECK(zero.spec.dependence_terms.size() == 1);
  CHECK((full_distribution(plain.spec, plain.params) - full_distribution(zero.spec, zero.params))
            .cwiseAbs()
            .maxCoeff() <= 1e-15);
  const auto strong = preset_scenario1(1000, 1, 1.0);
  CHECK(pairwise_log_odds_ratio(class_conditional(strong.spec, strong.params).col(0), 4, 2, 3) ==
        doctest::Approx(1.0));
}

TEST_CASE("expected counts of the scenario at one million") {
  // N times the product-oracle probabilities.
  CHECK(1e6 * scenario1_cell(15) == doctest::Approx(247051).epsilon(1e-5));
  CHECK(1e6 * scenario1_cell(0) == doctest::Approx(135387).epsilon(1e-5));
}

TEST_CASE("property: empirical frequencies converge to the model") {
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    const auto config = preset_scenario1(1000000, seed, seed == 3 ? std::optional<double>(0.8) : std::nullopt);
    const auto out = simulate(config, 4);
    check_table_invariants(config, out);
    const Vector dist = full_distribution(config.spec, config.params);
    const CountVector by_profile = out.complete_table.rowwise().sum();
    const double N = 1e6;
    for (Eigen::Index m = 0; m < dist.size(); ++m) {
      const double p = dist[m];
      CHECK(std::abs(by_profile[m] / N - p) < 5.0 * std::sqrt(p * (1.0 - p) / N));
    }
  }
}

TEST_CASE("simulation is reproducible and independent of worker count") {
  const auto config = preset_critique(50000, 99);
  const auto a = simulate(config, 1);
  CHECK(same_output(a, simulate(config, 1)));
  CHECK(same_output(a, simulate(config, 8)));
  CHECK_FALSE(same_output(a, simulate(preset_critique(50000, 100), 1)));
  check_table_invariants(config, a);
}

TEST_CASE("critique preset") {
  const auto config = preset_critique(100000, 5);
  CHECK(config.params.class_weights[0] == 0.2);
  CHECK(config.params.class_weights[1] == 0.3);
  CHECK(config.params.class_weights[2] == 0.5);
  CHECK(config.class_roles ==
        std::vector<ClassRole>{ClassRole::overcoverage, ClassRole::target, ClassRole::target});
  const auto out = simulate(config);
  CHECK(std::abs(out.true_target_size - 80000.0) <= 3.0 * std::sqrt(100000 * 0.8 * 0.2));
  check_table_invariants(config, out);
}

TEST_CASE("fixed class sizes round N times the weights") {
  auto config = preset_critique(1001, 3);
  config.fixed_classes = true;
  const auto out = simulate(config);
  CHECK(out.true_class_sizes == std::vector<std::int64_t>{200, 300, 501});
  CHECK(out.true_target_size == 801);
  check_table_invariants(config, out);
}

TEST_CASE("observed counts never include the all-zero profile") {
  Rng rng(21);
  for (int trial = 0; trial < 30; ++trial) {
    GeneratingConfig config;
    config.spec = random_spec(rng, 5, 3);
    config.params = random_params(config.spec, rng);
    config.population_size = 1 + static_cast<std::int64_t>(rng.next() % 5000);
    config.class_roles.assign(static_cast<std::size_t>(config.spec.num_classes), ClassRole::target);
    config.seed = rng.next();
    try {
      const auto out = simulate(config);
      check_table_invariants(config, out);
    } catch (const ValidationError& e) {
      // Everyone can land in the all-zero cell for tiny N.
      CHECK(std::string(e.violations().front().code) == "empty-counts");
    }
  }
}

TEST_CASE("generating config validation") {
  auto config = preset_scenario1(0, 1);
  CHECK_FALSE(validate(config).empty());
  CHECK_THROWS_AS(simulate(config), ValidationError);
  config = preset_scenario1(10, 1);
  config.class_roles = {ClassRole::overcoverage, ClassRole::overcoverage};
  CHECK_THROWS_AS(simulate(config), ValidationError);
  CHECK(parse_class_role("target") == ClassRole::target);
  CHECK_THROWS_AS(parse_class_role("other"), ValidationError);
}

TEST_CASE("Plackett cell reproduces margins and odds ratio") {
  for (double psi : {0.25, 0.5, 1.0, 2.0, 7.0}) {
    const double a = 0.3, b = 0.65;
    const double p11 = plackett_cell11(a, b, psi);
    const double p10 = a - p11, p01 = b - p11, p00 = 1.0 - a - b + p11;
    CHECK(p10 > 0);
    CHECK(p01 > 0);
    CHECK(p00 > 0);
    CHECK(p11 * p00 / (p10 * p01) == doctest::Approx(psi).epsilon(1e-12));
  }
}

TEST_CASE("per-class C-D odds ratio preset keeps the scenario margins") {
  const auto config = preset_cd_odds_ratios(1000, 1, {2.0, 0.5});
  CHECK(notation(config.spec) == "[AX][BX][CDX]");
  const Matrix cond = class_conditional(config.spec, config.params);
  CHECK(std::exp(pairwise_log_odds_ratio(cond.col(0), 4, 2, 3)) == doctest::Approx(2.0).epsilon(1e-10));
  CHECK(std::exp(pairwise_log_odds_ratio(cond.col(1), 4, 2, 3)) == doctest::Approx(0.5).epsilon(1e-10));
  const Matrix margins = register_margins(config.spec, config.params);
  CHECK(margins(0, 2) == doctest::Approx(0.21));
  CHECK(margins(1, 3) == doctest::Approx(0.83));
}
