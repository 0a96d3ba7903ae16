#include <doctest.h>

#include <cmath>

#include "lcmcr/model.hpp"
#include "support.hpp"

using namespace lcmcr;
using namespace lcmcr::test;

namespace {

bool has_code(const std::vector<Violation>& violations, const std::string& code) {
  for (const auto& v : violations)
    if (v.code == code) return true;
  return false;
}

}  // namespace

TEST_CASE("capture profiles use the first register as the leftmost bit") {
  const auto p = CaptureProfile::parse("1010");
  CHECK(p.mask == 0b1010u);
  CHECK(p.num_registers == 4);
  CHECK(p.present(0));
  CHECK_FALSE(p.present(1));
  CHECK(p.present(2));
  CHECK(p.to_string() == "1010");
  CHECK(profile_string(1, 4) == "0001");
  CHECK_THROWS_AS(CaptureProfile::parse("10a1"), ValidationError);
}

TEST_CASE("cell probability of 1111 under the two-class scenario") {
  const auto spec = four_register_spec();
  const auto params = scenario1_params();
  const double oracle = 0.4 * 0.25 * 0.20 * 0.21 * 0.29 + 0.6 * 0.70 * 0.82 * 0.86 * 0.83;
  CHECK(oracle == doctest::Approx(0.2470507).epsilon(1e-6));
  CHECK(std::abs(cell_probability(spec, params, CaptureProfile::parse("1111")) - oracle) < 1e-15);
}

TEST_CASE("cell probability of the all-zero profile") {
  const auto spec = four_register_spec();
  const double oracle = 0.4 * (0.75 * 0.80 * 0.79 * 0.71) + 0.6 * (0.30 * 0.18 * 0.14 * 0.17);
  CHECK(oracle == doctest::Approx(0.1353871).epsilon(1e-6));
  CHECK(std::abs(cell_probability(spec, scenario1_params(), CaptureProfile::parse("0000")) - oracle) < 1e-15);

  ParameterSet zero;
  zero.class_weights = Vector::Ones(1);
  zero.inclusion_probs = Matrix::Zero(1, 4);
  CHECK(cell_probability(four_register_spec(1), zero, CaptureProfile::parse("0000")) == 1.0);
}

TEST_CASE("every cell matches the product oracle") {
  const auto spec = four_register_spec();
  const Vector dist = full_distribution(spec, scenario1_params());
  for (std::uint32_t m = 0; m < 16; ++m) CHECK(std::abs(dist[m] - scenario1_cell(m)) < 1e-15);
  CHECK(dist[15] == doctest::Approx(cell_probability(spec, scenario1_params(), CaptureProfile::parse("1111"))).epsilon(1e-15));
}

TEST_CASE("full distribution of two fair registers is uniform") {
  ModelSpec spec;
  spec.register_names = {"A", "B"};
  ParameterSet p;
  p.class_weights = Vector::Ones(1);
  p.inclusion_probs = Matrix::Constant(1, 2, 0.5);
  const Vector dist = full_distribution(spec, p);
  for (int m = 0; m < 4; ++m) CHECK(dist[m] == 0.25);
}

TEST_CASE("a single register is rejected") {
  ModelSpec spec;
  spec.register_names = {"A"};
  CHECK(has_code(validate(spec), "too-few-registers"));
}

TEST_CASE("dense enumeration refuses more than 20 registers") {
  ModelSpec spec;
  for (int k = 0; k < 21; ++k) spec.register_names.push_back("R" + std::to_string(k));
  ParameterSet p;
  p.class_weights = Vector::Ones(1);
  p.inclusion_probs = Matrix::Constant(1, 21, 0.5);
  CHECK_THROWS_AS(full_distribution(spec, p), CapacityError);
}

TEST_CASE("property: distributions sum to one") {
  Rng rng(101);
  for (int trial = 0; trial < 300; ++trial) {
    const auto spec = random_spec(rng);
    const auto params = random_params(spec, rng);
    REQUIRE(validate(spec, params).empty());
    const Vector dist = full_distribution(spec, params);
    CHECK(std::abs(dist.sum() - 1.0) <= 1e-12);
    CHECK(dist.minCoeff() >= 0.0);
    const Matrix cond = class_conditional(spec, params);
    for (int x = 0; x < spec.num_classes; ++x) CHECK(std::abs(cond.col(x).sum() - 1.0) <= 1e-12);
    const std::uint32_t probe = static_cast<std::uint32_t>(rng.next() % dist.size());
    CHECK(cell_probability(spec, params, CaptureProfile{probe, spec.num_registers()}) ==
          doctest::Approx(dist[probe]).epsilon(1e-12));
  }
}

TEST_CASE("miss probabilities") {
  const auto spec = four_register_spec();
  const auto params = scenario1_params();
  const auto miss = miss_probability(spec, params);
  CHECK(std::abs(miss.per_class[1] - 0.30 * 0.18 * 0.14 * 0.17) < 1e-15);
  CHECK(miss.per_class[1] == doctest::Approx(0.0012852).epsilon(1e-9));
  CHECK(miss.overall == doctest::Approx(0.1353871).epsilon(1e-6));
  CHECK(std::abs(miss.overall - cell_probability(spec, params, CaptureProfile{0, 4})) <= 1e-14);

  auto certain = params;
  certain.inclusion_probs(0, 2) = 1.0;
  CHECK(miss_probability(spec, certain).per_class[0] == 0.0);
}

TEST_CASE("validation reports each breach") {
  const auto spec = four_register_spec();
  CHECK(validate(spec, scenario1_params()).empty());

  auto p = scenario1_params();
  p.class_weights << 0.5, 0.6;
  CHECK(has_code(validate(spec, p), "weights-not-normalized"));

  p = scenario1_params();
  p.inclusion_probs(1, 3) = -0.1;
  CHECK(has_code(validate(spec, p), "prob-out-of-range"));

  p = scenario1_params();
  p.inclusion_probs = Matrix::Constant(2, 3, 0.5);
  CHECK(has_code(validate(spec, p), "dimension-mismatch"));
  CHECK_THROWS_AS(require_valid(spec, p), ValidationError);

  p = scenario1_params();
  p.class_weights << 0.5, 0.6;
  p.inclusion_probs(0, 0) = 1.5;
  CHECK(validate(spec, p).size() >= 2);
}

TEST_CASE("spec validation") {
  auto spec = four_register_spec();
  spec.dependence_terms = {{{2, 3}, false}, {{2, 3}, true}};
  CHECK(has_code(validate(spec), "duplicate-term"));
  spec.dependence_terms = {{{2, 3}, false}, {{2, 3}, false}};
  CHECK(has_code(validate(spec), "duplicate-term"));
  spec.dependence_terms = {{{0, 1}, false}, {{1, 2}, true}};
  CHECK(has_code(validate(spec), "register-in-multiple-terms"));
  spec.dependence_terms = {{{0}, false}};
  CHECK(has_code(validate(spec), "term-too-small"));
  spec.dependence_terms = {{{0, 7}, false}};
  CHECK(has_code(validate(spec), "unknown-register"));
  spec.dependence_terms.clear();
  spec.num_classes = 0;
  CHECK(has_code(validate(spec), "no-classes"));
  spec = four_register_spec();
  spec.register_names[2] = "A";
  CHECK(has_code(validate(spec), "duplicate-register"));
}

TEST_CASE("summing over the latent class induces register dependence") {
  const Vector dist = full_distribution(four_register_spec(), scenario1_params());
  const double log_or = pairwise_log_odds_ratio(dist, 4, 0, 1);
  CHECK(std::abs(std::exp(log_or) - 1.0) > 0.1);

  // Oracle: the A-B table summed over C, D and X.
  double t[2][2] = {{0, 0}, {0, 0}};
  for (std::uint32_t m = 0; m < 16; ++m) t[(m >> 3) & 1][(m >> 2) & 1] += scenario1_cell(m);
  CHECK(log_or == doctest::Approx(std::log(t[1][1] * t[0][0] / (t[1][0] * t[0][1]))).epsilon(1e-12));
}

TEST_CASE("zero shared interactions reproduce independence") {
  auto spec = four_register_spec();
  spec.dependence_terms = {{{2, 3}, false}};
  auto p = scenario1_params();
  p.shared_interactions = {Vector::Zero(1)};
  const Vector with_term = full_distribution(spec, p);
  for (std::uint32_t m = 0; m < 16; ++m) CHECK(std::abs(with_term[m] - scenario1_cell(m)) <= 1e-14);

  Rng rng(7);
  for (int trial = 0; trial < 50; ++trial) {
    ModelSpec s = random_spec(rng);
    for (auto& t : s.dependence_terms) t.class_specific = false;
    auto q = random_params(s, rng);
    for (auto& eta : q.shared_interactions) eta.setZero();
    ModelSpec plain = s;
    plain.dependence_terms.clear();
    ParameterSet base{q.class_weights, q.inclusion_probs, {}, {}};
    CHECK((full_distribution(s, q) - full_distribution(plain, base)).cwiseAbs().maxCoeff() <= 1e-14);
  }
}

TEST_CASE("shared interaction follows the corner-cell log-linear form") {
  auto spec = four_register_spec(1);
  spec.dependence_terms = {{{2, 3}, false}};
  ParameterSet p;
  p.class_weights = Vector::Ones(1);
  p.inclusion_probs = Matrix(1, 4);
  p.inclusion_probs << 0.3, 0.4, 0.5, 0.6;
  p.shared_interactions = {Vector::Constant(1, 0.7)};
  const Vector dist = full_distribution(spec, p);
  CHECK(pairwise_log_odds_ratio(dist, 4, 2, 3) == doctest::Approx(0.7).epsilon(1e-12));
  CHECK(pairwise_log_odds_ratio(dist, 4, 0, 1) == doctest::Approx(0.0).epsilon(1e-12));
}

TEST_CASE("class-specific tables carry their margins into inclusion_probs") {
  auto spec = four_register_spec();
  spec.dependence_terms = {{{2, 3}, true}};
  auto p = scenario1_params();
  Matrix table(2, 4);
  table << 0.1, 0.2, 0.3, 0.4, 0.4, 0.3, 0.2, 0.1;
  p.block_tables = {table};
  sync_block_margins(spec, p);
  CHECK(p.inclusion_probs(0, 2) == doctest::Approx(0.7));
  CHECK(p.inclusion_probs(0, 3) == doctest::Approx(0.6));
  CHECK(p.inclusion_probs(1, 2) == doctest::Approx(0.3));
  CHECK(validate(spec, p).empty());
  p.inclusion_probs(1, 3) = 0.9;
  CHECK(has_code(validate(spec, p), "block-margin-mismatch"));
}

TEST_CASE("notation round trip") {
  for (const char* text : {"[AX][BX][CX][DX]", "[AX][BX][CX][DX][CD]", "[AX][BX][CDX]", "[ABX][CDX]"}) {
    const auto spec = parse_notation(text);
    CHECK(spec.num_classes == 2);
    CHECK(notation(spec) == text);
  }
  const auto single = parse_notation("[A][B]");
  CHECK(single.num_classes == 1);
  CHECK(single.dependence_terms.empty());
  const auto three = parse_notation("[AX][BX][CX]", 3);
  CHECK(three.num_classes == 3);
  CHECK_THROWS_AS(parse_notation("[AX][AX]"), ValidationError);
}
