#include <doctest.h>

#include <sstream>

#include "lcmcr/io.hpp"
#include "support.hpp"

using namespace lcmcr;
using namespace lcmcr::test;

TEST_CASE("spec JSON round trip") {
  const Json doc = Json::parse(
      R"({"registers": ["A","B","C","D"], "classes": 2, "dependence": [{"registers": ["C","D"], "class_specific": false}]})");
  const auto spec = spec_from_json(doc);
  CHECK(notation(spec) == "[AX][BX][CX][DX][CD]");
  CHECK(spec_from_json(to_json(spec)) == spec);
  CHECK_THROWS_AS(spec_from_json(Json::parse(R"({"registers": ["A","B"]})")), ValidationError);
  CHECK_THROWS_AS(
      spec_from_json(Json::parse(R"({"registers": ["A","B"], "classes": 1, "dependence": [{"registers": ["A","Z"]}]})")),
      ValidationError);
}

TEST_CASE("parameter JSON round trip") {
  Rng rng(61);
  for (int trial = 0; trial < 30; ++trial) {
    const auto spec = random_spec(rng, 5, 3);
    const auto params = random_params(spec, rng);
    const auto back = params_from_json(spec, Json::parse(to_json(spec, params).dump()));
    CHECK(back.class_weights == params.class_weights);
    CHECK(back.inclusion_probs == params.inclusion_probs);
    CHECK(back.block_tables.size() == params.block_tables.size());
    CHECK(back.shared_interactions.size() == params.shared_interactions.size());
    CHECK(validate(spec, back).empty());
  }
}

TEST_CASE("parameter JSON mismatches are reported") {
  const auto spec = parse_notation("[AX][BX][CDX]");
  const Json bad = Json::parse(R"({"class_weights": [0.5, 0.5], "inclusion_probs": [[0.1,0.2,0.3,0.4]]})");
  CHECK_THROWS_AS(params_from_json(spec, bad), ValidationError);
  const auto params = params_from_json(four_register_spec(), to_json(four_register_spec(), scenario1_params()));
  CHECK(validate(four_register_spec(), params).empty());
}

TEST_CASE("counts CSV") {
  CountVector d = CountVector::Zero(16);
  d[0b0001] = 5;
  d[0b1111] = 12;
  const CaptureCounts counts(4, d);
  std::ostringstream out;
  write_counts_csv(out, counts);
  CHECK(out.str() == "profile,count\n0001,5\n1111,12\n");
  std::istringstream in(out.str());
  CHECK(read_counts_csv(in).dense() == d);

  const auto reject = [](const std::string& text, const std::string& code) {
    std::istringstream s(text);
    try {
      read_counts_csv(s, 4);
      return false;
    } catch (const ValidationError& e) {
      return e.violations().front().code == code;
    }
  };
  CHECK(reject("profile,count\n0000,3\n0001,1\n", "all-zero-profile"));
  CHECK(reject("profile,count\n0001,3\n0001,1\n", "duplicate-profile"));
  CHECK(reject("profile,count\n001,3\n", "dimension-mismatch"));
  CHECK(reject("profile,count\n0001,-3\n", "negative-count"));
  CHECK(reject("p,c\n0001,3\n", "bad-csv"));
}

TEST_CASE("count validation") {
  CHECK_THROWS_AS(CaptureCounts(2, CountVector::Zero(4)), ValidationError);
  CountVector d(4);
  d << 1, 1, 1, 1;
  CHECK_THROWS_AS(CaptureCounts(2, d), ValidationError);
  d << 0, 1, 2, 3;
  CHECK(CaptureCounts(2, d).scaled(3).total() == 18);
  CHECK(CaptureCounts::from_map(2, {{"11", 4}, {"01", 2}}).total() == 6);
}

TEST_CASE("complete table CSV") {
  CountMatrix table = CountMatrix::Zero(4, 2);
  table(3, 1) = 7;
  std::ostringstream out;
  write_complete_table_csv(out, table, 2);
  CHECK(out.str().rfind("profile,class,count\n", 0) == 0);
  CHECK(out.str().find("11,1,7") != std::string::npos);
}
