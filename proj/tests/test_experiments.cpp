#include <doctest.h>

#include <cmath>
#include <sstream>

#include "lcmcr/experiments.hpp"
#include "support.hpp"

using namespace lcmcr;
using namespace lcmcr::test;

namespace {

FitConfig quick_fit() {
  FitConfig c;
  c.num_starts = 5;
  return c;
}

}  // namespace

TEST_CASE("df family table") {
  const auto rows = df_family_table();
  REQUIRE(rows.size() >= 4);
  CHECK(rows[0].notation == "[AX][BX][CX][DX]");
  CHECK(rows[0].degrees_of_freedom == 5);
  CHECK(rows[1].notation == "[AX][BX][CX][DX][CD]");
  CHECK(rows[1].degrees_of_freedom == 4);
  CHECK(rows[2].notation == "[AX][BX][CDX]");
  CHECK(rows[2].degrees_of_freedom == 3);
  bool found = false;
  for (const auto& r : rows)
    if (r.notation == "[ABX][CDX]") {
      found = true;
      CHECK(r.parameter_count == 1 + 2 * 3 + 2 * 3);
      CHECK(r.degrees_of_freedom == 1);
    }
  CHECK(found);
  for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
    CHECK(rows[i].flag != DfFlag::negative);
    CHECK(rows[i + 1].degrees_of_freedom < rows[i].degrees_of_freedom);
  }
  CHECK(rows.back().flag == DfFlag::negative);
}

TEST_CASE("scenario experiment records and aggregates") {
  Scenario1Options o;
  o.reps = 6;
  o.population_size = 20000;
  o.seed = 5;
  o.fit = quick_fit();
  o.threads = 3;
  const auto report = run_scenario1(o);
  CHECK(report.records.size() == 6);
  CHECK(report.experiment_id == "scenario1");
  const auto again = aggregate(report.records);
  CHECK(again.target_only.mean == report.aggregates.target_only.mean);
  CHECK(again.standard_vs_total.median == report.aggregates.standard_vs_total.median);
  CHECK(again.mean_weights == report.aggregates.mean_weights);
  CHECK(report.aggregates.included + report.aggregates.failures + report.aggregates.nonconverged == 6);
  for (const auto& r : report.records) {
    CHECK(r.seed == derive_seed(5, static_cast<std::uint64_t>(r.replicate)));
    CHECK(r.true_total == 20000);
    CHECK(r.rel_bias_target_only == doctest::Approx((r.est_target_only - r.true_target) / r.true_target));
    CHECK(r.max_trace_decrease <= 1e-9);
  }
  CHECK(std::abs(report.aggregates.target_only.mean) < 0.05);
}

TEST_CASE("experiment reports are reproducible across thread counts") {
  Scenario1Options o;
  o.reps = 3;
  o.population_size = 10000;
  o.seed = 77;
  o.fit = quick_fit();
  o.threads = 1;
  const std::string a = to_json(run_scenario1(o)).dump();
  o.threads = 4;
  CHECK(to_json(run_scenario1(o)).dump() == a);
  o.reps = 1;
  CHECK(to_json(run_scenario1(o)).dump() == to_json(run_scenario1(o)).dump());
}

TEST_CASE("zero C-D interaction matches the independence variant") {
  Scenario1Options o;
  o.reps = 8;
  o.population_size = 50000;
  o.seed = 31;
  o.fit = quick_fit();
  o.threads = 4;
  const auto plain = run_scenario1(o);
  o.cd_interaction = 0.0;
  const auto zero = run_scenario1(o);
  CHECK(zero.config["fitted_model"] == "[AX][BX][CX][DX][CD]");
  for (std::size_t r = 0; r < plain.records.size(); ++r)
    CHECK(plain.records[r].true_target == zero.records[r].true_target);
  CHECK(std::abs(plain.aggregates.target_only.mean - zero.aggregates.target_only.mean) < 0.01);
  CHECK(std::abs(plain.aggregates.standard_vs_total.mean - zero.aggregates.standard_vs_total.mean) < 0.01);
}

TEST_CASE("critique experiment decomposes the low class") {
  CritiqueOptions o;
  o.reps = 4;
  o.population_size = 50000;
  o.seed = 8;
  o.fit = quick_fit();
  o.threads = 4;
  const auto report = run_critique(o);
  for (const auto& r : report.records) {
    REQUIRE_FALSE(r.failed);
    CHECK(r.origin_mass.size() == 3);
    CHECK(std::abs(r.origin_mass.sum() - r.low_class_mass) <= 1e-9);
    CHECK(r.rel_bias_target_only < 0.0);
  }
  CHECK(report.aggregates.mean_origin_share.size() == 3);
  CHECK(report.aggregates.mean_origin_share.sum() == doctest::Approx(1.0));
  CHECK(report.aggregates.fraction_target_only_negative == 1.0);
}

TEST_CASE("collapsing the hard-to-reach class restores the scenario") {
  CritiqueOptions o;
  o.reps = 6;
  o.population_size = 100000;
  o.seed = 9;
  o.fit = quick_fit();
  o.threads = 4;
  o.settings.hard_to_reach_probs = o.settings.mainstream_probs;
  const auto report = run_critique(o);
  CHECK(std::abs(report.aggregates.target_only.mean) < 0.02);
}

TEST_CASE("pure heterogeneity with every class as target") {
  CritiqueOptions o;
  o.reps = 6;
  o.population_size = 100000;
  o.seed = 10;
  o.fit = quick_fit();
  o.threads = 4;
  o.settings.weights = {0.0, 0.375, 0.625};
  o.rule = TargetRule::parse("all");
  const auto report = run_critique(o);
  CHECK(report.aggregates.included == 6);
  CHECK(std::abs(report.aggregates.standard_vs_total.mean) < 0.02);
  CHECK(std::abs(report.aggregates.target_only.mean) < 0.02);
}

TEST_CASE("failed and non-converged replicates are counted but excluded") {
  std::vector<ReplicateRecord> records(4);
  records[0].converged = true;
  records[0].rel_bias_target_only = -0.1;
  records[0].fitted_weights = Vector::Constant(2, 0.5);
  records[0].fitted_margins = Matrix::Constant(2, 4, 0.5);
  records[1] = records[0];
  records[1].rel_bias_target_only = 0.3;
  records[2] = records[0];
  records[2].converged = false;
  records[2].rel_bias_target_only = 9.0;
  records[3].failed = true;
  const auto a = aggregate(records);
  CHECK(a.replicates == 4);
  CHECK(a.included == 2);
  CHECK(a.nonconverged == 1);
  CHECK(a.failures == 1);
  CHECK(a.target_only.mean == doctest::Approx(0.1));
  CHECK(a.target_only.median == doctest::Approx(0.1));
  CHECK(a.fraction_target_only_negative == 0.5);
}

TEST_CASE("report serialization") {
  CritiqueOptions o;
  o.reps = 2;
  o.population_size = 10000;
  o.seed = 3;
  o.fit = quick_fit();
  const auto report = run_critique(o);
  const Json doc = to_json(report);
  CHECK(doc["schema_version"] == 1);
  CHECK(doc["records"].size() == 2);
  CHECK(doc["provenance"]["replicate_seeds"].size() == 2);
  CHECK(doc["config"]["seed"] == 3);
  std::ostringstream csv;
  write_records_csv(csv, report);
  int lines = 0;
  for (char ch : csv.str()) lines += ch == '\n';
  CHECK(lines == 3);
  CHECK(csv.str().find("low_class_from_class2") != std::string::npos);
}

TEST_CASE("experiments reject bad options") {
  Scenario1Options o;
  o.reps = 0;
  CHECK_THROWS_AS(run_scenario1(o), ValidationError);
  CritiqueOptions c;
  c.fitted_classes = 4;
  c.reps = 1;
  CHECK_THROWS_AS(run_critique(c), ValidationError);
}
