#include "lcmcr/experiments.hpp"

#include <algorithm>
#include <ostream>

#include "lcmcr/parallel.hpp"
#include "lcmcr/rng.hpp"

namespace lcmcr {

namespace {

double relative(double estimate, double truth) { return (estimate - truth) / truth; }

SummaryStats summarize(std::vector<double> values) {
  SummaryStats s;
  s.count = static_cast<int>(values.size());
  if (values.empty()) return s;
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(values.size());
  std::sort(values.begin(), values.end());
  const std::size_t mid = values.size() / 2;
  s.median = values.size() % 2 ? values[mid] : 0.5 * (values[mid - 1] + values[mid]);
  return s;
}

ReplicateRecord run_replicate(const GeneratingConfig& truth, const ModelSpec& fitted_spec, FitConfig fit_config,
                              const TargetRule& rule, int replicate, bool with_origin) {
  ReplicateRecord rec;
  rec.replicate = replicate;
  rec.seed = truth.seed;
  const SimOutput sim = simulate(truth);
  rec.true_class_sizes = sim.true_class_sizes;
  rec.true_total = truth.population_size;
  rec.true_target = sim.true_target_size;

  fit_config.seed = derive_seed(truth.seed, 1);
  fit_config.threads = 1;
  try {
    const FitResult fit = lcmcr::fit(fitted_spec, sim.observed_counts, fit_config);
    rec.converged = fit.converged;
    rec.boundary = !fit.boundary.empty();
    rec.cond_loglik = fit.cond_loglik;
    rec.iterations = fit.iterations;
    for (const auto& s : fit.starts) rec.max_trace_decrease = std::max(rec.max_trace_decrease, max_trace_decrease(s.loglik_trace));
    rec.fitted_weights = fit.params.class_weights;
    rec.fitted_margins = register_margins(fitted_spec, fit.params);
    rec.target_classes = designate_target(fitted_spec, fit, rule);
    const PopEstimate est =
        estimate_overcoverage(fitted_spec, fit.params, sim.observed_counts, rec.target_classes);
    rec.class_sizes = est.class_sizes;
    rec.est_standard = est.total_all_classes;
    rec.est_target_only = est.total_target_only;
    rec.rel_bias_target_only = relative(est.total_target_only, static_cast<double>(rec.true_target));
    rec.rel_bias_standard_vs_total = relative(est.total_all_classes, static_cast<double>(rec.true_total));
    rec.rel_bias_standard_vs_target = relative(est.total_all_classes, static_cast<double>(rec.true_target));
    if (with_origin) {
      // Canonical class 0 is the fitted low-inclusion class.
      rec.origin_mass = Vector::Zero(sim.complete_table.cols());
      for (Eigen::Index r = 1; r < sim.complete_table.rows(); ++r)
        rec.origin_mass += sim.complete_table.row(r).cast<double>().transpose() * fit.posteriors(r, 0);
      rec.low_class_mass = est.observed_class_counts[0];
    }
  } catch (const NumericalError& e) {
    rec.failed = true;
    rec.diagnostic = e.what();
  }
  return rec;
}

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json matrix_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Json to_json(const FitConfig& c) {
  return {{"num_starts", c.num_starts}, {"tol", c.tol},         {"max_iter", c.max_iter},
          {"ipf_tol", c.ipf_tol},       {"ipf_max_iter", c.ipf_max_iter}, {"force", c.force}};
}

Json to_json(const SummaryStats& s) { return {{"mean", s.mean}, {"median", s.median}, {"count", s.count}}; }

}  // namespace

Aggregates aggregate(const std::vector<ReplicateRecord>& records) {
  Aggregates a;
  a.replicates = static_cast<int>(records.size());
  std::vector<double> target_only, standard_total, standard_target;
  int negatives = 0;
  for (const auto& r : records) {
    a.max_trace_decrease = std::max(a.max_trace_decrease, r.max_trace_decrease);
    if (r.failed) {
      ++a.failures;
      continue;
    }
    if (r.boundary) ++a.boundary;
    if (!r.converged) {
      ++a.nonconverged;
      continue;
    }
    ++a.included;
    target_only.push_back(r.rel_bias_target_only);
    standard_total.push_back(r.rel_bias_standard_vs_total);
    standard_target.push_back(r.rel_bias_standard_vs_target);
    if (r.rel_bias_target_only < 0.0) ++negatives;
    if (a.mean_weights.size() == 0) {
      a.mean_weights = Vector::Zero(r.fitted_weights.size());
      a.mean_margins = Matrix::Zero(r.fitted_margins.rows(), r.fitted_margins.cols());
    }
    a.mean_weights += r.fitted_weights;
    a.mean_margins += r.fitted_margins;
    if (r.origin_mass.size() && r.low_class_mass > 0.0) {
      if (a.mean_origin_share.size() == 0) a.mean_origin_share = Vector::Zero(r.origin_mass.size());
      a.mean_origin_share += r.origin_mass / r.low_class_mass;
    }
  }
  if (a.included > 0) {
    a.mean_weights /= a.included;
    a.mean_margins /= a.included;
    if (a.mean_origin_share.size()) a.mean_origin_share /= a.included;
    a.fraction_target_only_negative = static_cast<double>(negatives) / a.included;
  }
  a.target_only = summarize(target_only);
  a.standard_vs_total = summarize(standard_total);
  a.standard_vs_target = summarize(standard_target);
  return a;
}

ExperimentReport run_scenario1(const Scenario1Options& options) {
  if (options.reps < 1) throw ValidationError("bad-argument", "reps must be at least 1");
  const ModelSpec fitted_spec = preset_scenario1(1, 0, options.cd_interaction).spec;
  if (degrees_of_freedom(fitted_spec).df_flag == DfFlag::negative)
    throw ValidationError("negative-df", "fitted model has negative degrees of freedom");

  ExperimentReport report;
  report.experiment_id = "scenario1";
  report.seed = options.seed;
  report.config = {{"reps", options.reps},
                   {"population_size", options.population_size},
                   {"seed", options.seed},
                   {"variant", options.cd_interaction ? "shared_cd" : "independence"},
                   {"cd_interaction", options.cd_interaction ? Json(*options.cd_interaction) : Json(nullptr)},
                   {"fixed_classes", options.fixed_classes},
                   {"fitted_model", notation(fitted_spec)},
                   {"target_rule", options.rule.to_string()},
                   {"fit", to_json(options.fit)}};
  report.records.resize(static_cast<std::size_t>(options.reps));
  parallel_for(options.reps, options.threads, [&](int r) {
    GeneratingConfig truth = preset_scenario1(options.population_size,
                                              derive_seed(options.seed, static_cast<std::uint64_t>(r)),
                                              options.cd_interaction);
    truth.fixed_classes = options.fixed_classes;
    report.records[static_cast<std::size_t>(r)] = run_replicate(truth, fitted_spec, options.fit, options.rule, r, false);
  });
  report.aggregates = aggregate(report.records);
  return report;
}

ExperimentReport run_critique(const CritiqueOptions& options) {
  if (options.reps < 1) throw ValidationError("bad-argument", "reps must be at least 1");
  ModelSpec fitted_spec = preset_critique(1, 0, options.settings).spec;
  fitted_spec.num_classes = options.fitted_classes;
  require_valid(fitted_spec);
  if (degrees_of_freedom(fitted_spec).df_flag == DfFlag::negative)
    throw ValidationError("negative-df", "fitted model has negative degrees of freedom");

  const auto& s = options.settings;
  ExperimentReport report;
  report.experiment_id = "critique";
  report.seed = options.seed;
  report.config = {{"reps", options.reps},
                   {"population_size", options.population_size},
                   {"seed", options.seed},
                   {"generating_classes", {"overcoverage", "hard-to-reach target", "mainstream target"}},
                   {"weights", s.weights},
                   {"overcoverage_probs", s.overcoverage_probs},
                   {"hard_to_reach_probs", s.hard_to_reach_probs},
                   {"mainstream_probs", s.mainstream_probs},
                   {"fixed_classes", options.fixed_classes},
                   {"fitted_model", notation(fitted_spec)},
                   {"fitted_classes", options.fitted_classes},
                   {"target_rule", options.rule.to_string()},
                   {"fit", to_json(options.fit)}};
  report.records.resize(static_cast<std::size_t>(options.reps));
  parallel_for(options.reps, options.threads, [&](int r) {
    GeneratingConfig truth = preset_critique(options.population_size,
                                             derive_seed(options.seed, static_cast<std::uint64_t>(r)), s);
    truth.fixed_classes = options.fixed_classes;
    report.records[static_cast<std::size_t>(r)] = run_replicate(truth, fitted_spec, options.fit, options.rule, r, true);
  });
  report.aggregates = aggregate(report.records);
  return report;
}

std::vector<DfRow> df_family_table() {
  const char* models[] = {
      "[AX][BX][CX][DX]",     "[AX][BX][CX][DX][CD]", "[AX][BX][CDX]",
      "[AX][BX][CDX][AB]",    "[ABX][CDX]",           "[ABCX][DX]",
  };
  std::vector<DfRow> rows;
  for (const char* text : models) {
    const ModelSpec spec = parse_notation(text);
    const StructureReport report = degrees_of_freedom(spec);
    rows.push_back({notation(spec), report.parameter_count, report.degrees_of_freedom, report.df_flag});
    if (report.df_flag == DfFlag::negative) break;
  }
  return rows;
}

Json to_json(const ExperimentReport& report) {
  Json records = Json::array();
  for (const auto& r : report.records) {
    Json rec = {{"replicate", r.replicate},
                {"seed", r.seed},
                {"failed", r.failed},
                {"converged", r.converged},
                {"boundary", r.boundary},
                {"true_class_sizes", r.true_class_sizes},
                {"true_total", r.true_total},
                {"true_target", r.true_target}};
    if (r.failed) {
      rec["diagnostic"] = r.diagnostic;
    } else {
      rec["cond_loglik"] = r.cond_loglik;
      rec["iterations"] = r.iterations;
      rec["max_trace_decrease"] = r.max_trace_decrease;
      rec["fitted_weights"] = vector_json(r.fitted_weights);
      rec["fitted_margins"] = matrix_json(r.fitted_margins);
      rec["class_sizes"] = vector_json(r.class_sizes);
      rec["target_classes"] = r.target_classes;
      rec["est_standard"] = r.est_standard;
      rec["est_target_only"] = r.est_target_only;
      rec["rel_bias_target_only"] = r.rel_bias_target_only;
      rec["rel_bias_standard_vs_total"] = r.rel_bias_standard_vs_total;
      rec["rel_bias_standard_vs_target"] = r.rel_bias_standard_vs_target;
      if (r.origin_mass.size()) {
        rec["low_class_mass"] = r.low_class_mass;
        rec["low_class_origin_mass"] = vector_json(r.origin_mass);
      }
    }
    records.push_back(rec);
  }
  const Aggregates& a = report.aggregates;
  Json aggregates = {{"replicates", a.replicates},
                     {"included", a.included},
                     {"failures", a.failures},
                     {"nonconverged", a.nonconverged},
                     {"boundary", a.boundary},
                     {"rel_bias_target_only", to_json(a.target_only)},
                     {"rel_bias_standard_vs_total", to_json(a.standard_vs_total)},
                     {"rel_bias_standard_vs_target", to_json(a.standard_vs_target)},
                     {"fraction_target_only_negative", a.fraction_target_only_negative},
                     {"mean_fitted_weights", vector_json(a.mean_weights)},
                     {"mean_fitted_margins", matrix_json(a.mean_margins)},
                     {"max_trace_decrease", a.max_trace_decrease}};
  if (a.mean_origin_share.size()) aggregates["mean_low_class_origin_share"] = vector_json(a.mean_origin_share);
  Json seeds = Json::array();
  for (const auto& r : report.records) seeds.push_back(r.seed);
  return {{"schema_version", kSchemaVersion},
          {"experiment_id", report.experiment_id},
          {"likelihood", "capture-conditional"},
          {"config", report.config},
          {"records", records},
          {"aggregates", aggregates},
          {"provenance", {{"toolkit_version", kToolkitVersion}, {"seed", report.seed}, {"replicate_seeds", seeds}}}};
}

Json to_json(const std::vector<DfRow>& rows) {
  Json out = Json::array();
  for (const auto& r : rows)
    out.push_back({{"model", r.notation},
                   {"parameter_count", r.parameter_count},
                   {"degrees_of_freedom", r.degrees_of_freedom},
                   {"df_flag", to_string(r.flag)}});
  return {{"schema_version", kSchemaVersion}, {"experiment_id", "df-family"}, {"rows", out}};
}

void write_records_csv(std::ostream& out, const ExperimentReport& report) {
  out << "replicate,seed,failed,converged,boundary,cond_loglik,iterations,true_total,true_target,"
         "est_standard,est_target_only,rel_bias_target_only,rel_bias_standard_vs_total,"
         "rel_bias_standard_vs_target";
  const bool origin = std::any_of(report.records.begin(), report.records.end(),
                                  [](const ReplicateRecord& r) { return r.origin_mass.size() > 0; });
  Eigen::Index origin_classes = 0;
  for (const auto& r : report.records) origin_classes = std::max(origin_classes, r.origin_mass.size());
  if (origin) {
    out << ",low_class_mass";
    for (Eigen::Index c = 0; c < origin_classes; ++c) out << ",low_class_from_class" << c;
  }
  out << '\n';
  out.precision(17);
  for (const auto& r : report.records) {
    out << r.replicate << ',' << r.seed << ',' << r.failed << ',' << r.converged << ',' << r.boundary << ','
        << r.cond_loglik << ',' << r.iterations << ',' << r.true_total << ',' << r.true_target << ','
        << r.est_standard << ',' << r.est_target_only << ',' << r.rel_bias_target_only << ','
        << r.rel_bias_standard_vs_total << ',' << r.rel_bias_standard_vs_target;
    if (origin) {
      out << ',' << r.low_class_mass;
      for (Eigen::Index c = 0; c < origin_classes; ++c) out << ',' << (c < r.origin_mass.size() ? r.origin_mass[c] : 0.0);
    }
    out << '\n';
  }
}

}  // namespace lcmcr
