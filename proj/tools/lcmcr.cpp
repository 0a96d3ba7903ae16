// lcmcr: command-line front end for latent-class capture-recapture.
//
// Exit codes: 0 success, 1 invalid input or usage, 2 numerical failure
// (including non-convergence under --strict).

#include <CLI11.hpp>

#include <cstdio>
#include <fstream>
#include <iomanip>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "lcmcr/experiments.hpp"
#include "lcmcr/io.hpp"
#include "lcmcr/parallel.hpp"

namespace {

using namespace lcmcr;

constexpr int kExitValidation = 1;
constexpr int kExitNumerical = 2;

/// Writes to `path`, or stdout when path is "-".
template <class Fn>
void with_output(const std::string& path, Fn&& write) {
  if (path == "-") {
    write(std::cout);
    std::cout.flush();
    return;
  }
  std::ofstream out(path, std::ios::binary);
  if (!out) throw ValidationError("io-error", "cannot write '" + path + "'");
  write(out);
  if (!out) throw ValidationError("io-error", "failed writing '" + path + "'");
}

void write_json(const std::string& path, const Json& doc) {
  with_output(path, [&](std::ostream& out) { out << doc.dump(2) << '\n'; });
}

CaptureCounts load_counts(const std::string& path, int expected_registers) {
  if (path == "-") return read_counts_csv(std::cin, expected_registers);
  std::ifstream in(path);
  if (!in) throw ValidationError("io-error", "cannot open '" + path + "'");
  return read_counts_csv(in, expected_registers);
}

int resolve_threads(int requested) { return requested > 0 ? requested : default_threads(); }

std::array<double, 3> array3(const std::vector<double>& v) { return {v[0], v[1], v[2]}; }
std::array<double, 4> array4(const std::vector<double>& v) { return {v[0], v[1], v[2], v[3]}; }

std::string fixed(double value, int digits) {
  std::ostringstream s;
  s << std::fixed << std::setprecision(digits) << value;
  return s.str();
}

std::string join(const std::vector<int>& values) {
  std::string out;
  for (std::size_t i = 0; i < values.size(); ++i) out += (i ? "," : "") + std::to_string(values[i]);
  return out;
}

// Options shared by subcommands that load a model.
struct ModelArgs {
  std::string spec_path;
  std::string notation;
  std::optional<int> classes;

  void attach(CLI::App* cmd) {
    auto* spec = cmd->add_option("--spec", spec_path, "Model spec JSON file");
    auto* model = cmd->add_option("--model", notation, "Model notation, e.g. [AX][BX][CDX]");
    spec->excludes(model);
    cmd->add_option("--classes", classes, "Number of latent classes for --model")->needs(model);
  }

  ModelSpec load() const {
    if (!spec_path.empty()) return spec_from_json(read_json_file(spec_path));
    if (!notation.empty()) return parse_notation(notation, classes);
    throw ValidationError("missing-model", "one of --spec or --model is required");
  }
};

struct FitArgs {
  int starts = 20;
  double tol = 1e-8;
  int max_iter = 5000;
  double ipf_tol = 1e-10;
  int ipf_max_iter = 1000;

  void attach(CLI::App* cmd) {
    cmd->add_option("--starts", starts, "EM starts")->capture_default_str();
    cmd->add_option("--tol", tol, "Relative log-likelihood tolerance")->capture_default_str();
    cmd->add_option("--max-iter", max_iter, "EM iteration cap per start")->capture_default_str();
    cmd->add_option("--ipf-tol", ipf_tol, "IPF tolerance for shared terms")->capture_default_str();
    cmd->add_option("--ipf-max-iter", ipf_max_iter, "IPF iteration cap")->capture_default_str();
  }

  FitConfig config(std::uint64_t seed) const {
    FitConfig c;
    c.num_starts = starts;
    c.tol = tol;
    c.max_iter = max_iter;
    c.ipf_tol = ipf_tol;
    c.ipf_max_iter = ipf_max_iter;
    c.seed = seed;
    return c;
  }
};

struct CritiqueArgs {
  std::vector<double> weights, over, hard, main;

  void attach(CLI::App* cmd) {
    cmd->add_option("--weights", weights, "Critique class weights: over,hard,main")->expected(3)->delimiter(',');
    cmd->add_option("--over-probs", over, "Critique overcoverage class probabilities")->expected(4)->delimiter(',');
    cmd->add_option("--hard-probs", hard, "Critique hard-to-reach class probabilities")->expected(4)->delimiter(',');
    cmd->add_option("--main-probs", main, "Critique mainstream class probabilities")->expected(4)->delimiter(',');
  }

  bool any() const { return !weights.empty() || !over.empty() || !hard.empty() || !main.empty(); }

  CritiqueSettings settings() const {
    CritiqueSettings s;
    if (!weights.empty()) s.weights = array3(weights);
    if (!over.empty()) s.overcoverage_probs = array4(over);
    if (!hard.empty()) s.hard_to_reach_probs = array4(hard);
    if (!main.empty()) s.mainstream_probs = array4(main);
    return s;
  }
};

void print_structure(std::ostream& out, const std::string& model, const StructureReport& r) {
  out << "model              " << model << '\n'
      << "independent cells  " << r.independent_cells << '\n'
      << "parameters         " << r.parameter_count << '\n'
      << "df                 " << r.degrees_of_freedom << '\n'
      << "flag               " << to_string(r.df_flag) << '\n';
  if (r.jacobian_rank) out << "jacobian rank      " << *r.jacobian_rank << '\n';
  if (r.rank_deficient) out << "rank deficient     " << (*r.rank_deficient ? "yes" : "no") << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Latent-class capture-recapture population size estimation"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kToolkitVersion));

  // simulate
  auto* sim = app.add_subcommand("simulate", "Draw a synthetic population and its observed counts");
  std::string preset;
  std::int64_t population = 100000;
  std::uint64_t seed = 0;
  std::optional<double> cd_interaction;
  bool fixed_classes = false;
  int threads = 0;
  std::string out_path = "-";
  std::string complete_out, spec_out, params_out, truth_out;
  CritiqueArgs critique_args;
  sim->add_option("--preset", preset, "scenario1 or critique")
      ->required()
      ->check(CLI::IsMember({"scenario1", "critique"}));
  sim->add_option("--n", population, "Population size N")->capture_default_str();
  sim->add_option("--seed", seed, "Random seed")->required();
  sim->add_option("--cd-interaction", cd_interaction, "Shared C-D log-scale interaction (scenario1)");
  sim->add_flag("--fixed-classes", fixed_classes, "Round N * weights instead of drawing class sizes");
  sim->add_option("--threads", threads, "Worker cap (default LCMCR_THREADS or all cores)");
  sim->add_option("--out", out_path, "Observed counts CSV ('-' for stdout)")->capture_default_str();
  sim->add_option("--complete-out", complete_out, "Complete profile x class table CSV");
  sim->add_option("--spec-out", spec_out, "Generating model spec JSON");
  sim->add_option("--params-out", params_out, "Generating parameters JSON");
  sim->add_option("--truth-out", truth_out, "True class sizes and roles JSON");
  critique_args.attach(sim);

  // fit
  auto* fitcmd = app.add_subcommand("fit", "Fit a latent class model to observed counts");
  ModelArgs fit_model;
  FitArgs fit_args;
  std::string counts_path;
  bool force = false, strict = false, trace = false;
  fit_model.attach(fitcmd);
  fit_args.attach(fitcmd);
  fitcmd->add_option("--counts", counts_path, "Counts CSV ('-' for stdin)")->required();
  fitcmd->add_option("--seed", seed, "Random seed")->required();
  fitcmd->add_flag("--force", force, "Fit even with negative degrees of freedom");
  fitcmd->add_flag("--strict", strict, "Exit 2 when the best start did not converge");
  fitcmd->add_flag("--trace", trace, "Include the log-likelihood trace");
  fitcmd->add_option("--threads", threads, "Worker cap (default LCMCR_THREADS or all cores)");
  fitcmd->add_option("--out", out_path, "Fit JSON ('-' for stdout)")->capture_default_str();

  // estimate
  auto* est = app.add_subcommand("estimate", "Population size under both interpretations");
  std::string fit_path, target = "highest";
  est->add_option("--fit", fit_path, "Fit JSON from 'fit'")->required();
  est->add_option("--counts", counts_path, "Counts CSV ('-' for stdin)")->required();
  est->add_option("--target", target, "Target classes: highest, all, or indices like 1,2")->capture_default_str();
  est->add_option("--out", out_path, "Estimate JSON path (table always goes to stdout)");

  // df
  auto* dfcmd = app.add_subcommand("df", "Parameter count and degrees of freedom");
  ModelArgs df_model;
  bool rank = false, family = false, json_only = false;
  int points = 5;
  std::optional<std::uint64_t> df_seed;
  std::string df_params;
  df_model.attach(dfcmd);
  dfcmd->add_flag("--rank", rank, "Also run the numerical Jacobian rank check");
  dfcmd->add_option("--points", points, "Random points for --rank")->capture_default_str();
  dfcmd->add_option("--seed", df_seed, "Seed for --rank points");
  dfcmd->add_option("--params", df_params, "Parameter JSON evaluated by --rank");
  dfcmd->add_flag("--family", family, "Print the four-register df family table");
  dfcmd->add_flag("--json", json_only, "Print JSON only");
  dfcmd->add_option("--out", out_path, "Also write JSON to this path");

  // experiment
  auto* exp = app.add_subcommand("experiment", "Run a packaged experiment");
  std::string exp_id, csv_path;
  int reps = 50, fitted_classes = 2;
  bool full = false;
  FitArgs exp_fit;
  CritiqueArgs exp_critique;
  exp->add_option("--id", exp_id, "scenario1, critique or df-family")
      ->required()
      ->check(CLI::IsMember({"scenario1", "critique", "df-family"}));
  exp->add_option("--seed", seed, "Master seed")->required();
  exp->add_option("--reps", reps, "Replicates")->capture_default_str();
  exp->add_option("--n", population, "Population size N")->capture_default_str();
  exp->add_flag("--full", full, "Use N = 1,000,000");
  exp->add_option("--cd-interaction", cd_interaction, "Shared C-D interaction (scenario1)");
  exp->add_flag("--fixed-classes", fixed_classes, "Round N * weights instead of drawing class sizes");
  exp->add_option("--target", target, "Target rule: highest, all, or indices")->capture_default_str();
  exp->add_option("--fitted-classes", fitted_classes, "Classes in the fitted model (critique)")
      ->capture_default_str();
  exp->add_option("--threads", threads, "Worker cap (default LCMCR_THREADS or all cores)");
  exp->add_option("--out", out_path, "Report JSON ('-' for stdout)")->capture_default_str();
  exp->add_option("--csv", csv_path, "Per-replicate CSV");
  exp_fit.attach(exp);
  exp_critique.attach(exp);

  // validate
  auto* val = app.add_subcommand("validate", "Check a spec, parameters and counts");
  std::string val_spec, val_params, val_counts;
  val->add_option("--spec", val_spec, "Model spec JSON")->required();
  val->add_option("--params", val_params, "Parameter JSON");
  val->add_option("--counts", val_counts, "Counts CSV");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitValidation;
  }

  try {
    if (sim->parsed()) {
      if (cd_interaction && preset != "scenario1")
        throw ValidationError("bad-argument", "--cd-interaction applies to the scenario1 preset only");
      if (critique_args.any() && preset != "critique")
        throw ValidationError("bad-argument", "critique overrides apply to the critique preset only");
      GeneratingConfig config = preset == "scenario1"
                                    ? preset_scenario1(population, seed, cd_interaction)
                                    : preset_critique(population, seed, critique_args.settings());
      config.fixed_classes = fixed_classes;
      const SimOutput out = simulate(config, resolve_threads(threads));
      with_output(out_path, [&](std::ostream& o) { write_counts_csv(o, out.observed_counts); });
      if (!complete_out.empty())
        with_output(complete_out, [&](std::ostream& o) {
          write_complete_table_csv(o, out.complete_table, config.spec.num_registers());
        });
      if (!spec_out.empty()) write_json(spec_out, to_json(config.spec));
      if (!params_out.empty()) write_json(params_out, to_json(config.spec, config.params));
      if (!truth_out.empty()) {
        Json roles = Json::array();
        for (auto r : config.class_roles) roles.push_back(to_string(r));
        write_json(truth_out, {{"schema_version", kSchemaVersion},
                               {"preset", preset},
                               {"seed", seed},
                               {"population_size", population},
                               {"class_roles", roles},
                               {"true_class_sizes", out.true_class_sizes},
                               {"true_target_size", out.true_target_size},
                               {"observed_n", out.observed_counts.total()}});
      }
      std::cerr << "simulated N=" << population << ", observed n=" << out.observed_counts.total()
                << ", true target=" << out.true_target_size << '\n';
      return 0;
    }

    if (fitcmd->parsed()) {
      const ModelSpec spec = fit_model.load();
      const CaptureCounts counts = load_counts(counts_path, spec.num_registers());
      FitConfig config = fit_args.config(seed);
      config.force = force;
      config.threads = resolve_threads(threads);
      const FitResult result = fit(spec, counts, config);
      write_json(out_path, to_json(spec, result, trace));
      std::cerr << "model " << notation(spec) << ": cond_loglik=" << fixed(result.cond_loglik, 6)
                << ", df=" << result.structure.degrees_of_freedom << ", start=" << result.start_index
                << ", iterations=" << result.iterations << (result.converged ? "" : " (not converged)") << '\n';
      if (!result.boundary.empty()) std::cerr << "warning: " << result.boundary.size() << " boundary estimate(s)\n";
      if (strict && !result.converged) {
        std::cerr << "error: best start did not converge within " << config.max_iter << " iterations\n";
        return kExitNumerical;
      }
      return 0;
    }

    if (est->parsed()) {
      const Json doc = read_json_file(fit_path);
      if (!doc.contains("spec") || !doc.contains("params"))
        throw ValidationError("bad-json", "'" + fit_path + "' is not a fit document");
      const ModelSpec spec = spec_from_json(doc.at("spec"));
      FitResult fitted;
      fitted.params = params_from_json(spec, doc.at("params"));
      require_valid(spec, fitted.params);
      const CaptureCounts counts = load_counts(counts_path, spec.num_registers());
      const TargetRule rule = TargetRule::parse(target);
      const PopEstimate standard = estimate_standard(spec, fitted.params, counts);
      const PopEstimate over =
          estimate_overcoverage(spec, fitted.params, counts, designate_target(spec, fitted, rule));

      std::vector<int> all_classes = standard.target_classes;
      std::cout << "interpretation  classes  estimate\n"
                << "standard        " << std::left << std::setw(9) << join(all_classes)
                << fixed(standard.total_all_classes, 1) << '\n'
                << "overcoverage    " << std::setw(9) << join(over.target_classes)
                << fixed(over.total_target_only, 1) << '\n'
                << '\n'
                << "class  observed(m_x)  inflated(N_x)  miss_prob\n";
      for (int x = 0; x < spec.num_classes; ++x)
        std::cout << std::setw(7) << x << std::setw(15) << fixed(standard.observed_class_counts[x], 1)
                  << std::setw(15) << fixed(standard.class_sizes[x], 1) << fixed(standard.miss_probs[x], 6) << '\n';
      if (!out_path.empty() && out_path != "-") {
        write_json(out_path, {{"schema_version", kSchemaVersion},
                              {"target_rule", rule.to_string()},
                              {"standard", to_json(standard)},
                              {"overcoverage", to_json(over)}});
      }
      return 0;
    }

    if (dfcmd->parsed()) {
      Json doc;
      if (family) {
        const auto rows = df_family_table();
        doc = to_json(rows);
        if (!json_only) {
          std::cout << std::left << std::setw(24) << "model" << std::setw(12) << "parameters" << std::setw(6) << "df"
                    << "flag\n";
          for (const auto& r : rows)
            std::cout << std::setw(24) << r.notation << std::setw(12) << r.parameter_count << std::setw(6)
                      << r.degrees_of_freedom << to_string(r.flag) << '\n';
        }
      } else {
        const ModelSpec spec = df_model.load();
        StructureReport report = degrees_of_freedom(spec);
        Json check;
        if (rank) {
          if (!df_seed) throw ValidationError("missing-seed", "--rank requires --seed");
          std::optional<ParameterSet> params;
          if (!df_params.empty()) params = params_from_json(spec, read_json_file(df_params));
          const RankCheck rc = jacobian_rank_check(spec, params, points, *df_seed);
          report.jacobian_rank = rc.rank;
          report.rank_deficient = rc.rank_deficient;
          check = to_json(rc);
        }
        doc = {{"schema_version", kSchemaVersion}, {"model", notation(spec)}, {"structure", to_json(report)}};
        if (rank) doc["rank_check"] = check;
        if (!json_only) print_structure(std::cout, notation(spec), report);
      }
      if (json_only || out_path == "-") std::cout << doc.dump(2) << '\n';
      if (!out_path.empty() && out_path != "-") write_json(out_path, doc);
      return 0;
    }

    if (exp->parsed()) {
      if (full) population = 1000000;
      const FitConfig fc = exp_fit.config(0);
      const TargetRule rule = TargetRule::parse(target);
      if (exp_id == "df-family") {
        write_json(out_path, to_json(df_family_table()));
        return 0;
      }
      ExperimentReport report;
      if (exp_id == "scenario1") {
        if (exp_critique.any()) throw ValidationError("bad-argument", "critique overrides apply to --id critique only");
        Scenario1Options o;
        o.reps = reps;
        o.population_size = population;
        o.seed = seed;
        o.fit = fc;
        o.cd_interaction = cd_interaction;
        o.fixed_classes = fixed_classes;
        o.rule = rule;
        o.threads = resolve_threads(threads);
        report = run_scenario1(o);
      } else {
        if (cd_interaction) throw ValidationError("bad-argument", "--cd-interaction applies to --id scenario1 only");
        CritiqueOptions o;
        o.reps = reps;
        o.population_size = population;
        o.seed = seed;
        o.fit = fc;
        o.settings = exp_critique.settings();
        o.fitted_classes = fitted_classes;
        o.fixed_classes = fixed_classes;
        o.rule = rule;
        o.threads = resolve_threads(threads);
        report = run_critique(o);
      }
      write_json(out_path, to_json(report));
      if (!csv_path.empty()) with_output(csv_path, [&](std::ostream& o) { write_records_csv(o, report); });
      const Aggregates& a = report.aggregates;
      std::cerr << report.experiment_id << ": " << a.included << "/" << a.replicates << " replicates included, "
                << a.failures << " failed, " << a.nonconverged << " not converged, " << a.boundary
                << " boundary; target-only bias mean " << fixed(a.target_only.mean, 4) << ", median "
                << fixed(a.target_only.median, 4) << '\n';
      return 0;
    }

    if (val->parsed()) {
      std::vector<Violation> violations;
      std::optional<ModelSpec> spec;
      try {
        spec = spec_from_json(read_json_file(val_spec));
      } catch (const ValidationError& e) {
        violations = e.violations();
      }
      if (spec && !val_params.empty()) {
        try {
          const ParameterSet params = params_from_json(*spec, read_json_file(val_params));
          const auto v = validate(*spec, params);
          violations.insert(violations.end(), v.begin(), v.end());
        } catch (const ValidationError& e) {
          violations.insert(violations.end(), e.violations().begin(), e.violations().end());
        }
      }
      if (spec && !val_counts.empty()) {
        try {
          load_counts(val_counts, spec->num_registers());
        } catch (const ValidationError& e) {
          violations.insert(violations.end(), e.violations().begin(), e.violations().end());
        }
      }
      std::cout << Json{{"schema_version", kSchemaVersion}, {"ok", violations.empty()},
                        {"violations", to_json(violations)}}
                       .dump(2)
                << '\n';
      return violations.empty() ? 0 : kExitValidation;
    }
  } catch (const ValidationError& e) {
    for (const auto& v : e.violations()) std::cerr << "error [" << v.code << "]: " << v.message << '\n';
    return kExitValidation;
  } catch (const CapacityError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return kExitValidation;
  } catch (const NumericalError& e) {
    std::cerr << "numerical error: " << e.what() << '\n';
    return kExitNumerical;
  }
  return 0;
}
