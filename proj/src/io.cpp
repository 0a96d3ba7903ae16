#include "lcmcr/io.hpp"

#include <algorithm>
#include <fstream>

namespace lcmcr {

namespace {

Json vector_json(const Vector& v) {
  Json out = Json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Json matrix_rows_json(const Matrix& m) {
  Json out = Json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) out.push_back(vector_json(m.row(r).transpose()));
  return out;
}

Vector vector_from(const Json& doc, const std::string& what) {
  if (!doc.is_array()) throw ValidationError("bad-json", what + " must be an array");
  Vector v(static_cast<Eigen::Index>(doc.size()));
  for (std::size_t i = 0; i < doc.size(); ++i) {
    if (!doc[i].is_number()) throw ValidationError("bad-json", what + " must contain numbers");
    v[static_cast<Eigen::Index>(i)] = doc[i].get<double>();
  }
  return v;
}

Matrix matrix_from_rows(const Json& doc, const std::string& what) {
  if (!doc.is_array()) throw ValidationError("bad-json", what + " must be an array of rows");
  Matrix m;
  for (std::size_t r = 0; r < doc.size(); ++r) {
    const Vector row = vector_from(doc[r], what);
    if (r == 0) m.resize(static_cast<Eigen::Index>(doc.size()), row.size());
    if (row.size() != m.cols()) throw ValidationError("dimension-mismatch", what + " rows differ in length");
    m.row(static_cast<Eigen::Index>(r)) = row.transpose();
  }
  return m;
}

Json names_json(const ModelSpec& spec, const std::vector<int>& registers) {
  Json out = Json::array();
  for (int r : registers) out.push_back(spec.register_names[static_cast<std::size_t>(r)]);
  return out;
}

/// Blocks of one kind in slot order, which is the order of the stored tables.
std::vector<Block> blocks_by_slot(const ModelSpec& spec, BlockKind kind) {
  std::vector<Block> out;
  for (const auto& b : blocks(spec))
    if (b.kind == kind) out.push_back(b);
  std::sort(out.begin(), out.end(), [](const Block& a, const Block& b) { return a.slot < b.slot; });
  return out;
}

const Json& field(const Json& doc, const char* key) {
  if (!doc.is_object() || !doc.contains(key))
    throw ValidationError("bad-json", std::string("missing field '") + key + "'");
  return doc.at(key);
}

}  // namespace

Json to_json(const ModelSpec& spec) {
  Json terms = Json::array();
  for (const auto& t : spec.dependence_terms)
    terms.push_back({{"registers", names_json(spec, t.registers)}, {"class_specific", t.class_specific}});
  return {{"registers", spec.register_names}, {"classes", spec.num_classes}, {"dependence", terms}};
}

ModelSpec spec_from_json(const Json& doc) {
  ModelSpec spec;
  try {
    spec.register_names = field(doc, "registers").get<std::vector<std::string>>();
    spec.num_classes = field(doc, "classes").get<int>();
    if (doc.contains("dependence")) {
      for (const auto& term : doc.at("dependence")) {
        DependenceTerm t;
        t.class_specific = term.value("class_specific", false);
        for (const auto& name : field(term, "registers")) {
          const int idx = spec.register_index(name.get<std::string>());
          if (idx < 0)
            throw ValidationError("unknown-register", "dependence term references undeclared register '" +
                                                          name.get<std::string>() + "'");
          t.registers.push_back(idx);
        }
        std::sort(t.registers.begin(), t.registers.end());
        spec.dependence_terms.push_back(std::move(t));
      }
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad-json", std::string("malformed model spec: ") + e.what());
  }
  require_valid(spec);
  return spec;
}

Json to_json(const ModelSpec& spec, const ParameterSet& params) {
  Json tables = Json::array();
  Json shared = Json::array();
  for (const auto& b : blocks_by_slot(spec, BlockKind::class_specific))
    tables.push_back({{"registers", names_json(spec, b.registers)},
                      {"probs", matrix_rows_json(params.block_tables[static_cast<std::size_t>(b.slot)])}});
  for (const auto& b : blocks_by_slot(spec, BlockKind::shared))
    shared.push_back({{"registers", names_json(spec, b.registers)},
                      {"values", vector_json(params.shared_interactions[static_cast<std::size_t>(b.slot)])}});
  return {{"class_weights", vector_json(params.class_weights)},
          {"inclusion_probs", matrix_rows_json(params.inclusion_probs)},
          {"block_tables", tables},
          {"shared_interactions", shared}};
}

ParameterSet params_from_json(const ModelSpec& spec, const Json& doc) {
  require_valid(spec);
  ParameterSet params;
  try {
    params.class_weights = vector_from(field(doc, "class_weights"), "class_weights");
    params.inclusion_probs = matrix_from_rows(field(doc, "inclusion_probs"), "inclusion_probs");
    const auto specific = blocks_by_slot(spec, BlockKind::class_specific);
    const auto shared = blocks_by_slot(spec, BlockKind::shared);
    auto check_registers = [&](const Json& entry, const Block& b, const char* what) {
      if (!entry.contains("registers")) return;
      if (entry.at("registers") != names_json(spec, b.registers))
        throw ValidationError("dimension-mismatch", std::string(what) + " registers do not match the spec");
    };
    const Json tables = doc.value("block_tables", Json::array());
    const Json interactions = doc.value("shared_interactions", Json::array());
    if (tables.size() != specific.size() || interactions.size() != shared.size())
      throw ValidationError("dimension-mismatch", "dependence parameters do not match the spec's terms");
    for (std::size_t j = 0; j < tables.size(); ++j) {
      check_registers(tables[j], specific[j], "block table");
      params.block_tables.push_back(matrix_from_rows(field(tables[j], "probs"), "block table"));
    }
    for (std::size_t j = 0; j < interactions.size(); ++j) {
      check_registers(interactions[j], shared[j], "shared interaction");
      params.shared_interactions.push_back(vector_from(field(interactions[j], "values"), "shared interaction"));
    }
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad-json", std::string("malformed parameter set: ") + e.what());
  }
  if (params.inclusion_probs.rows() == spec.num_classes &&
      params.inclusion_probs.cols() == spec.num_registers()) {
    bool tables_ok = params.block_tables.size() == static_cast<std::size_t>(std::count_if(
                                                       spec.dependence_terms.begin(), spec.dependence_terms.end(),
                                                       [](const DependenceTerm& t) { return t.class_specific; }));
    for (const auto& b : blocks(spec))
      if (b.kind == BlockKind::class_specific && tables_ok) {
        const auto& t = params.block_tables[static_cast<std::size_t>(b.slot)];
        tables_ok = t.rows() == spec.num_classes && t.cols() == static_cast<Eigen::Index>(b.num_cells());
      }
    if (tables_ok) sync_block_margins(spec, params);
  }
  return params;
}

Json to_json(const StructureReport& report) {
  Json out = {{"independent_cells", report.independent_cells},
              {"parameter_count", report.parameter_count},
              {"degrees_of_freedom", report.degrees_of_freedom},
              {"df_flag", to_string(report.df_flag)}};
  if (report.jacobian_rank) out["jacobian_rank"] = *report.jacobian_rank;
  if (report.rank_deficient) out["rank_deficient"] = *report.rank_deficient;
  return out;
}

Json to_json(const RankCheck& check) {
  return {{"rank", check.rank}, {"rank_deficient", check.rank_deficient}, {"point_ranks", check.point_ranks}};
}

Json to_json(const std::vector<Violation>& violations) {
  Json out = Json::array();
  for (const auto& v : violations) out.push_back({{"code", v.code}, {"message", v.message}});
  return out;
}

Json to_json(const ModelSpec& spec, const FitResult& fit, bool with_trace) {
  Json posteriors = Json::object();
  for (Eigen::Index r = 1; r < fit.posteriors.rows(); ++r)
    posteriors[profile_string(static_cast<std::uint32_t>(r), spec.num_registers())] =
        vector_json(fit.posteriors.row(r).transpose());
  Json boundary = Json::array();
  for (const auto& b : fit.boundary) {
    boundary.push_back({{"class", b.latent_class},
                        {"register", b.register_index < 0
                                         ? Json("weight")
                                         : Json(spec.register_names[static_cast<std::size_t>(b.register_index)])},
                        {"value", b.value}});
  }
  Json starts = Json::array();
  for (const auto& s : fit.starts) {
    Json entry = {{"start_index", s.start_index},
                  {"cond_loglik", s.cond_loglik},
                  {"iterations", s.iterations},
                  {"converged", s.converged},
                  {"failed", s.failed}};
    if (s.failed) entry["diagnostic"] = s.diagnostic;
    starts.push_back(entry);
  }
  Json out = {{"schema_version", kSchemaVersion},
              {"likelihood", "capture-conditional"},
              {"model", notation(spec)},
              {"spec", to_json(spec)},
              {"params", to_json(spec, fit.params)},
              {"register_margins", matrix_rows_json(register_margins(spec, fit.params))},
              {"cond_loglik", fit.cond_loglik},
              {"iterations", fit.iterations},
              {"converged", fit.converged},
              {"start_index", fit.start_index},
              {"aic", fit.aic},
              {"bic", fit.bic},
              {"structure", to_json(fit.structure)},
              {"boundary", boundary},
              {"starts", starts},
              {"posteriors", posteriors}};
  if (with_trace) out["loglik_trace"] = fit.loglik_trace;
  return out;
}

Json to_json(const PopEstimate& estimate) {
  return {{"schema_version", kSchemaVersion},
          {"likelihood", "capture-conditional"},
          {"headline", estimate.headline},
          {"headline_value", estimate.headline_value()},
          {"total_all_classes", estimate.total_all_classes},
          {"total_target_only", estimate.total_target_only},
          {"target_classes", estimate.target_classes},
          {"class_sizes", vector_json(estimate.class_sizes)},
          {"observed_class_counts", vector_json(estimate.observed_class_counts)},
          {"miss_probs", vector_json(estimate.miss_probs)},
          {"observed_n", estimate.observed_n}};
}

Json read_json_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("io-error", "cannot open '" + path + "'");
  try {
    return Json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("bad-json", "'" + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace lcmcr
