#pragma once

#include <json.hpp>

#include "lcmcr/emfit.hpp"
#include "lcmcr/model.hpp"
#include "lcmcr/popsize.hpp"
#include "lcmcr/simgen.hpp"
#include "lcmcr/structure.hpp"

namespace lcmcr {

using Json = nlohmann::ordered_json;

/// Version stamped into every JSON document written by the toolkit.
inline constexpr int kSchemaVersion = 1;
inline constexpr const char* kToolkitVersion = "0.1.0";

/// {"registers": [...], "classes": L, "dependence": [{"registers": [...], "class_specific": b}]}
Json to_json(const ModelSpec& spec);
ModelSpec spec_from_json(const Json& doc);

/// {"class_weights": [...], "inclusion_probs": [[...] per class],
///  "block_tables": [{"registers": [...], "probs": [[...] per class]}],
///  "shared_interactions": [{"registers": [...], "values": [...]}]}
/// Reading re-derives the class-specific register columns of
/// inclusion_probs from the block tables.
Json to_json(const ModelSpec& spec, const ParameterSet& params);
ParameterSet params_from_json(const ModelSpec& spec, const Json& doc);

Json to_json(const StructureReport& report);
Json to_json(const RankCheck& check);
Json to_json(const std::vector<Violation>& violations);

/// Fit document; the trace of the winning start is included when
/// `with_trace` is set.
Json to_json(const ModelSpec& spec, const FitResult& fit, bool with_trace);
Json to_json(const PopEstimate& estimate);

Json read_json_file(const std::string& path);

}  // namespace lcmcr
