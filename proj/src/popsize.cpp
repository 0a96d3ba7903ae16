#include "lcmcr/popsize.hpp"

#include <algorithm>
#include <sstream>

namespace lcmcr {

namespace {

PopEstimate build_estimate(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts) {
  const EStepResult step = e_step(spec, params, counts);
  const MissProbability miss = miss_probability(spec, params);
  PopEstimate out;
  out.observed_n = counts.total();
  out.miss_probs = miss.per_class;
  out.observed_class_counts = Vector::Zero(spec.num_classes);
  for (std::uint32_t r = 1; r < counts.num_cells(); ++r)
    if (counts[r] > 0)
      out.observed_class_counts += static_cast<double>(counts[r]) * step.posteriors.row(r).transpose();
  out.class_sizes.resize(spec.num_classes);
  for (int x = 0; x < spec.num_classes; ++x) {
    if (miss.per_class[x] > 1.0 - kUnboundedMissTolerance)
      throw NumericalError("class " + std::to_string(x) + " has miss probability " +
                           std::to_string(miss.per_class[x]) + "; its size estimate is unbounded");
    out.class_sizes[x] = out.observed_class_counts[x] / (1.0 - miss.per_class[x]);
  }
  out.total_all_classes = out.class_sizes.sum();
  return out;
}

}  // namespace

Vector class_sizes(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts) {
  return build_estimate(spec, params, counts).class_sizes;
}

PopEstimate estimate_standard(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts) {
  PopEstimate out = build_estimate(spec, params, counts);
  out.target_classes.resize(static_cast<std::size_t>(spec.num_classes));
  for (int x = 0; x < spec.num_classes; ++x) out.target_classes[static_cast<std::size_t>(x)] = x;
  out.total_target_only = out.total_all_classes;
  out.headline = "standard";
  return out;
}

PopEstimate estimate_overcoverage(const ModelSpec& spec, const ParameterSet& params, const CaptureCounts& counts,
                                  const std::vector<int>& target_classes) {
  if (target_classes.empty()) throw ValidationError("empty-target", "at least one target class is required");
  std::vector<int> targets = target_classes;
  std::sort(targets.begin(), targets.end());
  targets.erase(std::unique(targets.begin(), targets.end()), targets.end());
  for (int x : targets)
    if (x < 0 || x >= spec.num_classes)
      throw ValidationError("unknown-class", "target class " + std::to_string(x) + " does not exist");
  PopEstimate out = build_estimate(spec, params, counts);
  out.target_classes = targets;
  out.total_target_only = 0.0;
  for (int x : targets) out.total_target_only += out.class_sizes[x];
  out.headline = "overcoverage";
  return out;
}

TargetRule TargetRule::parse(const std::string& text) {
  if (text == "highest" || text == "highest-mean-inclusion") return {Kind::highest_mean_inclusion, {}};
  if (text == "all") return {Kind::all, {}};
  TargetRule rule{Kind::explicit_list, {}};
  std::stringstream in(text);
  std::string item;
  while (std::getline(in, item, ',')) {
    try {
      std::size_t used = 0;
      rule.classes.push_back(std::stoi(item, &used));
      if (used != item.size()) throw std::invalid_argument(item);
    } catch (const std::exception&) {
      throw ValidationError("bad-target-rule", "target rule must be 'highest', 'all' or class indices, got '" +
                                                   text + "'");
    }
  }
  if (rule.classes.empty()) throw ValidationError("bad-target-rule", "empty target class list");
  return rule;
}

std::string TargetRule::to_string() const {
  switch (kind) {
    case Kind::highest_mean_inclusion:
      return "highest-mean-inclusion";
    case Kind::all:
      return "all";
    case Kind::explicit_list: {
      std::string out;
      for (std::size_t i = 0; i < classes.size(); ++i) out += (i ? "," : "") + std::to_string(classes[i]);
      return out;
    }
  }
  return {};
}

std::vector<int> designate_target(const ModelSpec& spec, const FitResult& fit, const TargetRule& rule) {
  switch (rule.kind) {
    case TargetRule::Kind::all: {
      std::vector<int> all(static_cast<std::size_t>(spec.num_classes));
      for (int x = 0; x < spec.num_classes; ++x) all[static_cast<std::size_t>(x)] = x;
      return all;
    }
    case TargetRule::Kind::explicit_list:
      return rule.classes;
    case TargetRule::Kind::highest_mean_inclusion: {
      // Canonical order ranks classes by mean inclusion; the last is highest.
      const auto order = canonical_order(spec, fit.params);
      return {order.back()};
    }
  }
  return {};
}

}  // namespace lcmcr
