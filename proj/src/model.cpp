#include "lcmcr/model.hpp"

#include <algorithm>
#include <bit>
#include <cctype>
#include <cmath>
#include <set>
#include <sstream>

namespace lcmcr {

namespace {

std::string join_violations(const std::vector<Violation>& violations) {
  std::ostringstream out;
  for (std::size_t i = 0; i < violations.size(); ++i) {
    if (i) out << "; ";
    out << violations[i].code << ": " << violations[i].message;
  }
  return out.str();
}

bool is_probability(double v) { return std::isfinite(v) && v >= 0.0 && v <= 1.0; }

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(join_violations(violations)), violations_(std::move(violations)) {}

ValidationError::ValidationError(std::string code, std::string message)
    : ValidationError(std::vector<Violation>{{std::move(code), std::move(message)}}) {}

std::string profile_string(std::uint32_t mask, int num_registers) {
  std::string bits(static_cast<std::size_t>(num_registers), '0');
  for (int k = 0; k < num_registers; ++k)
    if (mask & register_bit(k, num_registers)) bits[static_cast<std::size_t>(k)] = '1';
  return bits;
}

std::string CaptureProfile::to_string() const { return profile_string(mask, num_registers); }

CaptureProfile CaptureProfile::parse(std::string_view bits) {
  if (bits.empty() || bits.size() > 31)
    throw ValidationError("bad-profile", "profile must have between 1 and 31 characters");
  CaptureProfile profile;
  profile.num_registers = static_cast<int>(bits.size());
  for (char ch : bits) {
    if (ch != '0' && ch != '1')
      throw ValidationError("bad-profile", "profile '" + std::string(bits) + "' is not a bitstring");
    profile.mask = (profile.mask << 1) | static_cast<std::uint32_t>(ch == '1');
  }
  return profile;
}

int ModelSpec::register_index(std::string_view name) const {
  auto it = std::find(register_names.begin(), register_names.end(), name);
  return it == register_names.end() ? -1 : static_cast<int>(it - register_names.begin());
}

std::vector<Violation> validate(const ModelSpec& spec) {
  std::vector<Violation> out;
  const int K = spec.num_registers();
  if (K < 2) out.push_back({"too-few-registers", "at least 2 registers are required"});
  if (K > 31) out.push_back({"too-many-registers", "at most 31 registers are supported"});
  if (spec.num_classes < 1) out.push_back({"no-classes", "at least one latent class is required"});

  std::set<std::string> names;
  for (const auto& name : spec.register_names) {
    if (name.empty()) out.push_back({"empty-register-name", "register names must be non-empty"});
    if (!names.insert(name).second)
      out.push_back({"duplicate-register", "register '" + name + "' declared twice"});
  }

  std::vector<int> owner(static_cast<std::size_t>(std::max(K, 0)), -1);
  for (std::size_t j = 0; j < spec.dependence_terms.size(); ++j) {
    const auto& term = spec.dependence_terms[j];
    if (term.registers.size() < 2)
      out.push_back({"term-too-small", "dependence term " + std::to_string(j) +
                                           " must involve at least 2 registers"});
    for (std::size_t i = 0; i < j; ++i) {
      if (std::is_permutation(spec.dependence_terms[i].registers.begin(), spec.dependence_terms[i].registers.end(),
                              term.registers.begin(), term.registers.end()))
        out.push_back({"duplicate-term", "dependence term " + std::to_string(j) + " repeats term " +
                                             std::to_string(i)});
    }
    std::set<int> seen;
    for (int r : term.registers) {
      if (r < 0 || r >= K) {
        out.push_back({"unknown-register", "dependence term " + std::to_string(j) +
                                               " references an undeclared register"});
        continue;
      }
      if (!seen.insert(r).second) {
        out.push_back({"duplicate-register-in-term",
                       "register '" + spec.register_names[static_cast<std::size_t>(r)] +
                           "' repeated within a term"});
        continue;
      }
      auto& o = owner[static_cast<std::size_t>(r)];
      if (o >= 0 && o != static_cast<int>(j)) {
        out.push_back({"register-in-multiple-terms",
                       "register '" + spec.register_names[static_cast<std::size_t>(r)] +
                           "' appears in more than one dependence term"});
      }
      o = static_cast<int>(j);
    }
  }
  return out;
}

std::vector<Block> blocks(const ModelSpec& spec) {
  const int K = spec.num_registers();
  std::vector<int> owner(static_cast<std::size_t>(K), -1);
  std::vector<int> slot(spec.dependence_terms.size(), -1);
  int specific = 0;
  int shared = 0;
  for (std::size_t j = 0; j < spec.dependence_terms.size(); ++j) {
    const auto& term = spec.dependence_terms[j];
    slot[j] = term.class_specific ? specific++ : shared++;
    for (int r : term.registers) owner[static_cast<std::size_t>(r)] = static_cast<int>(j);
  }
  std::vector<Block> out;
  std::vector<bool> emitted(spec.dependence_terms.size(), false);
  for (int k = 0; k < K; ++k) {
    const int j = owner[static_cast<std::size_t>(k)];
    if (j < 0) {
      out.push_back({BlockKind::independent, {k}, -1});
    } else if (!emitted[static_cast<std::size_t>(j)]) {
      emitted[static_cast<std::size_t>(j)] = true;
      const auto& term = spec.dependence_terms[static_cast<std::size_t>(j)];
      std::vector<int> regs = term.registers;
      std::sort(regs.begin(), regs.end());
      out.push_back({term.class_specific ? BlockKind::class_specific : BlockKind::shared,
                     std::move(regs), slot[static_cast<std::size_t>(j)]});
    }
  }
  return out;
}

std::vector<std::uint32_t> interaction_cells(int term_size) {
  std::vector<std::uint32_t> cells;
  for (std::uint32_t c = 0; c < (1u << term_size); ++c)
    if (std::popcount(c) >= 2) cells.push_back(c);
  return cells;
}

std::vector<Violation> validate(const ModelSpec& spec, const ParameterSet& params) {
  auto out = validate(spec);
  if (!out.empty()) return out;

  const int K = spec.num_registers();
  const int L = spec.num_classes;
  const auto layout = blocks(spec);
  std::size_t num_specific = 0;
  std::size_t num_shared = 0;
  for (const auto& b : layout) {
    if (b.kind == BlockKind::class_specific) ++num_specific;
    if (b.kind == BlockKind::shared) ++num_shared;
  }

  if (params.class_weights.size() != L)
    out.push_back({"dimension-mismatch", "class_weights must have " + std::to_string(L) + " entries"});
  if (params.inclusion_probs.rows() != L || params.inclusion_probs.cols() != K)
    out.push_back({"dimension-mismatch", "inclusion_probs must be " + std::to_string(L) + " x " +
                                             std::to_string(K)});
  if (params.block_tables.size() != num_specific)
    out.push_back({"dimension-mismatch", "expected " + std::to_string(num_specific) +
                                             " class-specific block tables"});
  if (params.shared_interactions.size() != num_shared)
    out.push_back({"dimension-mismatch", "expected " + std::to_string(num_shared) +
                                             " shared interaction vectors"});
  for (const auto& b : layout) {
    if (b.kind == BlockKind::class_specific && static_cast<std::size_t>(b.slot) < params.block_tables.size()) {
      const auto& t = params.block_tables[static_cast<std::size_t>(b.slot)];
      if (t.rows() != L || t.cols() != static_cast<Eigen::Index>(b.num_cells()))
        out.push_back({"dimension-mismatch", "block table " + std::to_string(b.slot) + " must be " +
                                                 std::to_string(L) + " x " + std::to_string(b.num_cells())});
    }
    if (b.kind == BlockKind::shared && static_cast<std::size_t>(b.slot) < params.shared_interactions.size()) {
      const auto expected = static_cast<Eigen::Index>(interaction_cells(b.size()).size());
      if (params.shared_interactions[static_cast<std::size_t>(b.slot)].size() != expected)
        out.push_back({"dimension-mismatch", "shared interaction " + std::to_string(b.slot) +
                                                 " must have " + std::to_string(expected) + " values"});
    }
  }
  if (!out.empty()) return out;

  for (Eigen::Index x = 0; x < L; ++x)
    if (!is_probability(params.class_weights[x]))
      out.push_back({"prob-out-of-range", "class weight " + std::to_string(x) + " outside [0,1]"});
  if (std::abs(params.class_weights.sum() - 1.0) > 1e-12)
    out.push_back({"weights-not-normalized", "class weights sum to " +
                                                 std::to_string(params.class_weights.sum())});
  for (Eigen::Index x = 0; x < L; ++x)
    for (Eigen::Index k = 0; k < K; ++k)
      if (!is_probability(params.inclusion_probs(x, k)))
        out.push_back({"prob-out-of-range", "inclusion probability (class " + std::to_string(x) +
                                                ", register " + std::to_string(k) + ") outside [0,1]"});

  for (const auto& b : layout) {
    if (b.kind == BlockKind::class_specific) {
      const auto& t = params.block_tables[static_cast<std::size_t>(b.slot)];
      for (Eigen::Index x = 0; x < L; ++x) {
        bool in_range = true;
        for (Eigen::Index c = 0; c < t.cols(); ++c) in_range = in_range && is_probability(t(x, c));
        if (!in_range) {
          out.push_back({"prob-out-of-range", "block table " + std::to_string(b.slot) + " class " +
                                                  std::to_string(x) + " has entries outside [0,1]"});
          continue;
        }
        if (std::abs(t.row(x).sum() - 1.0) > 1e-12) {
          out.push_back({"block-not-normalized", "block table " + std::to_string(b.slot) + " class " +
                                                     std::to_string(x) + " does not sum to 1"});
          continue;
        }
        for (int i = 0; i < b.size(); ++i) {
          double margin = 0.0;
          const std::uint32_t bit = 1u << (b.size() - 1 - i);
          for (std::uint32_t c = 0; c < b.num_cells(); ++c)
            if (c & bit) margin += t(x, c);
          const int k = b.registers[static_cast<std::size_t>(i)];
          if (std::abs(margin - params.inclusion_probs(x, k)) > 1e-9)
            out.push_back({"block-margin-mismatch",
                           "inclusion probability of '" + spec.register_names[static_cast<std::size_t>(k)] +
                               "' in class " + std::to_string(x) + " differs from its block-table margin"});
        }
      }
    }
    if (b.kind == BlockKind::shared) {
      if (!params.shared_interactions[static_cast<std::size_t>(b.slot)].allFinite())
        out.push_back({"interaction-not-finite", "shared interaction " + std::to_string(b.slot) +
                                                     " has non-finite values"});
    }
  }
  return out;
}

void require_valid(const ModelSpec& spec) {
  auto v = validate(spec);
  if (!v.empty()) throw ValidationError(std::move(v));
}

void require_valid(const ModelSpec& spec, const ParameterSet& params) {
  auto v = validate(spec, params);
  if (!v.empty()) throw ValidationError(std::move(v));
}

namespace {

Vector block_distribution_unchecked(const Block& b, const ParameterSet& params, int x) {
  switch (b.kind) {
    case BlockKind::independent: {
      const double p = params.inclusion_probs(x, b.registers.front());
      Vector d(2);
      d << 1.0 - p, p;
      return d;
    }
    case BlockKind::class_specific:
      return params.block_tables[static_cast<std::size_t>(b.slot)].row(x).transpose();
    case BlockKind::shared: {
      const Vector& eta = params.shared_interactions[static_cast<std::size_t>(b.slot)];
      const auto cells = interaction_cells(b.size());
      Vector d(b.num_cells());
      for (std::uint32_t c = 0; c < b.num_cells(); ++c) {
        double v = 1.0;
        for (int i = 0; i < b.size(); ++i) {
          const double p = params.inclusion_probs(x, b.registers[static_cast<std::size_t>(i)]);
          v *= (c >> (b.size() - 1 - i)) & 1u ? p : 1.0 - p;
        }
        d[c] = v;
      }
      for (std::size_t j = 0; j < cells.size(); ++j) d[cells[j]] *= std::exp(eta[static_cast<Eigen::Index>(j)]);
      return d / d.sum();
    }
  }
  return {};
}

}  // namespace

Vector block_distribution(const ModelSpec& spec, const ParameterSet& params, int block, int latent_class) {
  require_valid(spec, params);
  const auto layout = blocks(spec);
  if (block < 0 || block >= static_cast<int>(layout.size()) || latent_class < 0 ||
      latent_class >= spec.num_classes)
    throw ValidationError("dimension-mismatch", "block or class index out of range");
  return block_distribution_unchecked(layout[static_cast<std::size_t>(block)], params, latent_class);
}

double cell_probability(const ModelSpec& spec, const ParameterSet& params, const CaptureProfile& profile) {
  require_valid(spec, params);
  if (profile.num_registers != spec.num_registers())
    throw ValidationError("dimension-mismatch", "profile length " + std::to_string(profile.num_registers) +
                                                    " differs from register count " +
                                                    std::to_string(spec.num_registers()));
  const int K = spec.num_registers();
  const auto layout = blocks(spec);
  double total = 0.0;
  for (int x = 0; x < spec.num_classes; ++x) {
    double v = params.class_weights[x];
    for (const auto& b : layout) v *= block_distribution_unchecked(b, params, x)[b.cell(profile.mask, K)];
    total += v;
  }
  return total;
}

Matrix class_conditional(const ModelSpec& spec, const ParameterSet& params) {
  require_valid(spec, params);
  const int K = spec.num_registers();
  if (K > kMaxDenseRegisters)
    throw CapacityError("dense enumeration supports at most " + std::to_string(kMaxDenseRegisters) +
                        " registers");
  const std::uint32_t cells = 1u << K;
  const auto layout = blocks(spec);
  Matrix out = Matrix::Ones(cells, spec.num_classes);
  for (int x = 0; x < spec.num_classes; ++x) {
    for (const auto& b : layout) {
      const Vector d = block_distribution_unchecked(b, params, x);
      for (std::uint32_t r = 0; r < cells; ++r) out(r, x) *= d[b.cell(r, K)];
    }
  }
  return out;
}

Vector full_distribution(const ModelSpec& spec, const ParameterSet& params) {
  return class_conditional(spec, params) * params.class_weights;
}

MissProbability miss_probability(const ModelSpec& spec, const ParameterSet& params) {
  require_valid(spec, params);
  const auto layout = blocks(spec);
  MissProbability out;
  out.per_class = Vector::Ones(spec.num_classes);
  for (int x = 0; x < spec.num_classes; ++x)
    for (const auto& b : layout) out.per_class[x] *= block_distribution_unchecked(b, params, x)[0];
  out.overall = params.class_weights.dot(out.per_class);
  return out;
}

Matrix register_margins(const ModelSpec& spec, const ParameterSet& params) {
  require_valid(spec, params);
  Matrix out = params.inclusion_probs;
  for (const auto& b : blocks(spec)) {
    if (b.kind == BlockKind::independent) continue;
    for (int x = 0; x < spec.num_classes; ++x) {
      const Vector d = block_distribution_unchecked(b, params, x);
      for (int i = 0; i < b.size(); ++i) {
        const std::uint32_t bit = 1u << (b.size() - 1 - i);
        double margin = 0.0;
        for (std::uint32_t c = 0; c < b.num_cells(); ++c)
          if (c & bit) margin += d[c];
        out(x, b.registers[static_cast<std::size_t>(i)]) = margin;
      }
    }
  }
  return out;
}

void sync_block_margins(const ModelSpec& spec, ParameterSet& params) {
  for (const auto& b : blocks(spec)) {
    if (b.kind != BlockKind::class_specific) continue;
    const auto& t = params.block_tables.at(static_cast<std::size_t>(b.slot));
    for (Eigen::Index x = 0; x < t.rows(); ++x) {
      for (int i = 0; i < b.size(); ++i) {
        const std::uint32_t bit = 1u << (b.size() - 1 - i);
        double margin = 0.0;
        for (std::uint32_t c = 0; c < b.num_cells(); ++c)
          if (c & bit) margin += t(x, c);
        params.inclusion_probs(x, b.registers[static_cast<std::size_t>(i)]) = margin;
      }
    }
  }
}

double pairwise_log_odds_ratio(const Eigen::Ref<const Vector>& distribution, int num_registers, int first,
                               int second) {
  const std::uint32_t a = register_bit(first, num_registers);
  const std::uint32_t b = register_bit(second, num_registers);
  double n[2][2] = {{0.0, 0.0}, {0.0, 0.0}};
  for (Eigen::Index r = 0; r < distribution.size(); ++r) {
    const auto m = static_cast<std::uint32_t>(r);
    n[(m & a) ? 1 : 0][(m & b) ? 1 : 0] += distribution[r];
  }
  return std::log(n[1][1]) + std::log(n[0][0]) - std::log(n[1][0]) - std::log(n[0][1]);
}

ParameterSet independence_parameters(const ModelSpec& spec, const Vector& class_weights,
                                     const Matrix& inclusion_probs) {
  require_valid(spec);
  ParameterSet params{class_weights, inclusion_probs, {}, {}};
  const auto layout = blocks(spec);
  for (const auto& b : layout) {
    if (b.kind == BlockKind::class_specific) params.block_tables.emplace_back();
    if (b.kind == BlockKind::shared) params.shared_interactions.emplace_back();
  }
  for (const auto& b : layout) {
    if (b.kind == BlockKind::class_specific) {
      Matrix t(spec.num_classes, b.num_cells());
      for (int x = 0; x < spec.num_classes; ++x) {
        for (std::uint32_t c = 0; c < b.num_cells(); ++c) {
          double v = 1.0;
          for (int i = 0; i < b.size(); ++i) {
            const double p = inclusion_probs(x, b.registers[static_cast<std::size_t>(i)]);
            v *= (c >> (b.size() - 1 - i)) & 1u ? p : 1.0 - p;
          }
          t(x, c) = v;
        }
      }
      params.block_tables[static_cast<std::size_t>(b.slot)] = std::move(t);
    } else if (b.kind == BlockKind::shared) {
      params.shared_interactions[static_cast<std::size_t>(b.slot)] =
          Vector::Zero(static_cast<Eigen::Index>(interaction_cells(b.size()).size()));
    }
  }
  return params;
}

std::string notation(const ModelSpec& spec) {
  const std::string latent = spec.num_classes > 1 ? "X" : "";
  std::string out;
  for (const auto& b : blocks(spec)) {
    if (b.kind == BlockKind::class_specific) {
      out += "[";
      for (int r : b.registers) out += spec.register_names[static_cast<std::size_t>(r)];
      out += latent + "]";
    } else {
      for (int r : b.registers) out += "[" + spec.register_names[static_cast<std::size_t>(r)] + latent + "]";
    }
  }
  for (const auto& b : blocks(spec)) {
    if (b.kind != BlockKind::shared) continue;
    out += "[";
    for (int r : b.registers) out += spec.register_names[static_cast<std::size_t>(r)];
    out += "]";
  }
  return out;
}

ModelSpec parse_notation(std::string_view text, std::optional<int> num_classes) {
  std::vector<std::string> groups;
  std::size_t i = 0;
  while (i < text.size()) {
    const char ch = text[i];
    if (ch == ' ') {
      ++i;
      continue;
    }
    if (ch != '[') throw ValidationError("bad-notation", "expected '[' in model notation");
    const auto close = text.find(']', i);
    if (close == std::string_view::npos) throw ValidationError("bad-notation", "unterminated '['");
    groups.emplace_back(text.substr(i + 1, close - i - 1));
    i = close + 1;
  }
  if (groups.empty()) throw ValidationError("bad-notation", "empty model notation");

  ModelSpec spec;
  bool has_latent = false;
  struct Group {
    std::vector<int> registers;
    bool latent;
  };
  std::vector<Group> parsed;
  for (const auto& g : groups) {
    Group group{{}, false};
    for (char ch : g) {
      if (ch == 'X') {
        group.latent = true;
        continue;
      }
      if (!std::isalpha(static_cast<unsigned char>(ch)))
        throw ValidationError("bad-notation", std::string("invalid register symbol '") + ch + "'");
      const std::string name(1, ch);
      int idx = spec.register_index(name);
      if (idx < 0) {
        spec.register_names.push_back(name);
        idx = spec.num_registers() - 1;
      }
      group.registers.push_back(idx);
    }
    if (group.registers.empty()) throw ValidationError("bad-notation", "term without registers");
    has_latent = has_latent || group.latent;
    parsed.push_back(std::move(group));
  }
  spec.num_classes = num_classes.value_or(has_latent ? 2 : 1);
  for (auto& g : parsed) {
    if (g.registers.size() < 2) continue;
    std::sort(g.registers.begin(), g.registers.end());
    spec.dependence_terms.push_back({g.registers, g.latent});
  }
  require_valid(spec);
  return spec;
}

}  // namespace lcmcr
