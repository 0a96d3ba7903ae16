#pragma once

#include <Eigen/Dense>

#include <cstdint>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include "lcmcr/errors.hpp"

namespace lcmcr {

using Vector = Eigen::VectorXd;
using Matrix = Eigen::MatrixXd;
using CountVector = Eigen::Matrix<std::int64_t, Eigen::Dynamic, 1>;
using CountMatrix = Eigen::Matrix<std::int64_t, Eigen::Dynamic, Eigen::Dynamic>;

/// Registers beyond this count are not enumerated densely.
inline constexpr int kMaxDenseRegisters = 20;

/// Floor applied to cell probabilities inside likelihood evaluation.
inline constexpr double kLikelihoodEpsilon = 1e-10;

/// Presence pattern of one unit across the K registers.
///
/// Profiles are packed into an integer mask with register 0 as the most
/// significant bit, so the mask written in binary with K digits is the
/// bitstring used in CSV files ("1010" = present in registers 0 and 2).
struct CaptureProfile {
  std::uint32_t mask = 0;
  int num_registers = 0;

  bool present(int k) const { return (mask >> (num_registers - 1 - k)) & 1u; }
  std::string to_string() const;
  static CaptureProfile parse(std::string_view bits);
};

inline std::uint32_t register_bit(int k, int num_registers) {
  return 1u << (num_registers - 1 - k);
}

std::string profile_string(std::uint32_t mask, int num_registers);

/// A local dependence term over a subset of registers (indices into the
/// spec's register list, kept in spec order).
///
/// A shared term adds one log-linear interaction per non-redundant cell of
/// the subset, identical in every latent class ("[AX][BX][CX][DX][CD]").
/// A class-specific term replaces the subset's registers by a free joint
/// table per class ("[AX][BX][CDX]").
struct DependenceTerm {
  std::vector<int> registers;
  bool class_specific = false;

  friend bool operator==(const DependenceTerm&, const DependenceTerm&) = default;
};

struct ModelSpec {
  std::vector<std::string> register_names;
  int num_classes = 1;
  std::vector<DependenceTerm> dependence_terms;

  int num_registers() const { return static_cast<int>(register_names.size()); }
  int register_index(std::string_view name) const;  // -1 when absent

  friend bool operator==(const ModelSpec&, const ModelSpec&) = default;
};

/// Model parameters for a ModelSpec with L classes and K registers.
///
/// `block_tables[j]` belongs to the j-th class-specific term and is L x 2^m;
/// column c is the joint cell whose bitstring (first term register = most
/// significant bit) is c. The term's registers also keep their single
/// register margins in `inclusion_probs`.
///
/// `shared_interactions[j]` belongs to the j-th shared term and holds one
/// log-scale value per cell with at least two registers present, in
/// ascending cell order. For shared-term registers `inclusion_probs` are the
/// baseline probabilities that the interaction multiplies before
/// renormalisation, not the margins; see register_margins().
struct ParameterSet {
  Vector class_weights;
  Matrix inclusion_probs;
  std::vector<Matrix> block_tables;
  std::vector<Vector> shared_interactions;
};

/// Spec invariants only.
std::vector<Violation> validate(const ModelSpec& spec);
/// Spec and parameter invariants; empty means ok.
std::vector<Violation> validate(const ModelSpec& spec, const ParameterSet& params);

void require_valid(const ModelSpec& spec);
void require_valid(const ModelSpec& spec, const ParameterSet& params);

/// Cells of a shared term carrying an interaction value, ascending.
std::vector<std::uint32_t> interaction_cells(int term_size);

enum class BlockKind { independent, class_specific, shared };

/// Factor of the class-conditional distribution. Registers outside every
/// dependence term form singleton independent blocks; each term forms one
/// block. `slot` indexes block_tables or shared_interactions.
struct Block {
  BlockKind kind = BlockKind::independent;
  std::vector<int> registers;
  int slot = -1;

  int size() const { return static_cast<int>(registers.size()); }
  std::uint32_t num_cells() const { return 1u << registers.size(); }
  /// Cell of this block occupied by a profile mask.
  std::uint32_t cell(std::uint32_t mask, int num_registers) const {
    std::uint32_t c = 0;
    for (int r : registers) c = (c << 1) | ((mask >> (num_registers - 1 - r)) & 1u);
    return c;
  }
};

/// Blocks ordered by their first register. Assumes a valid spec.
std::vector<Block> blocks(const ModelSpec& spec);

/// Distribution of one block within class x, 2^m entries.
Vector block_distribution(const ModelSpec& spec, const ParameterSet& params,
                          int block, int latent_class);

double cell_probability(const ModelSpec& spec, const ParameterSet& params,
                        const CaptureProfile& profile);

/// P(profile | class) for every profile, 2^K x L.
Matrix class_conditional(const ModelSpec& spec, const ParameterSet& params);

/// P(profile) for every profile, indexed by mask. Throws CapacityError for
/// K above kMaxDenseRegisters.
Vector full_distribution(const ModelSpec& spec, const ParameterSet& params);

struct MissProbability {
  double overall = 0.0;
  Vector per_class;
};

/// Probability of the all-zero profile, overall and within each class.
MissProbability miss_probability(const ModelSpec& spec, const ParameterSet& params);

/// Marginal inclusion probability of each register within each class, L x K.
Matrix register_margins(const ModelSpec& spec, const ParameterSet& params);

/// Overwrite inclusion_probs columns of class-specific registers with the
/// margins of their block tables.
void sync_block_margins(const ModelSpec& spec, ParameterSet& params);

/// Log odds ratio between two registers in a 2^K distribution.
double pairwise_log_odds_ratio(const Eigen::Ref<const Vector>& distribution,
                               int num_registers, int first, int second);

/// Parameters with every dependence value neutral: class-specific tables
/// are products of the given inclusion probabilities, interactions zero.
ParameterSet independence_parameters(const ModelSpec& spec, const Vector& class_weights,
                                     const Matrix& inclusion_probs);

/// Log-linear notation, e.g. "[AX][BX][CX][DX][CD]" or "[AX][BX][CDX]".
std::string notation(const ModelSpec& spec);

/// Parse log-linear notation. Registers are single letters other than X,
/// ordered by first appearance; X marks the latent variable. Brackets
/// without X and with two or more registers become shared terms. The class
/// count defaults to 2 when X appears and 1 otherwise.
ModelSpec parse_notation(std::string_view text, std::optional<int> num_classes = {});

}  // namespace lcmcr
