#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <string>

#include "lcmcr/model.hpp"

namespace lcmcr {

/// Observed counts over the 2^K - 1 capture profiles. Stored densely and
/// indexed by profile mask; entry 0 (the unobservable all-zero profile) is
/// always zero.
class CaptureCounts {
 public:
  /// Throws ValidationError when `dense` has the wrong length, a negative
  /// entry, a non-zero all-zero cell, or a zero total.
  CaptureCounts(int num_registers, CountVector dense);

  static CaptureCounts from_map(int num_registers, const std::map<std::string, std::int64_t>& counts);

  int num_registers() const { return num_registers_; }
  std::int64_t total() const { return total_; }
  const CountVector& dense() const { return dense_; }
  std::int64_t operator[](std::uint32_t mask) const { return dense_[mask]; }
  std::uint32_t num_cells() const { return 1u << num_registers_; }

  /// The same counts multiplied by `factor`.
  CaptureCounts scaled(std::int64_t factor) const;

 private:
  int num_registers_;
  CountVector dense_;
  std::int64_t total_;
};

/// `profile,count` CSV, one row per profile with a positive count, in
/// ascending bitstring order.
void write_counts_csv(std::ostream& out, const CaptureCounts& counts);

/// Reads `profile,count` CSV. Rejects the all-zero profile, duplicate rows,
/// inconsistent profile lengths, and a length differing from
/// `expected_registers` when that is positive.
CaptureCounts read_counts_csv(std::istream& in, int expected_registers = 0);

/// Complete table CSV: `profile,class,count` for every profile and class.
void write_complete_table_csv(std::ostream& out, const CountMatrix& table, int num_registers);

}  // namespace lcmcr
