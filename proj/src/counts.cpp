#include "lcmcr/counts.hpp"

#include <istream>
#include <ostream>
#include <set>
#include <sstream>

namespace lcmcr {

CaptureCounts::CaptureCounts(int num_registers, CountVector dense)
    : num_registers_(num_registers), dense_(std::move(dense)), total_(0) {
  if (num_registers < 1 || num_registers > kMaxDenseRegisters)
    throw ValidationError("dimension-mismatch", "register count out of range for dense counts");
  if (dense_.size() != (Eigen::Index{1} << num_registers))
    throw ValidationError("dimension-mismatch", "counts vector must have 2^K entries");
  if (dense_[0] != 0)
    throw ValidationError("all-zero-profile", "the all-zero profile is unobservable and must not be counted");
  if ((dense_.array() < 0).any()) throw ValidationError("negative-count", "counts must be non-negative");
  total_ = dense_.sum();
  if (total_ < 1) throw ValidationError("empty-counts", "at least one observed unit is required");
}

CaptureCounts CaptureCounts::from_map(int num_registers, const std::map<std::string, std::int64_t>& counts) {
  CountVector dense = CountVector::Zero(Eigen::Index{1} << num_registers);
  for (const auto& [bits, n] : counts) {
    const auto profile = CaptureProfile::parse(bits);
    if (profile.num_registers != num_registers)
      throw ValidationError("dimension-mismatch", "profile '" + bits + "' has the wrong length");
    if (profile.mask == 0)
      throw ValidationError("all-zero-profile", "the all-zero profile is unobservable and must not be counted");
    dense[profile.mask] = n;
  }
  return CaptureCounts(num_registers, std::move(dense));
}

CaptureCounts CaptureCounts::scaled(std::int64_t factor) const {
  return CaptureCounts(num_registers_, dense_ * factor);
}

void write_counts_csv(std::ostream& out, const CaptureCounts& counts) {
  out << "profile,count\n";
  for (std::uint32_t r = 1; r < counts.num_cells(); ++r)
    if (counts[r] > 0) out << profile_string(r, counts.num_registers()) << ',' << counts[r] << '\n';
}

namespace {

std::string trim(std::string s) {
  const auto first = s.find_first_not_of(" \t\r");
  if (first == std::string::npos) return {};
  const auto last = s.find_last_not_of(" \t\r");
  return s.substr(first, last - first + 1);
}

}  // namespace

CaptureCounts read_counts_csv(std::istream& in, int expected_registers) {
  std::string line;
  int line_no = 0;
  bool header_seen = false;
  int K = expected_registers;
  std::set<std::string> seen;
  std::map<std::string, std::int64_t> rows;
  while (std::getline(in, line)) {
    ++line_no;
    line = trim(line);
    if (line.empty()) continue;
    const auto comma = line.find(',');
    if (comma == std::string::npos)
      throw ValidationError("bad-csv", "line " + std::to_string(line_no) + ": expected 'profile,count'");
    const std::string profile = trim(line.substr(0, comma));
    const std::string count = trim(line.substr(comma + 1));
    if (!header_seen) {
      header_seen = true;
      if (profile == "profile" && count == "count") continue;
      throw ValidationError("bad-csv", "missing 'profile,count' header");
    }
    const auto parsed = CaptureProfile::parse(profile);
    if (K <= 0) K = parsed.num_registers;
    if (parsed.num_registers != K)
      throw ValidationError("dimension-mismatch", "line " + std::to_string(line_no) + ": profile '" + profile +
                                                      "' does not have " + std::to_string(K) + " registers");
    if (parsed.mask == 0)
      throw ValidationError("all-zero-profile", "line " + std::to_string(line_no) +
                                                    ": the all-zero profile is unobservable");
    if (!seen.insert(profile).second)
      throw ValidationError("duplicate-profile", "line " + std::to_string(line_no) + ": profile '" + profile +
                                                     "' repeated");
    std::int64_t n = 0;
    std::size_t used = 0;
    try {
      n = std::stoll(count, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used != count.size() || count.empty())
      throw ValidationError("bad-csv", "line " + std::to_string(line_no) + ": count '" + count +
                                           "' is not an integer");
    rows[profile] = n;
  }
  if (!header_seen) throw ValidationError("bad-csv", "empty counts file");
  if (K <= 0) throw ValidationError("empty-counts", "counts file has no rows");
  return CaptureCounts::from_map(K, rows);
}

void write_complete_table_csv(std::ostream& out, const CountMatrix& table, int num_registers) {
  out << "profile,class,count\n";
  for (Eigen::Index r = 0; r < table.rows(); ++r)
    for (Eigen::Index x = 0; x < table.cols(); ++x)
      out << profile_string(static_cast<std::uint32_t>(r), num_registers) << ',' << x << ',' << table(r, x)
          << '\n';
}

}  // namespace lcmcr
