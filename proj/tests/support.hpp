#pragma once

// Independent oracles and hand-rolled generators shared by the test suites.
// Nothing here calls the library's probability code.

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <string>
#include <vector>

#include <doctest.h>

#include "lcmcr/emfit.hpp"
#include "lcmcr/model.hpp"
#include "lcmcr/rng.hpp"

namespace lcmcr::test {

inline ModelSpec four_register_spec(int classes = 2) {
  ModelSpec spec;
  spec.register_names = {"A", "B", "C", "D"};
  spec.num_classes = classes;
  return spec;
}

inline ParameterSet scenario1_params() {
  ParameterSet p;
  p.class_weights = Vector(2);
  p.class_weights << 0.4, 0.6;
  p.inclusion_probs = Matrix(2, 4);
  p.inclusion_probs << 0.25, 0.20, 0.21, 0.29, 0.70, 0.82, 0.86, 0.83;
  return p;
}

/// P(profile) under conditional independence, by direct products. Bit k of
/// the bitstring (k = 0 leftmost) is register k.
inline double independence_cell(const std::vector<double>& weights, const std::vector<std::vector<double>>& probs,
                                std::uint32_t mask) {
  const int K = static_cast<int>(probs[0].size());
  double total = 0.0;
  for (std::size_t x = 0; x < weights.size(); ++x) {
    double term = weights[x];
    for (int k = 0; k < K; ++k) {
      const bool present = (mask >> (K - 1 - k)) & 1u;
      term *= present ? probs[x][static_cast<std::size_t>(k)] : 1.0 - probs[x][static_cast<std::size_t>(k)];
    }
    total += term;
  }
  return total;
}

inline double scenario1_cell(std::uint32_t mask) {
  return independence_cell({0.4, 0.6},
                           {{0.25, 0.20, 0.21, 0.29}, {0.70, 0.82, 0.86, 0.83}}, mask);
}

/// Random valid spec: 2..max_k registers, 1..max_l classes, random terms.
inline ModelSpec random_spec(Rng& rng, int max_k = 6, int max_l = 3) {
  ModelSpec spec;
  const int K = 2 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_k - 1));
  for (int k = 0; k < K; ++k) spec.register_names.push_back(std::string(1, static_cast<char>('A' + k)));
  spec.num_classes = 1 + static_cast<int>(rng.next() % static_cast<std::uint64_t>(max_l));
  std::vector<int> order(static_cast<std::size_t>(K));
  for (int k = 0; k < K; ++k) order[static_cast<std::size_t>(k)] = k;
  for (int k = K - 1; k > 0; --k) std::swap(order[static_cast<std::size_t>(k)], order[rng.next() % (k + 1)]);
  std::size_t pos = 0;
  while (pos + 2 <= order.size() && rng.uniform() < 0.5) {
    const std::size_t size = std::min<std::size_t>(order.size() - pos, 2 + rng.next() % 2);
    DependenceTerm term;
    term.registers.assign(order.begin() + static_cast<long>(pos), order.begin() + static_cast<long>(pos + size));
    std::sort(term.registers.begin(), term.registers.end());
    term.class_specific = rng.uniform() < 0.5;
    spec.dependence_terms.push_back(term);
    pos += size;
  }
  return spec;
}

/// Random interior parameters for `spec`.
inline ParameterSet random_params(const ModelSpec& spec, Rng& rng) {
  const int L = spec.num_classes;
  const int K = spec.num_registers();
  ParameterSet p;
  p.class_weights = Vector(L);
  for (int x = 0; x < L; ++x) p.class_weights[x] = 0.05 + rng.uniform();
  p.class_weights /= p.class_weights.sum();
  p.inclusion_probs = Matrix(L, K);
  for (int x = 0; x < L; ++x)
    for (int k = 0; k < K; ++k) p.inclusion_probs(x, k) = rng.uniform(0.05, 0.95);
  for (const auto& t : spec.dependence_terms) {
    const Eigen::Index cells = Eigen::Index{1} << t.registers.size();
    if (t.class_specific) {
      Matrix table(L, cells);
      for (int x = 0; x < L; ++x) {
        for (Eigen::Index c = 0; c < cells; ++c) table(x, c) = 0.05 + rng.uniform();
        table.row(x) /= table.row(x).sum();
      }
      p.block_tables.push_back(table);
    } else {
      const Eigen::Index values = cells - 1 - static_cast<Eigen::Index>(t.registers.size());
      Vector eta(values);
      for (Eigen::Index j = 0; j < values; ++j) eta[j] = rng.uniform(-1.0, 1.0);
      p.shared_interactions.push_back(eta);
    }
  }
  sync_block_margins(spec, p);
  return p;
}

/// Capture-recapture triple from a plausible two-register design: N units,
/// each captured independently by A and B. Returns {n01, n10, n11}.
struct Triple {
  std::int64_t n01 = 0, n10 = 0, n11 = 0;
  double petersen() const { return static_cast<double>(n11 + n10) * static_cast<double>(n11 + n01) / n11; }
};

inline std::vector<Triple> petersen_triples(std::uint64_t seed, int count) {
  Rng rng(seed);
  std::vector<Triple> out;
  while (static_cast<int>(out.size()) < count) {
    const int N = 200 + static_cast<int>(rng.uniform() * 4800);
    const double pa = rng.uniform(0.2, 0.9);
    const double pb = rng.uniform(0.2, 0.9);
    Triple t;
    for (int i = 0; i < N; ++i) {
      const bool a = rng.uniform() < pa;
      const bool b = rng.uniform() < pb;
      if (a && b) ++t.n11;
      else if (a) ++t.n10;
      else if (b) ++t.n01;
    }
    if (t.n11 >= 1) out.push_back(t);
  }
  return out;
}

/// EM invariants every fit must satisfy.
inline void check_fit_invariants(const FitResult& fit) {
  for (const auto& start : fit.starts)
    for (std::size_t i = 1; i < start.loglik_trace.size(); ++i)
      CHECK(start.loglik_trace[i] >= start.loglik_trace[i - 1] - 1e-9);
  for (std::size_t i = 1; i < fit.loglik_trace.size(); ++i)
    CHECK(fit.loglik_trace[i] >= fit.loglik_trace[i - 1] - 1e-9);
  for (Eigen::Index r = 0; r < fit.posteriors.rows(); ++r)
    CHECK(std::abs(fit.posteriors.row(r).sum() - 1.0) <= 1e-12);
  CHECK(std::abs(fit.params.class_weights.sum() - 1.0) <= 1e-12);
}

}  // namespace lcmcr::test
