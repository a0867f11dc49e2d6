/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#include "apr/dilution.hpp"

#include <algorithm>
#include <limits>
#include <random>

#include "apr/error.hpp"
#include "apr/types.hpp"

namespace apr {
namespace {

class PassageSampler {
 public:
  PassageSampler(const DilutionParams& p, std::uint64_t seed) : p_(p), rng_(seed) {}

  // Relevant token: alpha * q + noise, with q = e0.
  void add_relevant(VectorX<double>& sum) {
    add_noise(sum);
    sum[0] += p_.alpha;
  }

  // Irrelevant token: unit signal orthogonal to q, plus noise.
  void add_irrelevant(VectorX<double>& sum) {
    add_noise(sum);
    if (p_.dimension < 2) return;
    VectorX<double> s(p_.dimension);
    for (auto& x : s) x = gauss_(rng_);
    s[0] = 0.0;
    const double n = s.norm();
    if (n > 0.0) sum += s / n;
  }

 private:
  void add_noise(VectorX<double>& sum) {
    if (p_.sigma == 0.0) return;
    for (Eigen::Index i = 0; i < sum.size(); ++i) sum[i] += p_.sigma * gauss_(rng_);
  }

  const DilutionParams& p_;
  std::mt19937_64 rng_;
  std::normal_distribution<double> gauss_{0.0, 1.0};
};

void validate(const DilutionParams& p) {
  if (p.relevant == 0) throw Error(ErrorCode::kInvalidParams, "need at least one relevant token");
  if (p.trials < 2) throw Error(ErrorCode::kInvalidParams, "need at least two trials");
  if (p.sigma < 0.0) throw Error(ErrorCode::kInvalidParams, "sigma must be non-negative");
  if (p.dimension < 1) throw Error(ErrorCode::kInvalidParams, "dimension must be positive");
}

}  // namespace

std::vector<DilutionPoint> simulate_dilution(const DilutionParams& params,
                                             std::span<const std::size_t> lengths) {
  validate(params);
  if (lengths.empty()) throw Error(ErrorCode::kInvalidParams, "no lengths given");
  if (*std::min_element(lengths.begin(), lengths.end()) < params.relevant) {
    throw Error(ErrorCode::kInvalidParams, "every length must be >= the relevant-token count");
  }

  std::vector<DilutionPoint> out;
  out.reserve(lengths.size());
  for (std::size_t li = 0; li < lengths.size(); ++li) {
    const std::size_t n = lengths[li];
    PassageSampler sampler(params, params.seed + 0x9E37u * (li + 1));
    double mean = 0.0;
    double m2 = 0.0;
    VectorX<double> sum(params.dimension);
    for (std::size_t t = 0; t < params.trials; ++t) {
      sum.setZero();
      for (std::size_t i = 0; i < params.relevant; ++i) sampler.add_relevant(sum);
      for (std::size_t i = params.relevant; i < n; ++i) sampler.add_irrelevant(sum);
      const double proj = sum[0] / static_cast<double>(n);
      const double delta = proj - mean;
      mean += delta / static_cast<double>(t + 1);
      m2 += delta * (proj - mean);
    }
    DilutionPoint pt;
    pt.length = n;
    pt.mean = mean;
    pt.variance = m2 / static_cast<double>(params.trials - 1);
    pt.snr = pt.variance > 0.0 ? mean * mean / pt.variance : std::numeric_limits<double>::infinity();
    out.push_back(pt);
  }
  return out;
}

LengthBiasResult simulate_length_bias(const DilutionParams& params, std::size_t n_short,
                                      std::size_t n_long) {
  validate(params);
  if (n_short < params.relevant || n_long <= n_short) {
    throw Error(ErrorCode::kInvalidParams, "require relevant <= n_short < n_long");
  }
  PassageSampler sampler(params, params.seed);
  LengthBiasResult r;
  std::size_t wins = 0;
  VectorX<double> shared(params.dimension);
  VectorX<double> extra(params.dimension);
  for (std::size_t t = 0; t < params.trials; ++t) {
    shared.setZero();
    for (std::size_t i = 0; i < params.relevant; ++i) sampler.add_relevant(shared);
    for (std::size_t i = params.relevant; i < n_short; ++i) sampler.add_irrelevant(shared);
    extra = shared;
    for (std::size_t i = n_short; i < n_long; ++i) sampler.add_irrelevant(extra);
    const double s = shared[0] / static_cast<double>(n_short);
    const double l = extra[0] / static_cast<double>(n_long);
    r.mean_short += s;
    r.mean_long += l;
    if (s > l) ++wins;
  }
  const auto trials = static_cast<double>(params.trials);
  r.mean_short /= trials;
  r.mean_long /= trials;
  r.short_wins = static_cast<double>(wins) / trials;
  return r;
}

}  // namespace apr
