/*
 * SPDX-FileCopyrightText: Copyright (c) 2026, The APR Authors.
 * SPDX-License-Identifier: Apache-2.0
 */

#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <vector>

namespace apr {

// Monte-Carlo model of mean-pooled passage embeddings. A passage of n tokens
// holds m relevant tokens whose signal has projection `alpha` on the query
// direction q; the other n - m tokens carry signal orthogonal to q. Every
// token gets isotropic Gaussian noise with per-direction std `sigma`.

struct DilutionParams {
  std::size_t relevant = 4;  // m
  double alpha = 1.0;
  double sigma = 1.0;
  std::size_t trials = 10000;
  int dimension = 16;
  std::uint64_t seed = 1;
};

struct DilutionPoint {
  std::size_t length = 0;  // n
  double mean = 0.0;       // E<q, z>
  double variance = 0.0;   // Var<q, z>
  double snr = 0.0;        // mean^2 / variance, +inf when variance is 0
};

std::vector<DilutionPoint> simulate_dilution(const DilutionParams& params,
                                             std::span<const std::size_t> lengths);

struct LengthBiasResult {
  double mean_short = 0.0;
  double mean_long = 0.0;
  /// Fraction of paired trials where <q, z_short> > <q, z_long>.
  double short_wins = 0.0;
};

/// Paired trials: both passages share the same relevant tokens (and their
/// noise); the long one appends `n_long - n_short` extra irrelevant tokens.
LengthBiasResult simulate_length_bias(const DilutionParams& params, std::size_t n_short,
                                      std::size_t n_long);

}  // namespace apr
