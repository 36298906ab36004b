#pragma once

// Type A uncertainty of the estimators.
//
// Every estimator is a smooth function of ten sample moments: means and
// second central moments of the PDC pair (N'_s, N'_i) and of the background
// pair (M_s, M_i). Frames are independent, pairs within a frame are not, so
// the moment covariance is estimated per frame and pushed through the
// gradient (computed exactly with dual numbers).

#include <cstddef>
#include <span>
#include <vector>

#include "twinbeam/estimation.hpp"

namespace twinbeam {

enum class Statistic : std::uint8_t {
  mean_signal,             // E[N'_s]
  sd_signal,               // sqrt(Var N'_s)
  mean_background_signal,  // E[M_s]
  sd_background_signal,    // sqrt(Var M_s)
  alpha,
  alpha_b,
  raw_sigma,
  sigma_alpha,
  sigma_alpha_b,
  eta_s,
};

struct Measured {
  double value = 0.0;
  double u = 0.0;
};

/// Value and first-order standard uncertainty of one statistic.
Measured delta_method(const RegionPairSeries& series, Statistic stat,
                      VarianceConvention conv = VarianceConvention::unbiased);

struct TypeAUncertainty {
  double alpha_b = 0.0;
  double sigma_ab = 0.0;
  double eta_s = 0.0;
  double u_alpha_b = 0.0;
  double u_sigma_ab = 0.0;
  double u_eta_s = 0.0;
  double cov_alpha_sigma = 0.0;
};

/// Joint propagation for alpha_B, sigma_alpha,B and eta_s of one experiment.
/// u(eta_s)^2 = u(alpha_B)^2/4 + u(sigma)^2 - cov(alpha_B, sigma).
TypeAUncertainty propagate_type_a(const RegionPairSeries& series,
                                  VarianceConvention conv = VarianceConvention::unbiased);

struct BatchEstimate {
  std::size_t n = 0;
  std::size_t m = 0;
  double alpha_b = 0.0;
  double sigma_ab = 0.0;
  double eta_s = 0.0;
  double u_alpha_b = 0.0;
  double u_sigma_ab = 0.0;
  double u_eta_s = 0.0;
};

struct RepeatResult {
  std::vector<BatchEstimate> batches;
  // Averages over the batches.
  double alpha_b = 0.0;
  double sigma_ab = 0.0;
  double eta_s = 0.0;
  double eta_i = 0.0;
  // Standard error of the mean from the scatter of the batch values.
  double sem_alpha_b = 0.0;
  double sem_sigma_ab = 0.0;
  double sem_eta_s = 0.0;
  // Propagated Type A uncertainty of the averages.
  double u_alpha_b = 0.0;
  double u_sigma_ab = 0.0;
  double u_eta_s = 0.0;
  // Standard deviation of the batch population of sigma_alpha,B.
  double population_sd_sigma_ab = 0.0;
};

/// Splits into `z` contiguous batches of equal size (remainders dropped).
/// PDC and background frames are split independently.
std::vector<RegionPairSeries> split_batches(const RegionPairSeries& series, int z);

/// Treats each batch as a self-contained experiment (alpha_B recomputed per
/// batch) and aggregates. Requires at least two batches.
RepeatResult repeat_experiment(std::span<const RegionPairSeries> batches,
                               VarianceConvention conv = VarianceConvention::unbiased);

}  // namespace twinbeam
