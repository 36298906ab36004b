#pragma once

// Measurement-side estimators over per-frame region sums.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "twinbeam/core_model.hpp"
#include "twinbeam/simulator.hpp"
#include "twinbeam/statistics.hpp"

namespace twinbeam {

/// Per-frame integrated counts of a conjugate region pair. n_s/n_i come from
/// PDC frames, m_s/m_i (optional, empty when absent) from background frames.
struct RegionPairSeries {
  std::vector<double> n_s;
  std::vector<double> n_i;
  std::vector<double> m_s;
  std::vector<double> m_i;

  std::size_t frames() const noexcept { return n_s.size(); }
  std::size_t background_frames() const noexcept { return m_s.size(); }
  bool has_background() const noexcept { return !m_s.empty(); }

  void validate() const;
};

enum class SigmaVariant : std::uint8_t { raw, alpha, alpha_b };

const char* to_string(SigmaVariant v) noexcept;

struct NoiseReductionEstimate {
  double value = 0.0;
  SigmaVariant variant = SigmaVariant::alpha;
  double alpha_used = 1.0;
  std::size_t n_frames = 0;

  /// Statistical noise can push the background-corrected value below zero.
  bool negative() const noexcept { return value < 0.0; }
};

double region_sum(const Frame& frame, const Region& region);

/// Region sums of every PDC frame (and background frame, when given).
RegionPairSeries extract_series(std::span<const Frame> pdc, std::span<const Frame> background,
                                const Region& signal, const Region& idler);

/// E[N_s] / E[N_i].
double estimate_alpha(const RegionPairSeries& series);

/// Var(N_s - N_i) / (E[N_s] + E[N_i]), no loss compensation.
NoiseReductionEstimate estimate_raw_sigma(const RegionPairSeries& series,
                                          VarianceConvention conv = VarianceConvention::unbiased);

/// Var(N_s - alpha N_i) / (E[N_s] + alpha E[N_i]).
NoiseReductionEstimate estimate_sigma_alpha(const RegionPairSeries& series, double alpha,
                                            VarianceConvention conv = VarianceConvention::unbiased);

struct AlphaBEstimate {
  double value = 1.0;
  bool background_exceeds_signal = false;
};

/// (E[N'_s] - E[M_s]) / (E[N'_i] - E[M_i]).
AlphaBEstimate estimate_alpha_b(const RegionPairSeries& series);

/// [Var(N'_s - a N'_i) - Var(M_s - a M_i)] / [2 (E[N'_s] - E[M_s])]. Negative
/// values are returned unclamped.
NoiseReductionEstimate estimate_sigma_alpha_b(const RegionPairSeries& series, double alpha_b,
                                              VarianceConvention conv = VarianceConvention::unbiased);

struct EtaEstimate {
  double eta_s = 0.0;
  double eta_i = 0.0;
  bool out_of_range = false;  // eta_s outside (0, 1]
};

/// eta_s = (1 + alpha_b)/2 - sigma_ab, eta_i = alpha_b * eta_s.
EtaEstimate eta_from_sigma(double alpha_b, double sigma_ab);

struct CorrectedEfficiency {
  double value = 0.0;
  bool out_of_range = false;  // above 1
};

/// Detector efficiency from whole-channel efficiency and optical transmittance.
CorrectedEfficiency correct_for_transmittance(double eta, double tau);

struct ExcessNoise {
  double sum_ratio = 0.0;  // Var(N_s + N_i) / E[N_s + N_i]
  double fano_s = 0.0;     // Var(N_s) / E[N_s]
  double fano_i = 0.0;
  std::optional<double> thermal_prediction;  // <N_s> / m_tot
};

ExcessNoise excess_noise(const RegionPairSeries& series, std::optional<double> m_tot = {},
                         VarianceConvention conv = VarianceConvention::unbiased);

}  // namespace twinbeam
