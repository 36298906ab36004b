#pragma once

// End-to-end analysis chain: cosmic-ray rejection, CS search, area scan,
// background-corrected efficiency estimate and its uncertainty budget.

#include <array>
#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "twinbeam/estimation.hpp"
#include "twinbeam/run_config.hpp"
#include "twinbeam/spatial.hpp"
#include "twinbeam/uncertainty.hpp"

namespace twinbeam {

// Fixed Type B lines of the budget.
inline constexpr double kTypeBBalancing = 1e-6;       // absolute, loss-balancing residual
inline constexpr double kTypeBCsBiasRelative = 0.015;  // relative, CS placement bias

struct CsSearchResult {
  SigmaSpatialMap map;
  Region signal;
  Region idler;        // conjugate region at the chosen shift
  Pixel shift;         // chosen idler displacement
  bool searched = false;
  std::size_t frames_used = 0;
};

/// The configured shift when search_cs is off, otherwise the sigma_spatial
/// argmin over the first cs_search_frames PDC frames.
CsSearchResult find_cs(const RunConfig& cfg, std::span<const Frame> pdc);

/// Nested areas used by the scan: the configured list, or eight areas
/// growing to signal_region.
std::vector<GridSize> scan_sizes(const AnalysisConfig& a);
Point scan_center(const AnalysisConfig& a);

struct AreaScanResult {
  Pixel shift;
  std::vector<AreaScanPoint> points;
};

AreaScanResult run_area_scan(const RunConfig& cfg, std::span<const Frame> pdc,
                             std::span<const Frame> background);

struct CalibrationResult {
  double eta_s = 0.0;
  double eta_i = 0.0;
  double alpha_b = 0.0;
  double sigma_ab = 0.0;
  // Propagated Type A uncertainties of the batch means.
  double u_eta_s = 0.0;
  double u_alpha_b = 0.0;
  double u_sigma_ab = 0.0;
  // Standard errors of the mean from the batch scatter.
  double sem_eta_s = 0.0;
  double sem_alpha_b = 0.0;
  double sem_sigma_ab = 0.0;
  double type_b_balancing = kTypeBBalancing;
  double type_b_cs = 0.0;      // kTypeBCsBiasRelative * eta_s
  double u_combined = 0.0;     // Type A and both Type B lines in quadrature
  // Detector efficiency after dividing out the optical transmittance.
  double eta_s_detector = 0.0;
  double eta_i_detector = 0.0;
  int z_repeats = 0;
  std::size_t n_per_batch = 0;
  std::size_t m_per_batch = 0;

  // Diagnostics.
  double excess_noise = 0.0;  // Var(N_s + N_i) / E[N_s + N_i] over all PDC frames
  double alpha = 0.0;         // without background correction
  double sigma_alpha = 0.0;
  std::size_t discarded_pdc = 0;
  std::size_t discarded_background = 0;
  Pixel cs_shift;
  Region signal;
  Region idler;
  std::optional<SigmaSpatialMap> cs_map;
  bool sigma_negative = false;
  bool eta_out_of_range = false;
  bool detector_out_of_range = false;
  bool background_exceeds_signal = false;
  RepeatResult repeats;
  std::vector<RegionPairSeries> batch_series;

  std::size_t discarded() const noexcept { return discarded_pdc + discarded_background; }
};

/// Runs the whole chain on in-memory stacks.
CalibrationResult calibrate(const RunConfig& cfg, std::vector<Frame> pdc,
                            std::vector<Frame> background);

/// One column of the published table: mean over batches and propagated u.
struct TableEntry {
  double value = 0.0;
  double u = 0.0;
};

/// E[N'_s], sd N'_s, E[M_s], sd M_s, alpha, alpha_B, sigma, sigma_alpha,
/// sigma_alpha,B.
struct Table1Row {
  std::array<TableEntry, 9> entries;
};

inline constexpr const char* kTable1Columns[9] = {
    "E_Ns", "sd_Ns", "E_Ms", "sd_Ms", "alpha", "alpha_b", "sigma", "sigma_alpha", "sigma_alpha_b"};

/// Published reference row and its uncertainties.
Table1Row table1_reference();

/// The canned configuration reproducing the published count levels.
RunConfig table1_run_config();

/// Table columns computed per batch (Z batches of the calibrated series).
Table1Row table1_row(const std::vector<RegionPairSeries>& batches,
                     VarianceConvention conv = VarianceConvention::unbiased);

struct Table1Report {
  Table1Row reference;
  Table1Row simulated;
  CalibrationResult calibration;
};

/// Simulates the configured stacks and calibrates them.
Table1Report reproduce_table1(const RunConfig& cfg);

}  // namespace twinbeam
