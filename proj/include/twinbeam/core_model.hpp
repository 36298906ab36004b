#pragma once

// Domain types for a twin-beam CCD experiment and the closed-form moment
// laws of multithermal, pairwise-correlated photon numbers.

#include <cstdint>

#include "twinbeam/errors.hpp"

namespace twinbeam {

/// Whole-channel detection efficiencies of the signal and idler arms.
struct ChannelEfficiencies {
  double eta_s = 1.0;
  double eta_i = 1.0;

  /// Mean efficiency (eta_s + eta_i) / 2.
  double plus() const noexcept { return 0.5 * (eta_s + eta_i); }
  /// Efficiency imbalance eta_s - eta_i.
  double minus() const noexcept { return eta_s - eta_i; }
  /// Loss-balancing factor eta_s / eta_i.
  double balance() const noexcept { return eta_s / eta_i; }

  /// Throws ErrorCode::domain unless both efficiencies lie in (0, 1].
  void validate() const;

  friend bool operator==(const ChannelEfficiencies&, const ChannelEfficiencies&) = default;
};

struct GridSize {
  int rows = 1;
  int cols = 1;

  long long area() const noexcept { return static_cast<long long>(rows) * cols; }
  friend bool operator==(const GridSize&, const GridSize&) = default;
};

/// Integer superpixel coordinate (also used for integer offsets).
struct Pixel {
  int row = 0;
  int col = 0;
  friend bool operator==(const Pixel&, const Pixel&) = default;
};

/// Fractional superpixel coordinate.
struct Point {
  double row = 0.0;
  double col = 0.0;
  friend bool operator==(const Point&, const Point&) = default;
};

/// Mode content of the emission. One simulated cell is a square block of
/// `coherence_cell_px` superpixels per side and may aggregate several
/// physical coherence areas (`areas_per_cell`), each carrying
/// `temporal_modes` independent thermal modes.
struct ModeStructure {
  std::int64_t temporal_modes = 5000;
  int areas_per_cell = 1;
  int coherence_cell_px = 1;
  GridSize grid{1, 1};

  std::int64_t modes_per_cell() const noexcept { return temporal_modes * areas_per_cell; }
  /// Total mode count of a region that covers `cells` whole cells.
  std::int64_t total_modes(std::int64_t cells) const noexcept { return modes_per_cell() * cells; }

  void validate() const;
  friend bool operator==(const ModeStructure&, const ModeStructure&) = default;
};

enum class GainMap : std::uint8_t { linear, sinh2 };

/// Pulse-to-pulse pump model.
struct PulseModel {
  double mean_mu = 0.1;
  double relative_energy_jitter = 0.0;
  GainMap gain_map = GainMap::linear;
  // Only used by GainMap::sinh2: mu ~ sinh^2(gain_constant * sqrt(E)).
  double gain_constant = 1.0;

  /// Mean photon number per mode for a pulse of relative energy `energy`.
  /// Normalised so that energy 1 yields mean_mu under either law.
  double mu_for_energy(double energy) const;

  void validate() const;
  friend bool operator==(const PulseModel&, const PulseModel&) = default;
};

/// Where read noise enters. With per_physical_pixel every physical pixel of a
/// superpixel is read out independently (variance binning^2 * read_noise^2);
/// per_superpixel models on-chip binning, read once per superpixel.
enum class Readout : std::uint8_t { per_physical_pixel, per_superpixel };

struct BackgroundModel {
  double straylight_mean = 0.0;         // counts per superpixel, signal half
  double straylight_idler_scale = 1.0;  // idler-half straylight relative to signal half
  bool straylight_tracks_pulse = false;
  double read_noise_std = 0.0;          // electrons per physical pixel
  int binning = 1;
  Readout readout = Readout::per_physical_pixel;

  double read_variance_per_superpixel() const noexcept;

  void validate() const;
  friend bool operator==(const BackgroundModel&, const BackgroundModel&) = default;
};

enum class Side : std::uint8_t { signal, idler };

/// Rectangular block of superpixels.
struct Region {
  Pixel origin;
  GridSize extent;
  Side side = Side::signal;

  long long area() const noexcept { return extent.area(); }
  int row_end() const noexcept { return origin.row + extent.rows; }
  int col_end() const noexcept { return origin.col + extent.cols; }

  friend bool operator==(const Region&, const Region&) = default;
};

/// Superpixel layout of a full frame. Columns [0, split_col) hold the signal
/// beam and [split_col, cols) the idler beam. The conjugate of superpixel x is
/// 2*cs - x.
struct FrameGeometry {
  int rows = 1;
  int cols = 2;
  int split_col = 1;
  Point cs{0.0, 0.5};
  Pixel emission_origin;  // top-left superpixel of the signal emission grid

  /// Geometry whose conjugation maps the signal half exactly onto the idler half.
  static FrameGeometry symmetric(int rows, int cols_per_half, Pixel emission_origin = {});

  Point conjugate(Point x) const noexcept {
    return {2.0 * cs.row - x.row, 2.0 * cs.col - x.col};
  }

  bool in_signal_half(const Region& r) const noexcept;
  bool in_idler_half(const Region& r) const noexcept;

  /// Idler region conjugate to `signal`, displaced by `shift`. The result is
  /// not bounds-checked.
  Region conjugate_region(const Region& signal, Pixel shift = {}) const;

  void validate() const;
  friend bool operator==(const FrameGeometry&, const FrameGeometry&) = default;
};

/// Rounds to the nearest integer; exact halves go away from `center`.
int round_half_away_from(double value, double center) noexcept;

// Closed-form predictors. All throw ErrorCode::domain on out-of-range input.

/// Variance of multithermal counts: m_tot * eta * mu * (1 + eta * mu).
double predict_variance(double mu, double eta, double m_tot);

/// Signal/idler covariance: m_tot * eta_s * eta_i * mu * (1 + mu).
/// Zero efficiencies are accepted here and give zero covariance.
double predict_covariance(double mu, double eta_s, double eta_i, double m_tot);

/// Noise reduction factor of the raw difference N_s - N_i.
double predict_sigma(const ChannelEfficiencies& ch, double mu, double m_tot);

/// Noise reduction factor under pulse-to-pulse fluctuation of mu with mean
/// `mu_bar` and variance `var_mu`. Equal to predict_sigma when var_mu == 0.
double predict_sigma_with_jitter(const ChannelEfficiencies& ch, double mu_bar, double var_mu,
                                 double m_tot);

/// Loss-compensated noise reduction factor (1 + alpha) / 2 - eta_s.
double predict_sigma_alpha(double alpha, double eta_s);

}  // namespace twinbeam
