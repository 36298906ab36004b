#include "twinbeam/core_model.hpp"

#include <cmath>
#include <string>

namespace twinbeam {

const char* to_string(ErrorCode code) noexcept {
  switch (code) {
    case ErrorCode::invalid_argument: return "invalid-argument";
    case ErrorCode::domain: return "domain";
    case ErrorCode::geometry: return "geometry";
    case ErrorCode::degenerate: return "degenerate";
    case ErrorCode::config: return "config";
    case ErrorCode::corrupt_header: return "corrupt-header";
    case ErrorCode::truncated_payload: return "truncated-payload";
    case ErrorCode::digest_mismatch: return "digest-mismatch";
    case ErrorCode::io: return "io";
    case ErrorCode::resource: return "resource";
  }
  return "unknown";
}

namespace {

bool is_efficiency(double eta) { return eta > 0.0 && eta <= 1.0; }

void check_mu(double mu) {
  require(std::isfinite(mu) && mu > 0.0, ErrorCode::domain, "mu must be finite and > 0");
}

void check_modes(double m_tot) {
  require(std::isfinite(m_tot) && m_tot >= 1.0, ErrorCode::domain, "mode count must be >= 1");
}

}  // namespace

void ChannelEfficiencies::validate() const {
  require(is_efficiency(eta_s), ErrorCode::domain,
          "eta_s must lie in (0, 1], got " + std::to_string(eta_s));
  require(is_efficiency(eta_i), ErrorCode::domain,
          "eta_i must lie in (0, 1], got " + std::to_string(eta_i));
}

void ModeStructure::validate() const {
  require(temporal_modes >= 1, ErrorCode::domain, "temporal_modes must be >= 1");
  require(areas_per_cell >= 1, ErrorCode::domain, "areas_per_cell must be >= 1");
  require(coherence_cell_px >= 1, ErrorCode::domain, "coherence_cell_px must be >= 1");
  require(grid.rows >= 1 && grid.cols >= 1, ErrorCode::domain, "cell grid must be at least 1x1");
}

double PulseModel::mu_for_energy(double energy) const {
  if (gain_map == GainMap::linear) return mean_mu * energy;
  const double reference = std::sinh(gain_constant);
  const double s = std::sinh(gain_constant * std::sqrt(energy));
  return mean_mu * (s * s) / (reference * reference);
}

void PulseModel::validate() const {
  check_mu(mean_mu);
  require(std::isfinite(relative_energy_jitter) && relative_energy_jitter >= 0.0 &&
              relative_energy_jitter < 1.0,
          ErrorCode::domain, "relative_energy_jitter must lie in [0, 1)");
  if (gain_map == GainMap::sinh2) {
    require(std::isfinite(gain_constant) && gain_constant > 0.0, ErrorCode::domain,
            "gain_constant must be > 0 for the sinh2 gain map");
  }
}

double BackgroundModel::read_variance_per_superpixel() const noexcept {
  const double var = read_noise_std * read_noise_std;
  if (readout == Readout::per_superpixel) return var;
  return static_cast<double>(binning) * binning * var;
}

void BackgroundModel::validate() const {
  require(std::isfinite(straylight_mean) && straylight_mean >= 0.0, ErrorCode::domain,
          "straylight_mean must be >= 0");
  require(std::isfinite(straylight_idler_scale) && straylight_idler_scale >= 0.0,
          ErrorCode::domain, "straylight_idler_scale must be >= 0");
  require(std::isfinite(read_noise_std) && read_noise_std >= 0.0, ErrorCode::domain,
          "read_noise_std must be >= 0");
  require(binning >= 1, ErrorCode::domain, "binning must be >= 1");
}

FrameGeometry FrameGeometry::symmetric(int rows, int cols_per_half, Pixel emission_origin) {
  FrameGeometry g;
  g.rows = rows;
  g.cols = 2 * cols_per_half;
  g.split_col = cols_per_half;
  g.cs = {0.5 * (rows - 1), 0.5 * (g.cols - 1)};
  g.emission_origin = emission_origin;
  return g;
}

bool FrameGeometry::in_signal_half(const Region& r) const noexcept {
  return r.extent.rows > 0 && r.extent.cols > 0 && r.origin.row >= 0 && r.row_end() <= rows &&
         r.origin.col >= 0 && r.col_end() <= split_col;
}

bool FrameGeometry::in_idler_half(const Region& r) const noexcept {
  return r.extent.rows > 0 && r.extent.cols > 0 && r.origin.row >= 0 && r.row_end() <= rows &&
         r.origin.col >= split_col && r.col_end() <= cols;
}

Region FrameGeometry::conjugate_region(const Region& signal, Pixel shift) const {
  // The far corner of the signal block maps onto the near corner of its image.
  const Point far{static_cast<double>(signal.row_end() - 1),
                  static_cast<double>(signal.col_end() - 1)};
  const Point image = conjugate(far);
  Region out;
  out.origin = {round_half_away_from(image.row, cs.row) + shift.row,
                round_half_away_from(image.col, cs.col) + shift.col};
  out.extent = signal.extent;
  out.side = Side::idler;
  return out;
}

void FrameGeometry::validate() const {
  require(rows >= 1 && cols >= 2, ErrorCode::geometry, "frame must be at least 1x2 superpixels");
  require(split_col >= 1 && split_col < cols, ErrorCode::geometry,
          "split_col must leave both beam halves non-empty");
  require(std::isfinite(cs.row) && std::isfinite(cs.col), ErrorCode::geometry,
          "center of symmetry must be finite");
}

int round_half_away_from(double value, double center) noexcept {
  const double fl = std::floor(value);
  const double frac = value - fl;
  if (frac < 0.5) return static_cast<int>(fl);
  if (frac > 0.5) return static_cast<int>(fl) + 1;
  return value >= center ? static_cast<int>(fl) + 1 : static_cast<int>(fl);
}

double predict_variance(double mu, double eta, double m_tot) {
  check_mu(mu);
  require(is_efficiency(eta), ErrorCode::domain, "eta must lie in (0, 1]");
  check_modes(m_tot);
  return m_tot * eta * mu * (1.0 + eta * mu);
}

double predict_covariance(double mu, double eta_s, double eta_i, double m_tot) {
  check_mu(mu);
  require(eta_s >= 0.0 && eta_s <= 1.0 && eta_i >= 0.0 && eta_i <= 1.0, ErrorCode::domain,
          "efficiencies must lie in [0, 1]");
  check_modes(m_tot);
  return m_tot * eta_s * eta_i * mu * (1.0 + mu);
}

double predict_sigma(const ChannelEfficiencies& ch, double mu, double m_tot) {
  return predict_sigma_with_jitter(ch, mu, 0.0, m_tot);
}

double predict_sigma_with_jitter(const ChannelEfficiencies& ch, double mu_bar, double var_mu,
                                 double m_tot) {
  ch.validate();
  check_mu(mu_bar);
  require(std::isfinite(var_mu) && var_mu >= 0.0, ErrorCode::domain, "var_mu must be >= 0");
  check_modes(m_tot);
  const double eta_plus = ch.plus();
  const double eta_minus = ch.minus();
  const double excess = mu_bar + 0.5 + (var_mu / mu_bar) * (1.0 + m_tot);
  return 1.0 - eta_plus + (eta_minus * eta_minus / (2.0 * eta_plus)) * excess;
}

double predict_sigma_alpha(double alpha, double eta_s) {
  require(std::isfinite(alpha) && alpha > 0.0, ErrorCode::domain, "alpha must be > 0");
  require(is_efficiency(eta_s), ErrorCode::domain, "eta_s must lie in (0, 1]");
  return 0.5 * (1.0 + alpha) - eta_s;
}

}  // namespace twinbeam
