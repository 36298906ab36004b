#include "twinbeam/estimation.hpp"

#include <cmath>
#include <string>

namespace twinbeam {

namespace {

bool all_non_negative(const std::vector<double>& v) {
  for (double x : v) {
    if (!(x >= 0.0)) return false;
  }
  return true;
}

void require_background(const RegionPairSeries& series) {
  require(series.has_background(), ErrorCode::invalid_argument,
          "background series required for background-corrected estimators");
}

}  // namespace

const char* to_string(SigmaVariant v) noexcept {
  switch (v) {
    case SigmaVariant::raw: return "sigma";
    case SigmaVariant::alpha: return "sigma_alpha";
    case SigmaVariant::alpha_b: return "sigma_alpha_b";
  }
  return "unknown";
}

void RegionPairSeries::validate() const {
  require(n_s.size() == n_i.size(), ErrorCode::invalid_argument,
          "signal and idler series differ in length");
  require(n_s.size() >= 2, ErrorCode::invalid_argument, "need at least 2 PDC frames");
  require(m_s.size() == m_i.size(), ErrorCode::invalid_argument,
          "background signal and idler series differ in length");
  require(m_s.empty() || m_s.size() >= 2, ErrorCode::invalid_argument,
          "need at least 2 background frames");
  require(all_non_negative(n_s) && all_non_negative(n_i) && all_non_negative(m_s) &&
              all_non_negative(m_i),
          ErrorCode::invalid_argument, "region sums must be non-negative");
}

double region_sum(const Frame& frame, const Region& region) {
  require(region.extent.rows > 0 && region.extent.cols > 0 && region.origin.row >= 0 &&
              region.origin.col >= 0 && region.row_end() <= frame.rows &&
              region.col_end() <= frame.cols,
          ErrorCode::geometry, "region lies outside the frame");
  std::uint64_t s = 0;
  for (int r = region.origin.row; r < region.row_end(); ++r) {
    const std::uint32_t* row = frame.counts.data() + static_cast<std::size_t>(r) * frame.cols;
    for (int c = region.origin.col; c < region.col_end(); ++c) s += row[c];
  }
  return static_cast<double>(s);
}

RegionPairSeries extract_series(std::span<const Frame> pdc, std::span<const Frame> background,
                                const Region& signal, const Region& idler) {
  RegionPairSeries out;
  out.n_s.reserve(pdc.size());
  out.n_i.reserve(pdc.size());
  for (const Frame& f : pdc) {
    out.n_s.push_back(region_sum(f, signal));
    out.n_i.push_back(region_sum(f, idler));
  }
  for (const Frame& f : background) {
    out.m_s.push_back(region_sum(f, signal));
    out.m_i.push_back(region_sum(f, idler));
  }
  return out;
}

double estimate_alpha(const RegionPairSeries& series) {
  series.validate();
  const double idler = mean(series.n_i);
  require(idler > 0.0, ErrorCode::degenerate, "idler mean is zero; alpha undefined");
  return mean(series.n_s) / idler;
}

NoiseReductionEstimate estimate_raw_sigma(const RegionPairSeries& series, VarianceConvention conv) {
  NoiseReductionEstimate e = estimate_sigma_alpha(series, 1.0, conv);
  e.variant = SigmaVariant::raw;
  return e;
}

NoiseReductionEstimate estimate_sigma_alpha(const RegionPairSeries& series, double alpha,
                                            VarianceConvention conv) {
  series.validate();
  const double denom = mean(series.n_s) + alpha * mean(series.n_i);
  require(denom > 0.0, ErrorCode::degenerate, "shot-noise normalisation is not positive");
  NoiseReductionEstimate e;
  e.value = difference_variance(series.n_s, series.n_i, alpha, conv) / denom;
  e.variant = SigmaVariant::alpha;
  e.alpha_used = alpha;
  e.n_frames = series.frames();
  return e;
}

AlphaBEstimate estimate_alpha_b(const RegionPairSeries& series) {
  series.validate();
  require_background(series);
  const double num = mean(series.n_s) - mean(series.m_s);
  const double den = mean(series.n_i) - mean(series.m_i);
  require(den != 0.0, ErrorCode::degenerate, "idler PDC mean is zero; alpha_B undefined");
  return {num / den, num <= 0.0 || den < 0.0};
}

NoiseReductionEstimate estimate_sigma_alpha_b(const RegionPairSeries& series, double alpha_b,
                                              VarianceConvention conv) {
  series.validate();
  require_background(series);
  const double pdc_mean = mean(series.n_s) - mean(series.m_s);
  require(pdc_mean > 0.0, ErrorCode::degenerate,
          "background-subtracted signal mean is not positive");
  const double v_on = difference_variance(series.n_s, series.n_i, alpha_b, conv);
  const double v_off = difference_variance(series.m_s, series.m_i, alpha_b, conv);
  NoiseReductionEstimate e;
  e.value = (v_on - v_off) / (2.0 * pdc_mean);
  e.variant = SigmaVariant::alpha_b;
  e.alpha_used = alpha_b;
  e.n_frames = series.frames();
  return e;
}

EtaEstimate eta_from_sigma(double alpha_b, double sigma_ab) {
  EtaEstimate e;
  e.eta_s = 0.5 * (1.0 + alpha_b) - sigma_ab;
  e.eta_i = alpha_b * e.eta_s;
  e.out_of_range = !(e.eta_s > 0.0 && e.eta_s <= 1.0);
  return e;
}

CorrectedEfficiency correct_for_transmittance(double eta, double tau) {
  require(std::isfinite(tau) && tau > 0.0 && tau <= 1.0, ErrorCode::domain,
          "transmittance must lie in (0, 1], got " + std::to_string(tau));
  CorrectedEfficiency c;
  c.value = eta / tau;
  c.out_of_range = c.value > 1.0;
  return c;
}

ExcessNoise excess_noise(const RegionPairSeries& series, std::optional<double> m_tot,
                         VarianceConvention conv) {
  series.validate();
  std::vector<double> total(series.frames());
  for (std::size_t k = 0; k < total.size(); ++k) total[k] = series.n_s[k] + series.n_i[k];
  ExcessNoise e;
  const double mean_total = mean(total);
  const double mean_s = mean(series.n_s);
  const double mean_i = mean(series.n_i);
  require(mean_total > 0.0, ErrorCode::degenerate, "series mean is zero");
  e.sum_ratio = variance(total, conv) / mean_total;
  e.fano_s = mean_s > 0.0 ? variance(series.n_s, conv) / mean_s : 0.0;
  e.fano_i = mean_i > 0.0 ? variance(series.n_i, conv) / mean_i : 0.0;
  if (m_tot) {
    require(*m_tot >= 1.0, ErrorCode::domain, "mode count must be >= 1");
    e.thermal_prediction = mean_s / *m_tot;
  }
  return e;
}

}  // namespace twinbeam
