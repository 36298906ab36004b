#include <doctest.h>

#include <cmath>

#include "twinbeam/estimation.hpp"
#include "twinbeam/uncertainty.hpp"

using namespace twinbeam;
using doctest::Approx;

namespace {

ExperimentConfig balanced(double eta = 0.6) {
  ExperimentConfig cfg;
  cfg.channel = {eta, eta};
  cfg.modes.temporal_modes = 5000;
  cfg.modes.grid = {5, 8};
  cfg.pulse.mean_mu = 0.1;
  cfg.geometry = FrameGeometry::symmetric(7, 10, {1, 1});
  cfg.master_seed = 2024;
  return cfg;
}

// Straylight at about 5% of the signal, read noise 4 e- at 24x24 binning.
ExperimentConfig with_background(double eta_s, double eta_i) {
  ExperimentConfig cfg = balanced();
  cfg.channel = {eta_s, eta_i};
  cfg.background.straylight_mean = 0.05 * 5000 * eta_s * 0.1;
  cfg.background.read_noise_std = 4.0;
  cfg.background.binning = 24;
  cfg.background.readout = Readout::per_superpixel;
  return cfg;
}

RegionPairSeries simulate(const ExperimentConfig& cfg, std::size_t n, std::size_t m = 0) {
  const Region s = cfg.emission_region();
  const Region i = cfg.geometry.conjugate_region(s);
  const auto pdc = generate_stack(cfg, n, FrameKind::pdc_on);
  std::vector<Frame> bg;
  if (m > 0) bg = generate_stack(cfg, m, FrameKind::background);
  return extract_series(pdc, bg, s, i);
}

RegionPairSeries tiny() {
  RegionPairSeries s;
  s.n_s = {1, 2, 3, 4};
  s.n_i = {1, 1, 2, 2};
  return s;
}

}  // namespace

TEST_CASE("hand-computed estimators") {
  const RegionPairSeries s = tiny();
  CHECK(estimate_alpha(s) == Approx(2.5 / 1.5));
  // Differences {0,1,1,2}: unbiased variance 2/3, biased 1/2; SNL 4.
  CHECK(estimate_raw_sigma(s).value == Approx(2.0 / 3 / 4));
  CHECK(estimate_raw_sigma(s, VarianceConvention::biased).value == Approx(0.5 / 4));
  CHECK(estimate_raw_sigma(s).variant == SigmaVariant::raw);
  // alpha = 2: differences {-1,0,-1,0}, variance 1/3, SNL 2.5 + 3 = 5.5.
  CHECK(estimate_sigma_alpha(s, 2.0).value == Approx(1.0 / 3 / 5.5));
}

TEST_CASE("identical series have zero noise reduction factor") {
  RegionPairSeries s;
  s.n_s = {10, 12, 9, 14, 11};
  s.n_i = s.n_s;
  CHECK(estimate_alpha(s) == 1.0);
  CHECK(estimate_sigma_alpha(s, 1.0).value == 0.0);
}

TEST_CASE("background-corrected estimators on hand data") {
  RegionPairSeries s;
  s.n_s = {11, 13, 12, 16};
  s.n_i = {10, 12, 10, 12};
  s.m_s = {1, 2, 1, 2};
  s.m_i = {2, 1, 2, 1};
  // (13 - 1.5) / (11 - 1.5)
  const AlphaBEstimate a = estimate_alpha_b(s);
  CHECK(a.value == Approx(11.5 / 9.5));
  CHECK_FALSE(a.background_exceeds_signal);
  const double alpha = a.value;
  std::vector<double> d_on, d_off;
  for (int k = 0; k < 4; ++k) {
    d_on.push_back(s.n_s[k] - alpha * s.n_i[k]);
    d_off.push_back(s.m_s[k] - alpha * s.m_i[k]);
  }
  const double expected = (variance(d_on) - variance(d_off)) / (2 * 11.5);
  CHECK(estimate_sigma_alpha_b(s, alpha).value == Approx(expected));
}

TEST_CASE("negative sigma_alpha,B is reported unclamped") {
  RegionPairSeries s;
  s.n_s = {10, 10, 10, 10};
  s.n_i = {10, 10, 10, 10};
  s.m_s = {0, 4, 0, 4};
  s.m_i = {4, 0, 4, 0};
  const NoiseReductionEstimate e = estimate_sigma_alpha_b(s, 1.0);
  CHECK(e.value < 0.0);
  CHECK(e.negative());
}

TEST_CASE("background exceeding signal is flagged") {
  RegionPairSeries s;
  s.n_s = {5, 6};
  s.n_i = {5, 6};
  s.m_s = {7, 8};
  s.m_i = {3, 4};
  CHECK(estimate_alpha_b(s).background_exceeds_signal);
}

TEST_CASE("input validation") {
  RegionPairSeries s;
  s.n_s = {1, 2, 3};
  s.n_i = {1, 2};
  CHECK_THROWS_AS(estimate_alpha(s), Error);
  s.n_i = {0, 0, 0};
  CHECK_THROWS_AS(estimate_alpha(s), Error);
  s.n_s = {1};
  s.n_i = {1};
  CHECK_THROWS_AS(estimate_sigma_alpha(s, 1.0), Error);
  CHECK_THROWS_AS(estimate_alpha_b(tiny()), Error);
  RegionPairSeries neg = tiny();
  neg.n_s[0] = -1;
  CHECK_THROWS_AS(estimate_alpha(neg), Error);
}

TEST_CASE("efficiency from sigma_alpha,B") {
  const EtaEstimate e = eta_from_sigma(0.99416, 0.384);
  CHECK(e.eta_s == Approx(0.613).epsilon(1e-3));
  CHECK(e.eta_i / e.eta_s == Approx(0.99416).epsilon(1e-12));
  CHECK_FALSE(e.out_of_range);
  CHECK(eta_from_sigma(1.0, -0.2).out_of_range);
  CHECK(eta_from_sigma(1.0, 1.0).out_of_range);
}

TEST_CASE("transmittance correction") {
  const CorrectedEfficiency c = correct_for_transmittance(0.613, 0.9025);
  CHECK(c.value == Approx(0.6792).epsilon(1e-4));
  CHECK_FALSE(c.out_of_range);
  const CorrectedEfficiency over = correct_for_transmittance(0.9, 0.72);
  CHECK(over.value == Approx(1.25));
  CHECK(over.out_of_range);
  CHECK_THROWS_AS(correct_for_transmittance(0.6, 0.0), Error);
  CHECK_THROWS_AS(correct_for_transmittance(0.6, 1.1), Error);
}

TEST_CASE("balanced simulation: alpha = 1 and sigma_alpha = 1 - eta") {
  const RegionPairSeries s = simulate(balanced(), 4000);
  const Measured a = delta_method(s, Statistic::alpha);
  CHECK(std::abs(a.value - 1.0) < 3 * a.u);
  const Measured sa = delta_method(s, Statistic::sigma_alpha);
  CHECK(std::abs(sa.value - 0.4) < 3 * sa.u);
  CHECK(sa.value == Approx(estimate_sigma_alpha(s, estimate_alpha(s)).value));
}

TEST_CASE("excess noise without jitter") {
  const ExperimentConfig cfg = balanced();
  const RegionPairSeries s = simulate(cfg, 4000);
  const double m_tot = 40.0 * 5000;
  const ExcessNoise e = excess_noise(s, m_tot);
  // Var(N) / E[N] ~ chi-square scaling for large counts.
  const double rel = std::sqrt(2.0 / (s.frames() - 1));
  // Single arm: 1 + eta*mu.
  CHECK(std::abs(e.fano_s - 1.06) < 3 * rel * 1.06);
  // Sum: 1 + eta*mu + eta*(1 + mu), pair correlation included.
  CHECK(std::abs(e.sum_ratio - 1.72) < 3 * rel * 1.72);
  REQUIRE(e.thermal_prediction);
  CHECK(*e.thermal_prediction == Approx(0.06).epsilon(0.01));
}

TEST_CASE("excess noise with 10% pulse jitter is of order 10^3 to 10^4") {
  ExperimentConfig cfg = balanced(0.613);
  cfg.modes.areas_per_cell = 16;
  cfg.pulse.mean_mu = 0.127426;
  cfg.pulse.relative_energy_jitter = 0.1;
  const ExcessNoise e = excess_noise(simulate(cfg, 1000));
  CHECK(e.sum_ratio > 1e3);
  CHECK(e.sum_ratio < 1e4);
}

TEST_CASE("alpha_B recovers the configured loss imbalance") {
  const ExperimentConfig cfg = with_background(0.613, 0.613 / 0.99416);
  const RegionPairSeries s = simulate(cfg, 4000, 4000);
  const Measured a = delta_method(s, Statistic::alpha_b);
  CHECK(std::abs(a.value - 0.99416) < 3 * a.u);
  const Measured sab = delta_method(s, Statistic::sigma_alpha_b);
  CHECK(std::abs(sab.value - predict_sigma_alpha(a.value, 0.613)) < 3 * sab.u);
  const Measured eta = delta_method(s, Statistic::eta_s);
  CHECK(std::abs(eta.value - 0.613) < 3 * eta.u);
}

TEST_CASE("raw sigma picks up pulse jitter under loss imbalance") {
  ExperimentConfig cfg = balanced();
  cfg.channel = {0.62, 0.60};
  cfg.pulse.relative_energy_jitter = 0.1;
  const RegionPairSeries s = simulate(cfg, 2000);
  const double raw = estimate_raw_sigma(s).value;
  const double compensated = estimate_sigma_alpha(s, estimate_alpha(s)).value;
  CHECK(raw > compensated + 0.03);
  // Closed-form jitter prediction: mu ~ energy, Var(mu) = (0.1 mu)^2.
  const double predicted =
      predict_sigma_with_jitter(cfg.channel, 0.1, 1e-4, 40.0 * 5000);
  const Measured m = delta_method(s, Statistic::raw_sigma);
  CHECK(std::abs(m.value - predicted) < 3 * m.u);
}
