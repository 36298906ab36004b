#include <doctest.h>

#include <cmath>

#include "bootstrap.hpp"
#include "twinbeam/calibration.hpp"
#include "twinbeam/uncertainty.hpp"

using namespace twinbeam;
using doctest::Approx;

namespace {

RegionPairSeries reference_series(std::size_t n, std::uint64_t seed) {
  RunConfig rc = table1_run_config();
  rc.experiment.master_seed = seed;
  const auto pdc = generate_stack(rc.experiment, n, FrameKind::pdc_on);
  const auto bg = generate_stack(rc.experiment, n, FrameKind::background);
  const Region s = rc.analysis.signal_region;
  return extract_series(pdc, bg, s, rc.experiment.geometry.conjugate_region(s));
}

}  // namespace

TEST_CASE("delta method for a mean is the textbook standard error") {
  RegionPairSeries s;
  s.n_s = {3, 5, 4, 8, 10, 6};
  s.n_i = {2, 2, 3, 3, 4, 4};
  const Measured m = delta_method(s, Statistic::mean_signal);
  CHECK(m.value == Approx(6.0));
  CHECK(m.u == Approx(std::sqrt(variance(s.n_s) / 6)));
}

TEST_CASE("delta method for alpha matches the ratio-estimator formula") {
  RunConfig rc = table1_run_config();
  const RegionPairSeries s = reference_series(500, 1);
  const Measured a = delta_method(s, Statistic::alpha);
  // u(A/B)^2 = (Var A + r^2 Var B - 2 r Cov) / (n B^2)
  const double A = mean(s.n_s), B = mean(s.n_i), r = A / B;
  const double expected = std::sqrt((variance(s.n_s) + r * r * variance(s.n_i) -
                                     2 * r * covariance(s.n_s, s.n_i)) /
                                    (s.frames() * B * B));
  CHECK(a.value == Approx(r));
  CHECK(a.u == Approx(expected).epsilon(1e-9));
}

TEST_CASE("delta method agrees with a 1000-resample bootstrap") {
  const RegionPairSeries s = reference_series(500, 2);
  const TypeAUncertainty t = propagate_type_a(s);
  const testing::BootstrapSd b = testing::bootstrap(s, 1000, 3);
  CHECK(t.u_alpha_b == Approx(b.alpha_b).epsilon(0.15));
  CHECK(t.u_sigma_ab == Approx(b.sigma_ab).epsilon(0.15));
  CHECK(t.u_eta_s == Approx(b.eta_s).epsilon(0.15));
}

TEST_CASE("propagated values match the point estimators") {
  const RegionPairSeries s = reference_series(300, 4);
  const TypeAUncertainty t = propagate_type_a(s);
  const double alpha = estimate_alpha_b(s).value;
  CHECK(t.alpha_b == Approx(alpha).epsilon(1e-9));
  CHECK(t.sigma_ab == Approx(estimate_sigma_alpha_b(s, alpha).value).epsilon(1e-9));
  CHECK(t.eta_s == Approx(eta_from_sigma(alpha, t.sigma_ab).eta_s).epsilon(1e-12));
  CHECK(t.u_eta_s * t.u_eta_s ==
        Approx(t.u_alpha_b * t.u_alpha_b / 4 + t.u_sigma_ab * t.u_sigma_ab - t.cov_alpha_sigma));
  CHECK(delta_method(s, Statistic::eta_s).u == Approx(t.u_eta_s).epsilon(1e-9));
}

TEST_CASE("uncertainty scales as 1/sqrt(N)") {
  const RegionPairSeries big = reference_series(2000, 5);
  const auto halves = split_batches(big, 2);
  const double u_full = propagate_type_a(big).u_sigma_ab;
  const double u_half = propagate_type_a(halves[0]).u_sigma_ab;
  CHECK(u_half / u_full == Approx(std::sqrt(2.0)).epsilon(0.1));
}

TEST_CASE("splitting into batches") {
  RegionPairSeries s;
  for (int k = 0; k < 11; ++k) {
    s.n_s.push_back(k);
    s.n_i.push_back(k + 100);
  }
  for (int k = 0; k < 7; ++k) {
    s.m_s.push_back(k);
    s.m_i.push_back(k);
  }
  const auto b = split_batches(s, 3);
  REQUIRE(b.size() == 3);
  CHECK(b[0].n_s == std::vector<double>{0, 1, 2});
  CHECK(b[2].n_i == std::vector<double>{106, 107, 108});
  CHECK(b[1].m_s == std::vector<double>{2, 3});
  CHECK_THROWS_AS(split_batches(s, 4), Error);  // 7 / 4 < 2 background frames
  CHECK_THROWS_AS(split_batches(s, 0), Error);
}

TEST_CASE("repeat_experiment aggregates per-batch estimates") {
  const RegionPairSeries s = reference_series(800, 6);
  const auto batches = split_batches(s, 4);
  const RepeatResult r = repeat_experiment(batches);
  REQUIRE(r.batches.size() == 4);
  double mean_a = 0.0, mean_s = 0.0, u2 = 0.0;
  std::vector<double> sig;
  for (std::size_t l = 0; l < 4; ++l) {
    const TypeAUncertainty t = propagate_type_a(batches[l]);
    CHECK(r.batches[l].sigma_ab == Approx(t.sigma_ab));
    mean_a += t.alpha_b / 4;
    mean_s += t.sigma_ab / 4;
    u2 += t.u_sigma_ab * t.u_sigma_ab;
    sig.push_back(t.sigma_ab);
  }
  CHECK(r.alpha_b == Approx(mean_a));
  CHECK(r.sigma_ab == Approx(mean_s));
  CHECK(r.eta_s == Approx(0.5 * (1 + mean_a) - mean_s));
  CHECK(r.eta_i == Approx(r.alpha_b * r.eta_s).epsilon(1e-12));
  CHECK(r.u_sigma_ab == Approx(std::sqrt(u2) / 4));
  CHECK(r.sem_sigma_ab == Approx(std::sqrt(variance(sig) / 4)));
  CHECK(r.population_sd_sigma_ab == Approx(std::sqrt(variance(sig))));
  CHECK_THROWS_AS(repeat_experiment(std::span(batches).first(1)), Error);
}

TEST_CASE("degenerate batches are reported") {
  RegionPairSeries s;
  s.n_s = {5, 5, 5, 5};
  s.n_i = {5, 5, 5, 5};
  s.m_s = {9, 9, 9, 9};
  s.m_i = {1, 1, 1, 1};
  try {
    const auto b = split_batches(s, 2);
    repeat_experiment(b);
    FAIL("expected a degenerate error");
  } catch (const Error& e) {
    CHECK(e.code() == ErrorCode::degenerate);
  }
}
