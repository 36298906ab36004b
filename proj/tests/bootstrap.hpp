#pragma once

// Nonparametric bootstrap of the background-corrected estimators; an
// independent check on the delta-method uncertainties.

#include <cmath>
#include <random>

#include "twinbeam/estimation.hpp"
#include "twinbeam/rng.hpp"

namespace twinbeam::testing {

struct BootstrapSd {
  double alpha_b = 0.0;
  double sigma_ab = 0.0;
  double eta_s = 0.0;
};

inline BootstrapSd bootstrap(const RegionPairSeries& s, int resamples, std::uint64_t seed) {
  Engine rng = derive_stream(seed, 0xB00, 0);
  std::uniform_int_distribution<std::size_t> pick_on(0, s.frames() - 1);
  std::uniform_int_distribution<std::size_t> pick_off(0, s.background_frames() - 1);
  std::vector<double> a, g, e;
  RegionPairSeries r;
  r.n_s.resize(s.frames());
  r.n_i.resize(s.frames());
  r.m_s.resize(s.background_frames());
  r.m_i.resize(s.background_frames());
  for (int b = 0; b < resamples; ++b) {
    for (std::size_t k = 0; k < s.frames(); ++k) {
      const std::size_t j = pick_on(rng);
      r.n_s[k] = s.n_s[j];
      r.n_i[k] = s.n_i[j];
    }
    for (std::size_t k = 0; k < s.background_frames(); ++k) {
      const std::size_t j = pick_off(rng);
      r.m_s[k] = s.m_s[j];
      r.m_i[k] = s.m_i[j];
    }
    const double alpha = estimate_alpha_b(r).value;
    const double sigma = estimate_sigma_alpha_b(r, alpha).value;
    a.push_back(alpha);
    g.push_back(sigma);
    e.push_back(eta_from_sigma(alpha, sigma).eta_s);
  }
  return {std::sqrt(variance(a)), std::sqrt(variance(g)), std::sqrt(variance(e))};
}

}  // namespace twinbeam::testing
