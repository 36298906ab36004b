#include "twinbeam/uncertainty.hpp"

#include <array>
#include <cmath>
#include <string>

namespace twinbeam {

namespace {

constexpr std::size_t kMoments = 10;
constexpr std::size_t kPerSample = 5;

// Forward-mode dual number carrying the gradient w.r.t. the ten moments.
struct Dual {
  double v = 0.0;
  std::array<double, kMoments> d{};

  static Dual variable(double value, std::size_t index) {
    Dual x;
    x.v = value;
    x.d[index] = 1.0;
    return x;
  }
};

Dual operator+(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v + b.v;
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = a.d[k] + b.d[k];
  return r;
}
Dual operator-(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v - b.v;
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = a.d[k] - b.d[k];
  return r;
}
Dual operator*(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v * b.v;
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = a.d[k] * b.v + a.v * b.d[k];
  return r;
}
Dual operator/(const Dual& a, const Dual& b) {
  Dual r;
  r.v = a.v / b.v;
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = (a.d[k] * b.v - a.v * b.d[k]) / (b.v * b.v);
  return r;
}
Dual operator*(double s, const Dual& a) {
  Dual r;
  r.v = s * a.v;
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = s * a.d[k];
  return r;
}
Dual operator+(double s, const Dual& a) {
  Dual r = a;
  r.v += s;
  return r;
}
Dual sqrt(const Dual& a) {
  Dual r;
  r.v = std::sqrt(a.v);
  for (std::size_t k = 0; k < kMoments; ++k) r.d[k] = a.d[k] / (2.0 * r.v);
  return r;
}

template <class T>
T evaluate(Statistic stat, const std::array<T, kMoments>& m) {
  using std::sqrt;
  const T& A = m[0];
  const T& B = m[1];
  const T& Saa = m[2];
  const T& Sab = m[3];
  const T& Sbb = m[4];
  const T& C = m[5];
  const T& D = m[6];
  const T& Scc = m[7];
  const T& Sce = m[8];
  const T& See = m[9];
  switch (stat) {
    case Statistic::mean_signal: return A;
    case Statistic::sd_signal: return sqrt(Saa);
    case Statistic::mean_background_signal: return C;
    case Statistic::sd_background_signal: return sqrt(Scc);
    case Statistic::alpha: return A / B;
    case Statistic::alpha_b: return (A - C) / (B - D);
    case Statistic::raw_sigma: return (Saa - 2.0 * Sab + Sbb) / (A + B);
    case Statistic::sigma_alpha: {
      const T a = A / B;
      return (Saa - 2.0 * a * Sab + a * a * Sbb) / (A + a * B);
    }
    case Statistic::sigma_alpha_b:
    case Statistic::eta_s: {
      const T a = (A - C) / (B - D);
      const T on = Saa - 2.0 * a * Sab + a * a * Sbb;
      const T off = Scc - 2.0 * a * Sce + a * a * See;
      const T sigma = (on - off) / (2.0 * (A - C));
      if (stat == Statistic::sigma_alpha_b) return sigma;
      return 0.5 + 0.5 * a - sigma;
    }
  }
  return A;
}

bool needs_background(Statistic stat) {
  switch (stat) {
    case Statistic::mean_background_signal:
    case Statistic::sd_background_signal:
    case Statistic::alpha_b:
    case Statistic::sigma_alpha_b:
    case Statistic::eta_s: return true;
    default: return false;
  }
}

using Cov5 = std::array<std::array<double, kPerSample>, kPerSample>;

struct PairMoments {
  double mean_x = 0.0, mean_y = 0.0, sxx = 0.0, sxy = 0.0, syy = 0.0;
  Cov5 cov{};  // covariance of the per-frame contributions
  std::size_t n = 0;
};

PairMoments pair_moments(std::span<const double> x, std::span<const double> y,
                         VarianceConvention conv) {
  PairMoments pm;
  pm.n = x.size();
  pm.mean_x = mean(x);
  pm.mean_y = mean(y);
  pm.sxx = covariance(x, x, conv);
  pm.sxy = covariance(x, y, conv);
  pm.syy = covariance(y, y, conv);

  std::vector<std::array<double, kPerSample>> z(pm.n);
  std::array<double, kPerSample> zbar{};
  for (std::size_t k = 0; k < pm.n; ++k) {
    const double dx = x[k] - pm.mean_x;
    const double dy = y[k] - pm.mean_y;
    z[k] = {x[k], y[k], dx * dx, dx * dy, dy * dy};
    for (std::size_t j = 0; j < kPerSample; ++j) zbar[j] += z[k][j];
  }
  for (double& v : zbar) v /= static_cast<double>(pm.n);
  for (const auto& zk : z) {
    for (std::size_t i = 0; i < kPerSample; ++i) {
      for (std::size_t j = 0; j < kPerSample; ++j) {
        pm.cov[i][j] += (zk[i] - zbar[i]) * (zk[j] - zbar[j]);
      }
    }
  }
  for (auto& row : pm.cov) {
    for (double& v : row) v /= static_cast<double>(pm.n - 1);
  }
  return pm;
}

struct MomentModel {
  PairMoments on;
  PairMoments off;
  bool has_background = false;

  std::array<double, kMoments> values() const {
    return {on.mean_x, on.mean_y, on.sxx, on.sxy, on.syy,
            off.mean_x, off.mean_y, off.sxx, off.sxy, off.syy};
  }

  std::array<Dual, kMoments> variables() const {
    const auto v = values();
    std::array<Dual, kMoments> out;
    for (std::size_t k = 0; k < kMoments; ++k) out[k] = Dual::variable(v[k], k);
    return out;
  }

  // g1' Cov g2 summed over the two independent samples.
  double covariance(const std::array<double, kMoments>& g1,
                    const std::array<double, kMoments>& g2) const {
    double total = 0.0;
    const auto part = [&](const PairMoments& pm, std::size_t offset) {
      double s = 0.0;
      for (std::size_t i = 0; i < kPerSample; ++i) {
        for (std::size_t j = 0; j < kPerSample; ++j) {
          s += g1[offset + i] * pm.cov[i][j] * g2[offset + j];
        }
      }
      return s / static_cast<double>(pm.n);
    };
    total += part(on, 0);
    if (has_background) total += part(off, kPerSample);
    return total;
  }
};

MomentModel build_model(const RegionPairSeries& series, VarianceConvention conv) {
  series.validate();
  MomentModel model;
  model.on = pair_moments(series.n_s, series.n_i, conv);
  model.has_background = series.has_background();
  if (model.has_background) model.off = pair_moments(series.m_s, series.m_i, conv);
  return model;
}

double checked_sqrt(double variance, const char* what) {
  require(std::isfinite(variance) && variance >= 0.0, ErrorCode::degenerate,
          std::string("degenerate covariance while propagating ") + what);
  return std::sqrt(variance);
}

}  // namespace

Measured delta_method(const RegionPairSeries& series, Statistic stat, VarianceConvention conv) {
  const MomentModel model = build_model(series, conv);
  require(!needs_background(stat) || model.has_background, ErrorCode::invalid_argument,
          "statistic needs a background series");
  const Dual y = evaluate(stat, model.variables());
  require(std::isfinite(y.v), ErrorCode::degenerate, "statistic is not finite");
  return {y.v, checked_sqrt(model.covariance(y.d, y.d), "statistic")};
}

TypeAUncertainty propagate_type_a(const RegionPairSeries& series, VarianceConvention conv) {
  const MomentModel model = build_model(series, conv);
  require(model.has_background, ErrorCode::invalid_argument,
          "propagation of alpha_B and sigma_alpha,B needs a background series");
  require(model.on.mean_x > model.off.mean_x, ErrorCode::degenerate,
          "background-subtracted signal mean is not positive");
  const auto vars = model.variables();
  const Dual a = evaluate(Statistic::alpha_b, vars);
  const Dual s = evaluate(Statistic::sigma_alpha_b, vars);
  require(std::isfinite(a.v) && std::isfinite(s.v), ErrorCode::degenerate,
          "alpha_B or sigma_alpha,B is not finite");

  TypeAUncertainty out;
  out.alpha_b = a.v;
  out.sigma_ab = s.v;
  out.eta_s = 0.5 * (1.0 + a.v) - s.v;
  const double var_a = model.covariance(a.d, a.d);
  const double var_s = model.covariance(s.d, s.d);
  out.cov_alpha_sigma = model.covariance(a.d, s.d);
  out.u_alpha_b = checked_sqrt(var_a, "alpha_B");
  out.u_sigma_ab = checked_sqrt(var_s, "sigma_alpha,B");
  out.u_eta_s = checked_sqrt(0.25 * var_a + var_s - out.cov_alpha_sigma, "eta_s");
  return out;
}

std::vector<RegionPairSeries> split_batches(const RegionPairSeries& series, int z) {
  require(z >= 1, ErrorCode::invalid_argument, "batch count must be >= 1");
  const std::size_t n = series.frames() / static_cast<std::size_t>(z);
  const std::size_t m = series.background_frames() / static_cast<std::size_t>(z);
  require(n >= 2, ErrorCode::invalid_argument,
          "not enough PDC frames for " + std::to_string(z) + " batches");
  require(!series.has_background() || m >= 2, ErrorCode::invalid_argument,
          "not enough background frames for " + std::to_string(z) + " batches");
  std::vector<RegionPairSeries> out(static_cast<std::size_t>(z));
  const auto slice = [](const std::vector<double>& v, std::size_t start, std::size_t len) {
    return std::vector<double>(v.begin() + static_cast<std::ptrdiff_t>(start),
                               v.begin() + static_cast<std::ptrdiff_t>(start + len));
  };
  for (std::size_t l = 0; l < out.size(); ++l) {
    out[l].n_s = slice(series.n_s, l * n, n);
    out[l].n_i = slice(series.n_i, l * n, n);
    if (series.has_background()) {
      out[l].m_s = slice(series.m_s, l * m, m);
      out[l].m_i = slice(series.m_i, l * m, m);
    }
  }
  return out;
}

RepeatResult repeat_experiment(std::span<const RegionPairSeries> batches, VarianceConvention conv) {
  require(batches.size() >= 2, ErrorCode::invalid_argument, "need at least 2 repeats");
  RepeatResult r;
  r.batches.reserve(batches.size());
  for (std::size_t l = 0; l < batches.size(); ++l) {
    TypeAUncertainty t;
    try {
      t = propagate_type_a(batches[l], conv);
    } catch (const Error& e) {
      fail(ErrorCode::degenerate, "batch " + std::to_string(l) + ": " + e.what());
    }
    BatchEstimate b;
    b.n = batches[l].frames();
    b.m = batches[l].background_frames();
    b.alpha_b = t.alpha_b;
    b.sigma_ab = t.sigma_ab;
    b.eta_s = t.eta_s;
    b.u_alpha_b = t.u_alpha_b;
    b.u_sigma_ab = t.u_sigma_ab;
    b.u_eta_s = t.u_eta_s;
    r.batches.push_back(b);
  }

  const double z = static_cast<double>(r.batches.size());
  double var_a = 0.0, var_s = 0.0, var_e = 0.0;
  for (const auto& b : r.batches) {
    r.alpha_b += b.alpha_b / z;
    r.sigma_ab += b.sigma_ab / z;
    var_a += b.u_alpha_b * b.u_alpha_b;
    var_s += b.u_sigma_ab * b.u_sigma_ab;
    var_e += b.u_eta_s * b.u_eta_s;
  }
  const EtaEstimate eta = eta_from_sigma(r.alpha_b, r.sigma_ab);
  r.eta_s = eta.eta_s;
  r.eta_i = eta.eta_i;
  r.u_alpha_b = std::sqrt(var_a) / z;
  r.u_sigma_ab = std::sqrt(var_s) / z;
  r.u_eta_s = std::sqrt(var_e) / z;

  double ss_a = 0.0, ss_s = 0.0, ss_e = 0.0;
  for (const auto& b : r.batches) {
    ss_a += (b.alpha_b - r.alpha_b) * (b.alpha_b - r.alpha_b);
    ss_s += (b.sigma_ab - r.sigma_ab) * (b.sigma_ab - r.sigma_ab);
    ss_e += (b.eta_s - r.eta_s) * (b.eta_s - r.eta_s);
  }
  r.sem_alpha_b = std::sqrt(ss_a / (z * (z - 1.0)));
  r.sem_sigma_ab = std::sqrt(ss_s / (z * (z - 1.0)));
  r.sem_eta_s = std::sqrt(ss_e / (z * (z - 1.0)));
  r.population_sd_sigma_ab = std::sqrt(ss_s / (z - 1.0));
  return r;
}

}  // namespace twinbeam
