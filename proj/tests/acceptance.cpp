// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <string>
#include <vector>

#include "bootstrap.hpp"
#include "scratch_dir.hpp"
#include "twinbeam/calibration.hpp"
#include "twinbeam/pipeline_io.hpp"

using namespace twinbeam;

namespace {

struct Outcome {
  bool passed = false;
  std::string detail;
};

std::string fmt(const char* pattern, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, pattern, args...);
  return buf;
}

double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// eta = 0.6, mu = 0.1, M_t = 5000, 5 x 8 cells, no background or jitter.
ExperimentConfig balanced_config() {
  ExperimentConfig cfg;
  cfg.channel = {0.6, 0.6};
  cfg.modes.temporal_modes = 5000;
  cfg.modes.grid = {5, 8};
  cfg.pulse.mean_mu = 0.1;
  cfg.geometry = FrameGeometry::symmetric(7, 10, {1, 1});
  cfg.master_seed = 101;
  return cfg;
}

RegionPairSeries emission_series(const ExperimentConfig& cfg, std::size_t n, std::size_t m = 0) {
  const Region s = cfg.emission_region();
  const Region i = cfg.geometry.conjugate_region(s);
  const auto pdc = generate_stack(cfg, n, FrameKind::pdc_on);
  std::vector<Frame> bg;
  if (m > 0) bg = generate_stack(cfg, m, FrameKind::background);
  return extract_series(pdc, bg, s, i);
}

RegionPairSeries reference_series(std::uint64_t seed, std::size_t n, std::size_t m) {
  RunConfig rc = table1_run_config();
  rc.experiment.master_seed = seed;
  const auto pdc = generate_stack(rc.experiment, n, FrameKind::pdc_on);
  const auto bg = generate_stack(rc.experiment, m, FrameKind::background);
  const Region s = rc.analysis.signal_region;
  return extract_series(pdc, bg, s, rc.experiment.geometry.conjugate_region(s));
}

// Standard errors of sample moments from the empirical fourth moments.
struct MomentCheck {
  double value = 0.0;
  double se = 0.0;
};

MomentCheck mean_of(const std::vector<double>& x) {
  return {mean(x), std::sqrt(variance(x) / x.size())};
}

MomentCheck covariance_of(const std::vector<double>& x, const std::vector<double>& y) {
  const double mx = mean(x), my = mean(y);
  std::vector<double> prod(x.size());
  for (std::size_t k = 0; k < x.size(); ++k) prod[k] = (x[k] - mx) * (y[k] - my);
  return {covariance(x, y), std::sqrt(variance(prod) / x.size())};
}

Outcome balanced_identity() {
  const auto t0 = std::chrono::steady_clock::now();
  const RegionPairSeries s = emission_series(balanced_config(), 2000);
  const Measured sa = delta_method(s, Statistic::sigma_alpha);
  const double elapsed = seconds_since(t0);
  const bool ok = std::abs(sa.value - 0.4) < 3 * sa.u && elapsed < 60.0;
  return {ok, fmt("sigma_alpha = %.4f +- %.4f (expect 0.400), %.1f s", sa.value, sa.u, elapsed)};
}

Outcome moment_laws() {
  const ExperimentConfig cfg = balanced_config();
  const RegionPairSeries s = emission_series(cfg, 2000);
  const double m_tot = 40.0 * 5000;
  const double eta = 0.6, mu = 0.1;
  const MomentCheck m = mean_of(s.n_s);
  const MomentCheck v = covariance_of(s.n_s, s.n_s);
  const MomentCheck c = covariance_of(s.n_s, s.n_i);
  const double em = m_tot * eta * mu;
  const double ev = predict_variance(mu, eta, m_tot);
  const double ec = predict_covariance(mu, eta, eta, m_tot);
  const double zm = (m.value - em) / m.se;
  const double zv = (v.value - ev) / v.se;
  const double zc = (c.value - ec) / c.se;
  const bool ok = std::abs(zm) < 3 && std::abs(zv) < 3 && std::abs(zc) < 3;
  return {ok, fmt("mean %.1f (%.0f, z=%.2f), var %.1f (%.0f, z=%.2f), cov %.1f (%.0f, z=%.2f)", m.value,
                  em, zm, v.value, ev, zv, c.value, ec, zc)};
}

Outcome jitter_excess_noise() {
  // Reference count levels and 10% jitter, no background; the idler arm is
  // made markedly lossier so the unbalanced sigma picks up the jitter.
  ExperimentConfig cfg = table1_run_config().experiment;
  cfg.background = BackgroundModel{};
  cfg.channel = {0.613, 0.45};
  cfg.pulse.relative_energy_jitter = 0.1;
  cfg.master_seed = 303;
  const RunConfig rc = table1_run_config();
  const Region sr = rc.analysis.signal_region;
  const auto pdc = generate_stack(cfg, 2000, FrameKind::pdc_on);
  const RegionPairSeries s = extract_series(pdc, {}, sr, cfg.geometry.conjugate_region(sr));
  const ExcessNoise e = excess_noise(s);
  const Measured raw = delta_method(s, Statistic::raw_sigma);
  const Measured sa = delta_method(s, Statistic::sigma_alpha);
  const double alpha = estimate_alpha(s);
  const double expected = predict_sigma_alpha(alpha, 0.613);
  const bool ok = e.sum_ratio >= 1e3 && e.sum_ratio <= 1e4 && raw.value >= 100 * sa.value &&
                  std::abs(sa.value - expected) < 3 * sa.u;
  return {ok, fmt("E = %.0f, sigma = %.2f, sigma_alpha = %.4f +- %.4f (expect %.4f), ratio %.0f",
                  e.sum_ratio, raw.value, sa.value, sa.u, expected, raw.value / sa.value)};
}

Outcome closed_loop() {
  const auto t0 = std::chrono::steady_clock::now();
  const Table1Report rep = reproduce_table1(table1_run_config());
  const CalibrationResult& r = rep.calibration;
  const double elapsed = seconds_since(t0);
  const double u = r.u_eta_s;
  const bool ok = std::abs(r.eta_s - 0.613) < 3 * u && u > 0.011 / 2 && u < 0.011 * 2 && elapsed < 600.0;
  return {ok, fmt("eta_s = %.4f +- %.4f (truth 0.613, z=%.2f), alpha_B = %.5f, %.1f s", r.eta_s, u,
                  (r.eta_s - 0.613) / u, r.alpha_b, elapsed)};
}

Outcome cs_search() {
  ExperimentConfig base = table1_run_config().experiment;
  base.modes.grid = {8, 8};
  base.geometry = FrameGeometry::symmetric(16, 20, {4, 4});
  base.master_seed = 505;
  bool ok = true;
  std::string detail;
  for (const Pixel off : {Pixel{0, 0}, Pixel{2, -1}, Pixel{-3, 3}}) {
    ExperimentConfig cfg = base;
    cfg.cs_offset = {static_cast<double>(off.row), static_cast<double>(off.col)};
    const auto frames = generate_stack(cfg, 20, FrameKind::pdc_on);
    const SigmaSpatialMap map = sigma_spatial_map(frames, cfg.geometry, cfg.emission_region(), {3, 3});
    const double plateau = map.plateau(3);
    const bool hit = map.argmin == off && map.min_value < 0.5 * plateau;
    ok = ok && hit;
    detail += fmt("(%d,%d)->(%d,%d) dip %.3f plateau %.1f; ", off.row, off.col, map.argmin.row,
                  map.argmin.col, map.min_value, plateau);
  }
  detail.resize(detail.size() - 2);
  return {ok, detail};
}

Outcome area_scan_convergence() {
  // 20 x 32 cells of 2 x 2 superpixels; areas centered on a cell corner.
  ExperimentConfig cfg;
  cfg.channel = {0.6, 0.6};
  cfg.modes.temporal_modes = 5000;
  cfg.modes.coherence_cell_px = 2;
  cfg.modes.grid = {20, 32};
  cfg.pulse.mean_mu = 0.1;
  cfg.geometry = FrameGeometry::symmetric(42, 66, {1, 1});
  cfg.master_seed = 606;
  const std::vector<GridSize> sizes = {{1, 1}, {1, 2},   {2, 2},   {4, 4},   {8, 8},   {8, 12},
                                       {12, 20}, {16, 24}, {20, 32}, {24, 40}, {32, 52}, {40, 64}};
  const Point center{21.0, 33.0};
  RegionSumAccumulator acc(centered_region_pairs(cfg.geometry, center, {0, 0}, sizes));
  for_each_frame(cfg, 40000, FrameKind::pdc_on, 1, [&](const Frame& f) { acc.add(f); });
  const auto points = area_scan_from_accumulator(acc, cfg.modes.coherence_cell_px);

  bool monotone = true;
  for (std::size_t k = 1; k < points.size(); ++k) {
    const Measured& a = points[k - 1].sigma_alpha;
    const Measured& b = points[k].sigma_alpha;
    if (b.value > a.value + 2 * std::hypot(a.u, b.u)) monotone = false;
  }
  const double asymptote = points.back().sigma_alpha.value;
  double worst = 0.0;
  for (const auto& p : points) {
    if (p.area_cells >= 150) worst = std::max(worst, std::abs(p.sigma_alpha.value / asymptote - 1));
  }
  const bool ok = monotone && worst < 0.02 && points.front().sigma_alpha.value > asymptote + 0.1;
  return {ok, fmt("sigma(0.25 cell) = %.3f, sigma(640 cells) = %.4f +- %.4f, max deviation >=150 cells %.2f%%%s",
                  points.front().sigma_alpha.value, asymptote, points.back().sigma_alpha.u, 100 * worst,
                  monotone ? "" : ", not monotone")};
}

Outcome partition_invariance() {
  struct Partition {
    int z;
    double u = 0.0;          // propagated, averaged over replications
    double sem2 = 0.0;       // mean squared batch-scatter SEM
    std::vector<double> pooled;  // batch values of sigma_alpha,B
  };
  std::vector<Partition> parts(3);
  parts[0].z = 8;
  parts[1].z = 4;
  parts[2].z = 16;
  const int replications = 30;
  for (int rep = 0; rep < replications; ++rep) {
    const RegionPairSeries s = reference_series(7000 + rep, 4000, 4000);
    for (auto& p : parts) {
      const RepeatResult r = repeat_experiment(split_batches(s, p.z));
      p.u += r.u_sigma_ab / replications;
      p.sem2 += r.sem_sigma_ab * r.sem_sigma_ab / replications;
      for (const auto& b : r.batches) p.pooled.push_back(b.sigma_ab);
    }
  }
  double u_min = 1e9, u_max = 0.0;
  for (const auto& p : parts) {
    u_min = std::min(u_min, p.u);
    u_max = std::max(u_max, p.u);
  }
  const double sd_250 = std::sqrt(variance(parts[2].pooled));
  const double sd_500 = std::sqrt(variance(parts[0].pooled));
  const double sd_1000 = std::sqrt(variance(parts[1].pooled));
  const bool ok = (u_max - u_min) / u_min < 0.2 && sd_250 > sd_500 && sd_500 > sd_1000;
  return {ok, fmt("u(sigma_ab) Z=8/4/16: %.5f %.5f %.5f; batch-scatter SEM rms %.5f %.5f %.5f; "
                  "population sd N=250/500/1000: %.4f %.4f %.4f",
                  parts[0].u, parts[1].u, parts[2].u, std::sqrt(parts[0].sem2), std::sqrt(parts[1].sem2),
                  std::sqrt(parts[2].sem2), sd_250, sd_500, sd_1000)};
}

Outcome bootstrap_agreement() {
  const RegionPairSeries s = reference_series(808, 500, 500);
  const TypeAUncertainty t = propagate_type_a(s);
  const testing::BootstrapSd b = testing::bootstrap(s, 1000, 809);
  const double ra = t.u_alpha_b / b.alpha_b - 1;
  const double rs = t.u_sigma_ab / b.sigma_ab - 1;
  const double re = t.u_eta_s / b.eta_s - 1;
  const bool ok = std::abs(ra) < 0.15 && std::abs(rs) < 0.15 && std::abs(re) < 0.15;
  return {ok, fmt("delta/bootstrap - 1: alpha_B %+.1f%%, sigma_ab %+.1f%%, eta_s %+.1f%%", 100 * ra,
                  100 * rs, 100 * re)};
}

Outcome classical_bound() {
  Engine rng = derive_stream(909, 1, 0);
  std::poisson_distribution<int> light(1000.0), stray(100.0);
  RegionPairSeries s;
  for (int k = 0; k < 2000; ++k) {
    s.n_s.push_back(light(rng));
    s.n_i.push_back(light(rng));
    s.m_s.push_back(stray(rng));
    s.m_i.push_back(stray(rng));
  }
  const Measured sa = delta_method(s, Statistic::sigma_alpha);
  const Measured sab = delta_method(s, Statistic::sigma_alpha_b);
  const bool ok = std::abs(sa.value - 1) < 3 * sa.u && std::abs(sab.value - 1) < 3 * sab.u;
  return {ok, fmt("sigma_alpha = %.4f +- %.4f, sigma_alpha,B = %.4f +- %.4f (expect 1)", sa.value, sa.u,
                  sab.value, sab.u)};
}

Outcome determinism_and_format() {
  testing::ScratchDir dir("acceptance");
  const RunConfig rc = table1_run_config();
  std::string reference;
  bool identical = true;
  for (unsigned workers : {1u, 2u, 4u}) {
    const auto frames = generate_stack(rc.experiment, 64, FrameKind::pdc_on, workers);
    const std::string path = dir.file("w" + std::to_string(workers) + ".tbfs");
    write_stack(path, frames, rc);
    const std::string bytes = testing::slurp(path);
    if (reference.empty()) reference = bytes;
    identical = identical && bytes == reference;
  }

  Engine rng = derive_stream(1010, 1, 0);
  std::uniform_int_distribution<int> side(1, 48), count(1, 40);
  std::uniform_int_distribution<std::uint32_t> value;
  int round_trips = 0;
  const RunConfig cfg;
  for (int trial = 0; trial < 100; ++trial) {
    const int rows = side(rng), cols = side(rng);
    std::vector<Frame> frames(count(rng), Frame(rows, cols));
    for (auto& f : frames) {
      f.kind = trial % 2 ? FrameKind::pdc_on : FrameKind::background;
      for (auto& c : f.counts) c = value(rng);
    }
    const std::string path = dir.file("r.tbfs");
    write_stack(path, frames, cfg);
    const StackFile back = read_stack(path);
    bool same = back.frames.size() == frames.size() && back.rows == rows && back.cols == cols &&
                back.kind == frames[0].kind && back.config == cfg;
    for (std::size_t k = 0; same && k < frames.size(); ++k) same = back.frames[k].counts == frames[k].counts;
    round_trips += same;
  }
  return {identical && round_trips == 100,
          fmt("stacks from 1/2/4 workers %s; %d/100 random stacks round-trip",
              identical ? "byte-identical" : "differ", round_trips)};
}

}  // namespace

int main() {
  const std::vector<std::pair<const char*, std::function<Outcome()>>> criteria = {
      {"balanced-loss identity", balanced_identity},
      {"moment laws", moment_laws},
      {"jitter excess noise", jitter_excess_noise},
      {"background-corrected closed loop", closed_loop},
      {"CS search", cs_search},
      {"area scan", area_scan_convergence},
      {"partition invariance", partition_invariance},
      {"delta method vs bootstrap", bootstrap_agreement},
      {"classical bound", classical_bound},
      {"determinism and format", determinism_and_format},
  };
  int failures = 0;
  int index = 0;
  for (const auto& [name, run] : criteria) {
    ++index;
    Outcome o;
    try {
      o = run();
    } catch (const std::exception& e) {
      o = {false, std::string("error: ") + e.what()};
    }
    failures += !o.passed;
    std::printf("criterion %2d %s  %s: %s\n", index, o.passed ? "PASS" : "FAIL", name, o.detail.c_str());
    std::fflush(stdout);
  }
  std::printf("%d of %zu criteria passed\n", index - failures, criteria.size());
  return failures == 0 ? 0 : 1;
}
