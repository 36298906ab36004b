#include "twinbeam/selftest.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>

#include "twinbeam/calibration.hpp"
#include "twinbeam/pipeline_io.hpp"

namespace twinbeam {

namespace {

std::string fmt(const char* pattern, double a, double b, double c = 0.0) {
  char buf[160];
  std::snprintf(buf, sizeof buf, pattern, a, b, c);
  return buf;
}

ExperimentConfig small_config() {
  ExperimentConfig cfg;
  cfg.channel = {0.6, 0.6};
  cfg.modes.temporal_modes = 5000;
  cfg.modes.grid = {5, 8};
  cfg.pulse.mean_mu = 0.1;
  cfg.geometry = FrameGeometry::symmetric(7, 10, {1, 1});
  cfg.master_seed = 424242;
  return cfg;
}

RegionPairSeries emission_series(const ExperimentConfig& cfg, std::size_t n) {
  const Region s = cfg.emission_region();
  const Region i = cfg.geometry.conjugate_region(s);
  const auto frames = generate_stack(cfg, n, FrameKind::pdc_on);
  return extract_series(frames, {}, s, i);
}

SelftestCheck predictor_identities() {
  SelftestCheck c{"predictor identities", true, ""};
  for (int k = 1; k <= 10; ++k) {
    const double eta = 0.1 * k;
    const ChannelEfficiencies ch{eta, eta};
    if (predict_sigma(ch, 0.1, 5000) != 1.0 - eta) c.passed = false;
  }
  const ChannelEfficiencies ch{0.7, 0.5};
  if (predict_sigma_with_jitter(ch, 0.1, 0.0, 5000) != predict_sigma(ch, 0.1, 5000)) c.passed = false;
  c.detail = fmt("sigma(0.7,0.5,mu=0.1) = %.6f (expect 0.42)", predict_sigma(ch, 0.1, 5000), 0.0);
  if (std::abs(predict_sigma(ch, 0.1, 5000) - 0.42) > 1e-12) c.passed = false;
  return c;
}

SelftestCheck cell_moments() {
  Engine rng = derive_stream(7, 1, 0);
  const int n = 20000;
  const ChannelEfficiencies ch{0.6, 0.6};
  std::vector<double> s(n), i(n);
  for (int k = 0; k < n; ++k) {
    const CellPair p = sample_cell_pair(0.1, 5000, ch, rng);
    s[k] = static_cast<double>(p.signal);
    i[k] = static_cast<double>(p.idler);
  }
  const double m = mean(s);
  const double v = variance(s);
  const double cv = covariance(s, i);
  const double se_m = std::sqrt(v / n);
  // Normal-theory standard error of a sample covariance.
  const double se_cv = std::sqrt((v * variance(i) + cv * cv) / n);
  const bool ok = std::abs(m - 300.0) < 3 * se_m && std::abs(cv - 198.0) < 3 * se_cv;
  return {"cell pair moments", ok, fmt("mean %.2f (300), cov %.2f (198)", m, cv)};
}

SelftestCheck balanced_sigma() {
  const RegionPairSeries series = emission_series(small_config(), 800);
  const Measured sa = delta_method(series, Statistic::sigma_alpha);
  const bool ok = std::abs(sa.value - 0.4) < 3 * sa.u;
  return {"balanced sigma_alpha", ok, fmt("sigma_alpha %.4f +- %.4f (0.4)", sa.value, sa.u)};
}

SelftestCheck classical_bound() {
  Engine rng = derive_stream(11, 2, 0);
  std::poisson_distribution<int> draw(1000.0);
  RegionPairSeries series;
  for (int k = 0; k < 2000; ++k) {
    series.n_s.push_back(draw(rng));
    series.n_i.push_back(draw(rng));
  }
  const Measured sa = delta_method(series, Statistic::sigma_alpha);
  const bool ok = std::abs(sa.value - 1.0) < 3 * sa.u;
  return {"classical bound", ok, fmt("sigma_alpha %.4f +- %.4f (1)", sa.value, sa.u)};
}

SelftestCheck cs_search() {
  ExperimentConfig cfg = small_config();
  cfg.modes.grid = {8, 8};
  cfg.geometry = FrameGeometry::symmetric(16, 20, {4, 4});
  cfg.cs_offset = {2.0, -1.0};
  const auto frames = generate_stack(cfg, 10, FrameKind::pdc_on);
  const SigmaSpatialMap map =
      sigma_spatial_map(frames, cfg.geometry, cfg.emission_region(), {3, 3});
  const bool ok = map.argmin == Pixel{2, -1} && map.min_value < 0.5 * map.plateau(3);
  return {"cs search", ok,
          fmt("argmin (%g,%g), dip/plateau %.3f", map.argmin.row, map.argmin.col,
              map.min_value / map.plateau(3))};
}

SelftestCheck closed_loop() {
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  e.channel = {0.613, 0.613 / 0.99416};
  e.modes.areas_per_cell = 16;
  e.modes.grid = {5, 8};
  e.pulse.mean_mu = 0.127426;
  e.pulse.relative_energy_jitter = 0.1;
  e.background.straylight_mean = 318.775;
  e.background.straylight_tracks_pulse = true;
  e.background.read_noise_std = 4.0;
  e.background.binning = 24;
  e.background.readout = Readout::per_superpixel;
  e.geometry = FrameGeometry::symmetric(9, 12, {2, 2});
  e.master_seed = 99;
  cfg.analysis.signal_region = e.emission_region();
  cfg.analysis.search_cs = false;
  cfg.analysis.z = 4;
  cfg.analysis.n = 250;
  cfg.analysis.m = 250;
  auto pdc = generate_stack(e, cfg.analysis.pdc_frames(), FrameKind::pdc_on);
  auto bg = generate_stack(e, cfg.analysis.background_frames(), FrameKind::background);
  const CalibrationResult r = calibrate(cfg, std::move(pdc), std::move(bg));
  const bool ok = std::abs(r.eta_s - 0.613) < 3 * r.u_eta_s &&
                  std::abs(r.eta_i - r.alpha_b * r.eta_s) < 1e-12;
  return {"background-corrected closed loop", ok,
          fmt("eta_s %.4f +- %.4f (0.613)", r.eta_s, r.u_eta_s)};
}

SelftestCheck determinism() {
  const ExperimentConfig cfg = small_config();
  const auto a = generate_stack(cfg, 48, FrameKind::pdc_on, 1);
  const auto b = generate_stack(cfg, 48, FrameKind::pdc_on, 4);
  bool ok = true;
  for (std::size_t k = 0; k < a.size(); ++k) ok = ok && a[k].counts == b[k].counts;
  return {"worker-count determinism", ok, "48 frames, 1 vs 4 workers"};
}

SelftestCheck stack_round_trip() {
  namespace fs = std::filesystem;
  RunConfig cfg;
  cfg.experiment = small_config();
  const auto frames = generate_stack(cfg.experiment, 10, FrameKind::pdc_on);
  const fs::path dir = fs::temp_directory_path() /
                       ("twinbeam-selftest-" +
                        std::to_string(std::chrono::steady_clock::now().time_since_epoch().count()));
  fs::create_directories(dir);
  const std::string path = (dir / "pdc.tbfs").string();
  bool ok = true;
  try {
    write_stack(path, frames, cfg);
    const StackFile back = read_stack(path);
    ok = back.frames.size() == frames.size() && back.config == cfg;
    for (std::size_t k = 0; ok && k < frames.size(); ++k) ok = back.frames[k].counts == frames[k].counts;
  } catch (const Error&) {
    ok = false;
  }
  std::error_code ec;
  fs::remove_all(dir, ec);
  return {"stack round trip", ok, "10 frames"};
}

SelftestCheck cosmic_round_trip() {
  const ExperimentConfig cfg = small_config();
  auto frames = generate_stack(cfg, 200, FrameKind::pdc_on);
  Engine rng = derive_stream(3, 3, 0);
  const std::vector<std::size_t> hit = {5, 17, 60, 123, 199};
  for (std::size_t k : hit) frames[k] = inject_cosmic_ray(std::move(frames[k]), rng);
  const CosmicFilterResult f = cosmic_ray_filter(std::move(frames));
  return {"cosmic-ray round trip", f.discarded == hit,
          std::to_string(f.discarded.size()) + " of 5 injected frames discarded"};
}

}  // namespace

std::vector<SelftestCheck> run_selftest(const std::function<void(const SelftestCheck&)>& on_result) {
  using Check = SelftestCheck (*)();
  static constexpr std::pair<const char*, Check> kChecks[] = {
      {"predictor identities", predictor_identities},
      {"cell pair moments", cell_moments},
      {"balanced sigma_alpha", balanced_sigma},
      {"classical bound", classical_bound},
      {"cs search", cs_search},
      {"background-corrected closed loop", closed_loop},
      {"worker-count determinism", determinism},
      {"stack round trip", stack_round_trip},
      {"cosmic-ray round trip", cosmic_round_trip}};
  std::vector<SelftestCheck> out;
  for (const auto& [name, check] : kChecks) {
    SelftestCheck c;
    try {
      c = check();
    } catch (const std::exception& e) {
      c.passed = false;
      c.detail = std::string("error: ") + e.what();
    }
    c.name = name;
    if (on_result) on_result(c);
    out.push_back(std::move(c));
  }
  return out;
}

}  // namespace twinbeam
