#include "twinbeam/calibration.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace twinbeam {

namespace {

std::vector<Frame> drop_cosmics(std::vector<Frame> frames, double k, std::size_t& discarded) {
  discarded = 0;
  if (frames.size() < 3) return frames;
  CosmicFilterResult f = cosmic_ray_filter(std::move(frames), k);
  discarded = f.discarded.size();
  return std::move(f.kept);
}

void require_kind(std::span<const Frame> frames, FrameKind kind, const char* what) {
  for (const Frame& f : frames) {
    require(f.kind == kind, ErrorCode::invalid_argument,
            std::string(what) + " stack holds " + to_string(f.kind) + " frames");
  }
}

}  // namespace

CsSearchResult find_cs(const RunConfig& cfg, std::span<const Frame> pdc) {
  const AnalysisConfig& a = cfg.analysis;
  const FrameGeometry& g = cfg.experiment.geometry;
  CsSearchResult out;
  out.signal = a.signal_region;
  out.signal.side = Side::signal;
  if (a.search_cs) {
    require(!pdc.empty(), ErrorCode::invalid_argument, "CS search needs PDC frames");
    require_kind(pdc, FrameKind::pdc_on, "PDC");
    out.frames_used = std::min<std::size_t>(static_cast<std::size_t>(a.cs_search_frames), pdc.size());
    out.map = sigma_spatial_map(pdc.first(out.frames_used), g, out.signal, a.search_extent,
                                a.variance);
    out.shift = out.map.argmin;
    out.searched = true;
  } else {
    out.shift = a.cs_shift;
  }
  out.idler = g.conjugate_region(out.signal, out.shift);
  require(g.in_idler_half(out.idler), ErrorCode::geometry,
          "idler region at the chosen CS shift leaves the idler half");
  return out;
}

std::vector<GridSize> scan_sizes(const AnalysisConfig& a) {
  if (!a.areas.empty()) return a.areas;
  std::vector<GridSize> out;
  const GridSize full = a.signal_region.extent;
  for (int k = 1; k <= 8; ++k) {
    const GridSize g{std::max(1, static_cast<int>(std::lround(full.rows * k / 8.0))),
                     std::max(1, static_cast<int>(std::lround(full.cols * k / 8.0)))};
    if (out.empty() || !(out.back() == g)) out.push_back(g);
  }
  return out;
}

Point scan_center(const AnalysisConfig& a) {
  if (a.area_center) return *a.area_center;
  const Region& r = a.signal_region;
  return {r.origin.row + 0.5 * r.extent.rows, r.origin.col + 0.5 * r.extent.cols};
}

AreaScanResult run_area_scan(const RunConfig& cfg, std::span<const Frame> pdc,
                             std::span<const Frame> background) {
  cfg.validate();
  AreaScanResult out;
  out.shift = find_cs(cfg, pdc).shift;
  const std::vector<GridSize> sizes = scan_sizes(cfg.analysis);
  out.points = area_scan(pdc, background, cfg.experiment.geometry, scan_center(cfg.analysis),
                         out.shift, sizes, cfg.experiment.modes.coherence_cell_px,
                         cfg.analysis.variance);
  return out;
}

CalibrationResult calibrate(const RunConfig& cfg, std::vector<Frame> pdc,
                            std::vector<Frame> background) {
  cfg.validate();
  const AnalysisConfig& a = cfg.analysis;
  require(!background.empty(), ErrorCode::invalid_argument,
          "calibration needs background frames");
  require_kind(pdc, FrameKind::pdc_on, "PDC");
  require_kind(background, FrameKind::background, "background");
  CalibrationResult r;
  pdc = drop_cosmics(std::move(pdc), a.cosmic_k, r.discarded_pdc);
  background = drop_cosmics(std::move(background), a.cosmic_k, r.discarded_background);

  const CsSearchResult cs = find_cs(cfg, pdc);
  r.cs_shift = cs.shift;
  r.signal = cs.signal;
  r.idler = cs.idler;
  if (cs.searched) r.cs_map = cs.map;

  const RegionPairSeries series = extract_series(pdc, background, cs.signal, cs.idler);
  series.validate();
  r.excess_noise = excess_noise(series, std::nullopt, a.variance).sum_ratio;
  r.alpha = estimate_alpha(series);
  r.sigma_alpha = estimate_sigma_alpha(series, r.alpha, a.variance).value;
  r.background_exceeds_signal = estimate_alpha_b(series).background_exceeds_signal;

  r.batch_series = split_batches(series, a.z);
  r.repeats = repeat_experiment(r.batch_series, a.variance);
  r.z_repeats = a.z;
  r.n_per_batch = r.batch_series.front().frames();
  r.m_per_batch = r.batch_series.front().background_frames();

  const RepeatResult& rep = r.repeats;
  r.alpha_b = rep.alpha_b;
  r.sigma_ab = rep.sigma_ab;
  r.eta_s = rep.eta_s;
  r.eta_i = rep.eta_i;
  r.u_alpha_b = rep.u_alpha_b;
  r.u_sigma_ab = rep.u_sigma_ab;
  r.u_eta_s = rep.u_eta_s;
  r.sem_alpha_b = rep.sem_alpha_b;
  r.sem_sigma_ab = rep.sem_sigma_ab;
  r.sem_eta_s = rep.sem_eta_s;
  r.type_b_cs = kTypeBCsBiasRelative * std::abs(r.eta_s);
  r.u_combined = std::sqrt(r.u_eta_s * r.u_eta_s + r.type_b_balancing * r.type_b_balancing +
                           r.type_b_cs * r.type_b_cs);
  r.sigma_negative = r.sigma_ab < 0.0;
  r.eta_out_of_range = eta_from_sigma(r.alpha_b, r.sigma_ab).out_of_range;

  const CorrectedEfficiency ds = correct_for_transmittance(r.eta_s, a.transmittance);
  const CorrectedEfficiency di = correct_for_transmittance(r.eta_i, a.transmittance);
  r.eta_s_detector = ds.value;
  r.eta_i_detector = di.value;
  r.detector_out_of_range = ds.out_of_range || di.out_of_range;
  return r;
}

Table1Row table1_reference() {
  Table1Row row;
  row.entries = {{{262710, 620}, {35982, 437}, {12751, 158}, {1318, 30}, {0.99952, 0.00003},
                  {0.99416, 0.00004}, {0.454, 0.010}, {0.449, 0.010}, {0.384, 0.011}}};
  return row;
}

RunConfig table1_run_config() {
  RunConfig cfg;
  ExperimentConfig& e = cfg.experiment;
  e.channel = {0.613, 0.613 / 0.99416};
  e.modes.temporal_modes = 5000;
  e.modes.areas_per_cell = 16;
  e.modes.coherence_cell_px = 1;
  e.modes.grid = {7, 10};
  e.pulse.mean_mu = 0.127426;
  e.pulse.relative_energy_jitter = 0.137;
  e.pulse.gain_map = GainMap::linear;
  e.background.straylight_mean = 318.775;
  e.background.straylight_idler_scale = 0.8948;
  e.background.straylight_tracks_pulse = true;
  e.background.read_noise_std = 4.0;
  e.background.binning = 24;
  e.background.readout = Readout::per_superpixel;
  e.geometry = FrameGeometry::symmetric(9, 12, {1, 1});
  e.master_seed = 20100101;

  AnalysisConfig& a = cfg.analysis;
  a.signal_region = Region{{2, 2}, {5, 8}, Side::signal};
  a.search_cs = true;
  a.search_extent = {2, 2};
  a.z = 8;
  a.n = 500;
  a.m = 500;
  return cfg;
}

Table1Row table1_row(const std::vector<RegionPairSeries>& batches, VarianceConvention conv) {
  require(!batches.empty(), ErrorCode::invalid_argument, "no batches");
  static constexpr Statistic kStats[9] = {
      Statistic::mean_signal, Statistic::sd_signal, Statistic::mean_background_signal,
      Statistic::sd_background_signal, Statistic::alpha, Statistic::alpha_b,
      Statistic::raw_sigma, Statistic::sigma_alpha, Statistic::sigma_alpha_b};
  Table1Row row;
  const double z = static_cast<double>(batches.size());
  for (std::size_t c = 0; c < 9; ++c) {
    double sum = 0.0, var = 0.0;
    for (const RegionPairSeries& b : batches) {
      const Measured m = delta_method(b, kStats[c], conv);
      sum += m.value;
      var += m.u * m.u;
    }
    row.entries[c] = {sum / z, std::sqrt(var) / z};
  }
  return row;
}

Table1Report reproduce_table1(const RunConfig& cfg) {
  cfg.validate();
  const unsigned workers = cfg.analysis.resolved_workers();
  std::vector<Frame> pdc = generate_stack(cfg.experiment, cfg.analysis.pdc_frames(),
                                          FrameKind::pdc_on, workers);
  std::vector<Frame> bg = generate_stack(cfg.experiment, cfg.analysis.background_frames(),
                                         FrameKind::background, workers);
  Table1Report report;
  report.reference = table1_reference();
  report.calibration = calibrate(cfg, std::move(pdc), std::move(bg));
  report.simulated = table1_row(report.calibration.batch_series, cfg.analysis.variance);
  return report;
}

}  // namespace twinbeam
