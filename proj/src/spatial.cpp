#include "twinbeam/spatial.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

namespace twinbeam {

namespace {

double median_in_place(std::vector<double>& v) {
  const std::size_t n = v.size();
  const auto mid = v.begin() + static_cast<std::ptrdiff_t>(n / 2);
  std::nth_element(v.begin(), mid, v.end());
  const double upper = *mid;
  if (n % 2 == 1) return upper;
  const double lower = *std::max_element(v.begin(), mid);
  return 0.5 * (lower + upper);
}

// One frame's pair-ensemble noise reduction factor.
double frame_spatial_sigma(const Frame& f, const Region& s, const Region& i,
                           VarianceConvention conv) {
  const int h = s.extent.rows;
  const int w = s.extent.cols;
  const double n = static_cast<double>(h) * w;
  double sum_d = 0.0, sum_d2 = 0.0, sum_t = 0.0;
  for (int r = 0; r < h; ++r) {
    for (int c = 0; c < w; ++c) {
      const double ns = f.at(s.origin.row + r, s.origin.col + c);
      const double ni = f.at(i.origin.row + h - 1 - r, i.origin.col + w - 1 - c);
      sum_d += ns - ni;
      sum_d2 += (ns - ni) * (ns - ni);
      sum_t += ns + ni;
    }
  }
  require(sum_t > 0.0, ErrorCode::degenerate,
          "frame " + std::to_string(f.pulse_index) + " has no counts in the search regions");
  const double ss = sum_d2 - sum_d * sum_d / n;
  const double var = ss / (conv == VarianceConvention::unbiased ? n - 1.0 : n);
  return var / (sum_t / n);
}

}  // namespace

double SigmaSpatialMap::at(Pixel shift) const {
  require(std::abs(shift.row) <= extent.row && std::abs(shift.col) <= extent.col,
          ErrorCode::invalid_argument, "shift outside the search grid");
  return values[static_cast<std::size_t>(shift.row + extent.row) * map_cols() +
                static_cast<std::size_t>(shift.col + extent.col)];
}

double SigmaSpatialMap::plateau(int min_distance) const {
  std::vector<double> far;
  for (int r = -extent.row; r <= extent.row; ++r) {
    for (int c = -extent.col; c <= extent.col; ++c) {
      if (std::max(std::abs(r - argmin.row), std::abs(c - argmin.col)) >= min_distance) {
        far.push_back(at({r, c}));
      }
    }
  }
  require(!far.empty(), ErrorCode::invalid_argument,
          "search grid has no cells at distance " + std::to_string(min_distance));
  return median_in_place(far);
}

SigmaSpatialMap sigma_spatial_map(std::span<const Frame> frames, const FrameGeometry& geometry,
                                  const Region& signal, Pixel extent, VarianceConvention conv) {
  require(!frames.empty(), ErrorCode::invalid_argument, "CS search needs at least one frame");
  require(extent.row >= 0 && extent.col >= 0, ErrorCode::invalid_argument,
          "search extent must be non-negative");
  require(signal.area() >= 2, ErrorCode::invalid_argument,
          "CS search region needs at least 2 superpixels");
  require(geometry.in_signal_half(signal), ErrorCode::geometry,
          "CS search region lies outside the signal half");
  for (const Frame& f : frames) {
    require(f.rows == geometry.rows && f.cols == geometry.cols, ErrorCode::geometry,
            "frame dimensions do not match the geometry");
  }

  SigmaSpatialMap map;
  map.extent = extent;
  map.values.reserve(static_cast<std::size_t>(map.map_rows()) * map.map_cols());
  for (int dr = -extent.row; dr <= extent.row; ++dr) {
    for (int dc = -extent.col; dc <= extent.col; ++dc) {
      const Region idler = geometry.conjugate_region(signal, {dr, dc});
      require(geometry.in_idler_half(idler), ErrorCode::geometry,
              "candidate idler region for shift (" + std::to_string(dr) + "," +
                  std::to_string(dc) + ") leaves the idler half");
      double acc = 0.0;
      for (const Frame& f : frames) acc += frame_spatial_sigma(f, signal, idler, conv);
      map.values.push_back(acc / static_cast<double>(frames.size()));
    }
  }

  std::size_t best = 0;
  for (std::size_t k = 1; k < map.values.size(); ++k) {
    if (map.values[k] < map.values[best]) best = k;
  }
  map.min_value = map.values[best];
  map.ties = static_cast<int>(std::count(map.values.begin(), map.values.end(), map.min_value)) - 1;
  map.argmin = {static_cast<int>(best / map.map_cols()) - extent.row,
                static_cast<int>(best % map.map_cols()) - extent.col};

  const double nan = std::numeric_limits<double>::quiet_NaN();
  const Pixel a = map.argmin;
  map.curvature_row = std::abs(a.row) < extent.row
                          ? map.at({a.row - 1, a.col}) + map.at({a.row + 1, a.col}) - 2.0 * map.min_value
                          : nan;
  map.curvature_col = std::abs(a.col) < extent.col
                          ? map.at({a.row, a.col - 1}) + map.at({a.row, a.col + 1}) - 2.0 * map.min_value
                          : nan;
  return map;
}

std::vector<RegionPair> centered_region_pairs(const FrameGeometry& geometry, Point center,
                                              Pixel shift, std::span<const GridSize> sizes) {
  require(!sizes.empty(), ErrorCode::invalid_argument, "area list is empty");
  std::vector<RegionPair> out;
  long long previous = 0;
  for (const GridSize& g : sizes) {
    require(g.rows >= 1 && g.cols >= 1, ErrorCode::invalid_argument, "area sizes must be >= 1");
    require(g.area() >= previous, ErrorCode::invalid_argument,
            "area list must be sorted by increasing area");
    previous = g.area();
    Region s;
    s.origin = {static_cast<int>(std::floor(center.row - 0.5 * g.rows + 0.5)),
                static_cast<int>(std::floor(center.col - 0.5 * g.cols + 0.5))};
    s.extent = g;
    s.side = Side::signal;
    require(geometry.in_signal_half(s), ErrorCode::geometry,
            "area " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                " leaves the signal half");
    const Region i = geometry.conjugate_region(s, shift);
    require(geometry.in_idler_half(i), ErrorCode::geometry,
            "conjugate of area " + std::to_string(g.rows) + "x" + std::to_string(g.cols) +
                " leaves the idler half");
    out.push_back({s, i});
  }
  return out;
}

RegionSumAccumulator::RegionSumAccumulator(std::vector<RegionPair> pairs)
    : pairs_(std::move(pairs)), series_(pairs_.size()) {}

void RegionSumAccumulator::add(const Frame& frame) {
  const bool pdc = frame.kind == FrameKind::pdc_on;
  for (std::size_t k = 0; k < pairs_.size(); ++k) {
    const double s = region_sum(frame, pairs_[k].signal);
    const double i = region_sum(frame, pairs_[k].idler);
    RegionPairSeries& out = series_[k];
    (pdc ? out.n_s : out.m_s).push_back(s);
    (pdc ? out.n_i : out.m_i).push_back(i);
  }
}

std::vector<AreaScanPoint> area_scan_from_accumulator(const RegionSumAccumulator& acc,
                                                      int coherence_cell_px,
                                                      VarianceConvention conv) {
  require(coherence_cell_px >= 1, ErrorCode::invalid_argument, "coherence cell size must be >= 1");
  const double cell_area = static_cast<double>(coherence_cell_px) * coherence_cell_px;
  std::vector<AreaScanPoint> out;
  for (std::size_t k = 0; k < acc.pairs().size(); ++k) {
    const RegionPairSeries& series = acc.series()[k];
    AreaScanPoint p;
    p.regions = acc.pairs()[k];
    p.area_superpixels = p.regions.signal.area();
    p.area_cells = static_cast<double>(p.area_superpixels) / cell_area;
    p.sigma_alpha = delta_method(series, Statistic::sigma_alpha, conv);
    if (series.has_background()) p.sigma_alpha_b = delta_method(series, Statistic::sigma_alpha_b, conv);
    out.push_back(p);
  }
  return out;
}

std::vector<AreaScanPoint> area_scan(std::span<const Frame> pdc, std::span<const Frame> background,
                                     const FrameGeometry& geometry, Point center, Pixel shift,
                                     std::span<const GridSize> sizes, int coherence_cell_px,
                                     VarianceConvention conv) {
  RegionSumAccumulator acc(centered_region_pairs(geometry, center, shift, sizes));
  for (const Frame& f : pdc) {
    require(f.kind == FrameKind::pdc_on, ErrorCode::invalid_argument,
            "area scan expects PDC frames in the first stack");
    acc.add(f);
  }
  for (const Frame& f : background) {
    require(f.kind == FrameKind::background, ErrorCode::invalid_argument,
            "area scan expects background frames in the second stack");
    acc.add(f);
  }
  return area_scan_from_accumulator(acc, coherence_cell_px, conv);
}

CosmicFilterResult cosmic_ray_filter(std::vector<Frame> frames, double k) {
  require(frames.size() >= 3, ErrorCode::invalid_argument, "cosmic-ray filter needs >= 3 frames");
  require(std::isfinite(k) && k > 0.0, ErrorCode::invalid_argument, "filter threshold k must be > 0");
  const int rows = frames.front().rows;
  const int cols = frames.front().cols;
  for (const Frame& f : frames) {
    require(f.rows == rows && f.cols == cols, ErrorCode::invalid_argument,
            "frames in a stack must share dimensions");
  }

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<double> threshold(pixels);
  std::vector<double> column(frames.size());
  for (std::size_t p = 0; p < pixels; ++p) {
    for (std::size_t j = 0; j < frames.size(); ++j) column[j] = frames[j].counts[p];
    const double med = median_in_place(column);
    for (double& v : column) v = std::abs(v - med);
    const double mad = median_in_place(column);
    threshold[p] = med + k * std::max(mad, 1.0);
  }

  CosmicFilterResult out;
  for (std::size_t j = 0; j < frames.size(); ++j) {
    bool hit = false;
    for (std::size_t p = 0; p < pixels && !hit; ++p) hit = frames[j].counts[p] > threshold[p];
    if (hit) {
      out.discarded.push_back(j);
    } else {
      out.kept.push_back(std::move(frames[j]));
    }
  }
  return out;
}

}  // namespace twinbeam
