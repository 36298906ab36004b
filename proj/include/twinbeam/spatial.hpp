#pragma once

// Spatial analyses: center-of-symmetry search, detection-area scan and
// cosmic-ray rejection.

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

#include "twinbeam/core_model.hpp"
#include "twinbeam/estimation.hpp"
#include "twinbeam/simulator.hpp"
#include "twinbeam/uncertainty.hpp"

namespace twinbeam {

/// sigma_spatial over a rectangular grid of idler shifts xi in
/// [-extent.row, extent.row] x [-extent.col, extent.col], row-major.
struct SigmaSpatialMap {
  Pixel extent;
  std::vector<double> values;
  Pixel argmin;          // shift with the smallest value (first in row-major order)
  double min_value = 0.0;
  int ties = 0;          // other cells equal to the minimum
  // Second differences at the argmin; NaN at the border of the grid.
  double curvature_row = 0.0;
  double curvature_col = 0.0;

  int map_rows() const noexcept { return 2 * extent.row + 1; }
  int map_cols() const noexcept { return 2 * extent.col + 1; }
  double at(Pixel shift) const;
  /// Median of the cells at Chebyshev distance >= min_distance from the argmin.
  double plateau(int min_distance = 3) const;
};

/// Per frame, the pair ensemble of conjugate superpixels inside the signal
/// region and the shifted idler region gives
///   Var_pairs(n_s - n_i) / Mean_pairs(n_s + n_i);
/// the map holds its average over frames. Superpixel (r0+i, c0+j) pairs with
/// idler superpixel (R0+h-1-i, C0+w-1-j).
SigmaSpatialMap sigma_spatial_map(std::span<const Frame> frames, const FrameGeometry& geometry,
                                  const Region& signal, Pixel extent,
                                  VarianceConvention conv = VarianceConvention::unbiased);

struct RegionPair {
  Region signal;
  Region idler;
};

/// Signal regions of the given sizes centered on `center` (signal-half
/// coordinates) with their conjugates displaced by `shift`. Sizes must be
/// sorted by area.
std::vector<RegionPair> centered_region_pairs(const FrameGeometry& geometry, Point center,
                                              Pixel shift, std::span<const GridSize> sizes);

/// Collects region sums frame by frame, so long stacks need not be held in memory.
class RegionSumAccumulator {
 public:
  explicit RegionSumAccumulator(std::vector<RegionPair> pairs);

  void add(const Frame& frame);

  const std::vector<RegionPair>& pairs() const noexcept { return pairs_; }
  const std::vector<RegionPairSeries>& series() const noexcept { return series_; }

 private:
  std::vector<RegionPair> pairs_;
  std::vector<RegionPairSeries> series_;
};

struct AreaScanPoint {
  RegionPair regions;
  long long area_superpixels = 0;
  double area_cells = 0.0;  // in coherence cells
  Measured sigma_alpha;
  std::optional<Measured> sigma_alpha_b;  // needs background frames
};

std::vector<AreaScanPoint> area_scan_from_accumulator(
    const RegionSumAccumulator& acc, int coherence_cell_px,
    VarianceConvention conv = VarianceConvention::unbiased);

/// sigma_alpha (and sigma_alpha,B when `background` is non-empty) per area.
std::vector<AreaScanPoint> area_scan(std::span<const Frame> pdc, std::span<const Frame> background,
                                     const FrameGeometry& geometry, Point center, Pixel shift,
                                     std::span<const GridSize> sizes, int coherence_cell_px,
                                     VarianceConvention conv = VarianceConvention::unbiased);

struct CosmicFilterResult {
  std::vector<Frame> kept;
  std::vector<std::size_t> discarded;  // indices into the input stack
};

/// Drops every frame holding a superpixel above median + k * max(MAD, 1),
/// with median and MAD taken per superpixel across the stack. Needs >= 3 frames.
CosmicFilterResult cosmic_ray_filter(std::vector<Frame> frames, double k = 10.0);

}  // namespace twinbeam
