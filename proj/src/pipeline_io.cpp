#include "twinbeam/pipeline_io.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <limits>
#include <sstream>

#include <json.hpp>

namespace twinbeam {

namespace {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

constexpr char kMagic[4] = {'T', 'B', 'F', 'S'};
constexpr std::uint32_t kMaxSide = 65536;

template <class T>
void put_le(unsigned char* dst, T v) {
  for (std::size_t b = 0; b < sizeof(T); ++b) dst[b] = static_cast<unsigned char>(v >> (8 * b));
}

template <class T>
T get_le(const unsigned char* src) {
  T v = 0;
  for (std::size_t b = 0; b < sizeof(T); ++b) v |= static_cast<T>(src[b]) << (8 * b);
  return v;
}

std::ofstream open_output(const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  require(static_cast<bool>(out), ErrorCode::io, "cannot open " + path + " for writing");
  return out;
}

void close_output(std::ofstream& out, const std::string& path) {
  out.flush();
  require(static_cast<bool>(out), ErrorCode::io, "write failed for " + path);
}

std::string read_text(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Csv {
 public:
  explicit Csv(const std::string& path) : path_(path), out_(open_output(path)) {}

  Csv& cell(const std::string& text) {
    sep();
    out_ << text;
    return *this;
  }
  Csv& cell(double v) { return cell(format_number(v)); }
  Csv& cell(long long v) { return cell(std::to_string(v)); }
  Csv& cell(std::size_t v) { return cell(std::to_string(v)); }
  Csv& cell(int v) { return cell(std::to_string(v)); }
  Csv& cell(bool v) { return cell(std::string(v ? "true" : "false")); }
  Csv& row() {
    out_ << '\n';
    first_ = true;
    return *this;
  }
  template <class... Names>
  Csv& header(Names... names) {
    (cell(std::string(names)), ...);
    return row();
  }
  void close() { close_output(out_, path_); }

 private:
  void sep() {
    if (!first_) out_ << ',';
    first_ = false;
  }

  std::string path_;
  std::ofstream out_;
  bool first_ = true;
};

double plateau_or_nan(const SigmaSpatialMap& map) {
  const int d = std::min(3, std::max(map.extent.row, map.extent.col));
  if (d == 0) return std::numeric_limits<double>::quiet_NaN();
  return map.plateau(d);
}

}  // namespace

std::string sidecar_path(const std::string& stack_path) { return stack_path + ".json"; }

void write_stack(const std::string& path, std::span<const Frame> frames, const RunConfig& config) {
  require(!frames.empty(), ErrorCode::invalid_argument, "cannot write an empty stack");
  const Frame& first = frames.front();
  require(first.rows >= 1 && first.cols >= 1 && static_cast<std::uint32_t>(first.rows) <= kMaxSide &&
              static_cast<std::uint32_t>(first.cols) <= kMaxSide,
          ErrorCode::invalid_argument, "frame dimensions out of range");
  const std::size_t pixels = static_cast<std::size_t>(first.rows) * first.cols;
  for (const Frame& f : frames) {
    require(f.rows == first.rows && f.cols == first.cols && f.counts.size() == pixels,
            ErrorCode::invalid_argument, "frames in a stack must share dimensions");
    require(f.kind == first.kind, ErrorCode::invalid_argument, "frames in a stack must share kind");
  }
  const std::uint64_t digest = experiment_digest(config.experiment);

  unsigned char header[kStackHeaderBytes] = {};
  std::memcpy(header, kMagic, 4);
  put_le<std::uint16_t>(header + 4, kStackVersion);
  header[6] = static_cast<unsigned char>(first.kind);
  header[7] = 0;
  put_le<std::uint32_t>(header + 8, static_cast<std::uint32_t>(first.rows));
  put_le<std::uint32_t>(header + 12, static_cast<std::uint32_t>(first.cols));
  put_le<std::uint64_t>(header + 16, frames.size());
  put_le<std::uint64_t>(header + 24, digest);

  std::ofstream out = open_output(path);
  out.write(reinterpret_cast<const char*>(header), sizeof header);
  std::vector<unsigned char> buf(pixels * 4);
  for (const Frame& f : frames) {
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(buf.data(), f.counts.data(), buf.size());
    } else {
      for (std::size_t p = 0; p < pixels; ++p) put_le<std::uint32_t>(buf.data() + 4 * p, f.counts[p]);
    }
    out.write(reinterpret_cast<const char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
  }
  close_output(out, path);

  Json side;
  side["format"] = "TBFS";
  side["version"] = kStackVersion;
  side["kind"] = to_string(first.kind);
  side["rows"] = first.rows;
  side["cols"] = first.cols;
  side["frames"] = frames.size();
  side["digest"] = hex_digest(digest);
  side["config"] = Json::parse(to_json(config));
  const std::string side_path = sidecar_path(path);
  std::ofstream sout = open_output(side_path);
  sout << side.dump(2) << '\n';
  close_output(sout, side_path);
}

StackFile read_stack(const std::string& path) {
  std::error_code ec;
  const auto size = fs::file_size(path, ec);
  require(!ec, ErrorCode::io, "cannot stat " + path);
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorCode::io, "cannot open " + path);

  require(size >= kStackHeaderBytes, ErrorCode::corrupt_header, path + ": file is shorter than the header");
  unsigned char header[kStackHeaderBytes];
  in.read(reinterpret_cast<char*>(header), sizeof header);
  require(static_cast<bool>(in), ErrorCode::io, path + ": read failed");
  require(std::memcmp(header, kMagic, 4) == 0, ErrorCode::corrupt_header, path + ": bad magic");
  const auto version = get_le<std::uint16_t>(header + 4);
  require(version == kStackVersion, ErrorCode::corrupt_header,
          path + ": unsupported format version " + std::to_string(version));
  require(header[6] <= 1, ErrorCode::corrupt_header, path + ": unknown frame kind");
  require(header[7] == 0, ErrorCode::corrupt_header, path + ": reserved byte is not zero");
  const auto rows = get_le<std::uint32_t>(header + 8);
  const auto cols = get_le<std::uint32_t>(header + 12);
  const auto count = get_le<std::uint64_t>(header + 16);
  require(rows >= 1 && cols >= 1 && rows <= kMaxSide && cols <= kMaxSide, ErrorCode::corrupt_header,
          path + ": frame dimensions out of range");
  const std::uint64_t frame_bytes = 4ULL * rows * cols;
  require(count <= (std::numeric_limits<std::uint64_t>::max() - kStackHeaderBytes) / frame_bytes,
          ErrorCode::corrupt_header, path + ": frame count out of range");
  const std::uint64_t expected = kStackHeaderBytes + count * frame_bytes;
  require(size >= expected, ErrorCode::truncated_payload,
          path + ": payload holds " + std::to_string(size - kStackHeaderBytes) + " bytes, header announces " +
              std::to_string(expected - kStackHeaderBytes));
  require(size == expected, ErrorCode::corrupt_header, path + ": trailing bytes after the payload");

  StackFile out;
  out.kind = static_cast<FrameKind>(header[6]);
  out.rows = static_cast<int>(rows);
  out.cols = static_cast<int>(cols);
  out.digest = get_le<std::uint64_t>(header + 24);

  const std::string side_path = sidecar_path(path);
  Json side;
  try {
    side = Json::parse(read_text(side_path));
  } catch (const Json::exception& e) {
    fail(ErrorCode::digest_mismatch, side_path + ": unreadable sidecar: " + e.what());
  }
  try {
    const std::string recorded = side.at("digest").get<std::string>();
    require(recorded == hex_digest(out.digest), ErrorCode::digest_mismatch,
            side_path + ": digest " + recorded + " does not match stack digest " + hex_digest(out.digest));
    out.config = parse_run_config(side.at("config").dump());
  } catch (const Json::exception& e) {
    fail(ErrorCode::digest_mismatch, side_path + ": malformed sidecar: " + e.what());
  }
  require(experiment_digest(out.config.experiment) == out.digest, ErrorCode::digest_mismatch,
          side_path + ": sidecar config does not hash to the stack digest");

  const std::size_t pixels = static_cast<std::size_t>(rows) * cols;
  std::vector<Frame> frames;
  frames.reserve(count);
  std::vector<unsigned char> buf(pixels * 4);
  for (std::uint64_t k = 0; k < count; ++k) {
    in.read(reinterpret_cast<char*>(buf.data()), static_cast<std::streamsize>(buf.size()));
    require(static_cast<bool>(in), ErrorCode::truncated_payload, path + ": payload ended early");
    Frame f(out.rows, out.cols);
    if constexpr (std::endian::native == std::endian::little) {
      std::memcpy(f.counts.data(), buf.data(), buf.size());
    } else {
      for (std::size_t p = 0; p < pixels; ++p) f.counts[p] = get_le<std::uint32_t>(buf.data() + 4 * p);
    }
    f.pulse_index = k;
    f.pulse_energy = std::numeric_limits<double>::quiet_NaN();
    f.kind = out.kind;
    frames.push_back(std::move(f));
  }
  out.frames = std::move(frames);
  return out;
}

std::string format_number(double value) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.9g", value);
  return buf;
}

void write_calibration_summary(const std::string& path, const CalibrationResult& r) {
  Csv csv(path);
  csv.header("eta_s", "u_eta_s", "eta_i", "alpha_b", "u_alpha_b", "sigma_ab", "u_sigma_ab", "E",
             "discarded");
  csv.cell(r.eta_s).cell(r.u_eta_s).cell(r.eta_i).cell(r.alpha_b).cell(r.u_alpha_b);
  csv.cell(r.sigma_ab).cell(r.u_sigma_ab).cell(r.excess_noise).cell(r.discarded()).row();
  csv.close();
}

void write_calibration_detail(const std::string& path, const CalibrationResult& r) {
  Csv csv(path);
  csv.header("quantity", "value");
  const auto line = [&](const char* name, auto v) { csv.cell(std::string(name)).cell(v).row(); };
  line("eta_s", r.eta_s);
  line("eta_i", r.eta_i);
  line("alpha_b", r.alpha_b);
  line("sigma_ab", r.sigma_ab);
  line("u_eta_s", r.u_eta_s);
  line("u_alpha_b", r.u_alpha_b);
  line("u_sigma_ab", r.u_sigma_ab);
  line("sem_eta_s", r.sem_eta_s);
  line("sem_alpha_b", r.sem_alpha_b);
  line("sem_sigma_ab", r.sem_sigma_ab);
  line("type_b_balancing", r.type_b_balancing);
  line("type_b_cs", r.type_b_cs);
  line("u_combined", r.u_combined);
  line("eta_s_detector", r.eta_s_detector);
  line("eta_i_detector", r.eta_i_detector);
  line("z", r.z_repeats);
  line("n_per_batch", r.n_per_batch);
  line("m_per_batch", r.m_per_batch);
  line("excess_noise", r.excess_noise);
  line("alpha", r.alpha);
  line("sigma_alpha", r.sigma_alpha);
  line("discarded_pdc", r.discarded_pdc);
  line("discarded_background", r.discarded_background);
  line("cs_shift_row", r.cs_shift.row);
  line("cs_shift_col", r.cs_shift.col);
  line("signal_row", r.signal.origin.row);
  line("signal_col", r.signal.origin.col);
  line("idler_row", r.idler.origin.row);
  line("idler_col", r.idler.origin.col);
  line("region_rows", r.signal.extent.rows);
  line("region_cols", r.signal.extent.cols);
  line("sigma_negative", r.sigma_negative);
  line("eta_out_of_range", r.eta_out_of_range);
  line("detector_out_of_range", r.detector_out_of_range);
  line("background_exceeds_signal", r.background_exceeds_signal);
  csv.close();
}

void write_batches(const std::string& path, const RepeatResult& r) {
  Csv csv(path);
  csv.header("batch", "n", "m", "alpha_b", "u_alpha_b", "sigma_ab", "u_sigma_ab", "eta_s", "u_eta_s");
  for (std::size_t l = 0; l < r.batches.size(); ++l) {
    const BatchEstimate& b = r.batches[l];
    csv.cell(l + 1).cell(b.n).cell(b.m).cell(b.alpha_b).cell(b.u_alpha_b).cell(b.sigma_ab);
    csv.cell(b.u_sigma_ab).cell(b.eta_s).cell(b.u_eta_s).row();
  }
  csv.close();
}

void write_area_scan(const std::string& path, const std::vector<AreaScanPoint>& points) {
  Csv csv(path);
  csv.header("rows", "cols", "area_superpixels", "area_cells", "sigma_alpha", "u_sigma_alpha",
             "sigma_alpha_b", "u_sigma_alpha_b");
  for (const AreaScanPoint& p : points) {
    csv.cell(p.regions.signal.extent.rows).cell(p.regions.signal.extent.cols);
    csv.cell(p.area_superpixels).cell(p.area_cells).cell(p.sigma_alpha.value).cell(p.sigma_alpha.u);
    if (p.sigma_alpha_b) {
      csv.cell(p.sigma_alpha_b->value).cell(p.sigma_alpha_b->u);
    } else {
      csv.cell(std::string()).cell(std::string());
    }
    csv.row();
  }
  csv.close();
}

void write_cs_map(const std::string& path, const SigmaSpatialMap& map) {
  Csv csv(path);
  for (int r = 0; r < map.map_rows(); ++r) {
    for (int c = 0; c < map.map_cols(); ++c) {
      csv.cell(map.values[static_cast<std::size_t>(r) * map.map_cols() + c]);
    }
    csv.row();
  }
  csv.close();
}

void write_cs_search(const std::string& path, const CsSearchResult& cs) {
  Csv csv(path);
  csv.header("shift_row", "shift_col", "searched", "frames_used", "min_value", "plateau",
             "dip_ratio", "ties", "curvature_row", "curvature_col");
  const double nan = std::numeric_limits<double>::quiet_NaN();
  const double plateau = cs.searched ? plateau_or_nan(cs.map) : nan;
  csv.cell(cs.shift.row).cell(cs.shift.col).cell(cs.searched).cell(cs.frames_used);
  csv.cell(cs.searched ? cs.map.min_value : nan).cell(plateau);
  csv.cell(cs.searched ? cs.map.min_value / plateau : nan).cell(cs.searched ? cs.map.ties : 0);
  csv.cell(cs.searched ? cs.map.curvature_row : nan).cell(cs.searched ? cs.map.curvature_col : nan).row();
  csv.close();
}

void write_table1(const std::string& path, const Table1Report& report) {
  Csv csv(path);
  csv.cell(std::string("row"));
  for (const char* name : kTable1Columns) csv.cell(std::string(name));
  csv.row();
  const auto values = [&](const char* label, const Table1Row& row, bool u) {
    csv.cell(std::string(label));
    for (const TableEntry& e : row.entries) csv.cell(u ? e.u : e.value);
    csv.row();
  };
  values("reference", report.reference, false);
  values("reference_u", report.reference, true);
  values("simulated", report.simulated, false);
  values("simulated_u", report.simulated, true);
  csv.close();
}

void emit_tables(const std::string& dir, const CalibrationResult& r) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  require(!ec, ErrorCode::io, "cannot create output directory " + dir);
  const fs::path base(dir);
  write_calibration_summary((base / "calibration_summary.csv").string(), r);
  write_calibration_detail((base / "calibration_detail.csv").string(), r);
  write_batches((base / "batches.csv").string(), r.repeats);
  if (r.cs_map) write_cs_map((base / "cs_map.csv").string(), *r.cs_map);
}

}  // namespace twinbeam
