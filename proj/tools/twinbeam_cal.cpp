// twinbeam-cal: simulate twin-beam frame stacks and calibrate them.

#include <cmath>
#include <cstdarg>
#include <cstdio>
#include <filesystem>
#include <memory>
#include <optional>
#include <string>

#include <CLI11.hpp>

#include "twinbeam/twinbeam.h"

namespace {

constexpr const char* kPdcFile = "pdc.tbfs";
constexpr const char* kBackgroundFile = "background.tbfs";

bool g_quiet = false;

struct ConfigDeleter {
  void operator()(tb_config* c) const { tb_config_free(c); }
};
struct StackDeleter {
  void operator()(tb_stack* s) const { tb_stack_free(s); }
};
using ConfigPtr = std::unique_ptr<tb_config, ConfigDeleter>;
using StackPtr = std::unique_ptr<tb_stack, StackDeleter>;

// Carries a status out of a command.
struct Failure {
  tb_status status;
  std::string message;
};

void check(tb_status st) {
  if (st != TB_OK) throw Failure{st, tb_last_error()};
}

void info(const char* format, ...) __attribute__((format(printf, 1, 2)));
void info(const char* format, ...) {
  if (g_quiet) return;
  va_list args;
  va_start(args, format);
  std::vprintf(format, args);
  va_end(args);
  std::fputc('\n', stdout);
}

std::string path_in(const std::string& dir, const char* file) {
  return (std::filesystem::path(dir) / file).string();
}

std::string hex(uint64_t v) {
  char buf[17];
  std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(v));
  return buf;
}

ConfigPtr load_config(const std::string& path) {
  tb_config* c = nullptr;
  check(tb_config_load(path.c_str(), &c));
  return ConfigPtr(c);
}

StackPtr load_stack(const std::string& path) {
  tb_stack* s = nullptr;
  check(tb_stack_read(path.c_str(), &s));
  info("read %s: %llu frames of %dx%d, digest %s", path.c_str(),
       static_cast<unsigned long long>(tb_stack_count(s)), tb_stack_rows(s), tb_stack_cols(s),
       hex(tb_stack_digest(s)).c_str());
  return StackPtr(s);
}

// Analysis parameters come from --config when given, else from the sidecar.
ConfigPtr analysis_config(const std::string& config_path, const tb_stack* stack) {
  if (!config_path.empty()) {
    ConfigPtr cfg = load_config(config_path);
    uint64_t digest = 0;
    check(tb_config_digest(cfg.get(), &digest));
    if (digest != tb_stack_digest(stack)) {
      info("note: config %s was not the one that generated the stack", config_path.c_str());
    }
    return cfg;
  }
  tb_config* c = nullptr;
  check(tb_stack_config(stack, &c));
  return ConfigPtr(c);
}

void write_config(const tb_config* cfg, const std::string& path) {
  size_t needed = 0;
  check(tb_config_to_json(cfg, nullptr, 0, &needed));
  std::string text(needed, '\0');
  check(tb_config_to_json(cfg, text.data(), text.size(), &needed));
  text.resize(needed - 1);
  std::FILE* f = std::fopen(path.c_str(), "wb");
  if (!f) throw Failure{TB_IO, "cannot open " + path + " for writing"};
  const bool ok = std::fwrite(text.data(), 1, text.size(), f) == text.size();
  if (std::fclose(f) != 0 || !ok) throw Failure{TB_IO, "write failed for " + path};
}

void print_calibration(const tb_calibration& r) {
  info("eta_s = %.6f +- %.6f (Type A), +- %.6f combined", r.eta_s, r.u_eta_s, r.u_combined);
  info("eta_i = %.6f, alpha_B = %.6f +- %.6f, sigma_alpha,B = %.6f +- %.6f", r.eta_i, r.alpha_b,
       r.u_alpha_b, r.sigma_ab, r.u_sigma_ab);
  info("Z = %d, CS shift (%d,%d), excess noise %.6g, discarded frames %llu", r.z_repeats,
       r.cs_shift_row, r.cs_shift_col, r.excess_noise, static_cast<unsigned long long>(r.discarded));
  if (r.flags & TB_FLAG_SIGMA_NEGATIVE) info("warning: sigma_alpha,B is negative");
  if (r.flags & TB_FLAG_ETA_OUT_OF_RANGE) info("warning: eta_s outside (0, 1]");
  if (r.flags & TB_FLAG_DETECTOR_OUT_OF_RANGE) info("warning: detector efficiency above 1");
  if (r.flags & TB_FLAG_BACKGROUND_EXCEEDS_SIGNAL) info("warning: background exceeds signal");
}

struct Options {
  std::string config;
  std::string out;
  std::string input;
  std::optional<uint64_t> seed;
};

void run_simulate(const Options& o) {
  ConfigPtr cfg = load_config(o.config);
  if (o.seed) check(tb_config_set_seed(cfg.get(), *o.seed));
  std::filesystem::create_directories(o.out);
  uint64_t n_pdc = 0, n_bg = 0;
  check(tb_config_frame_counts(cfg.get(), &n_pdc, &n_bg));
  write_config(cfg.get(), path_in(o.out, "config.json"));

  const struct {
    tb_frame_kind kind;
    uint64_t count;
    const char* file;
  } jobs[] = {{TB_PDC_ON, n_pdc, kPdcFile}, {TB_BACKGROUND, n_bg, kBackgroundFile}};
  for (const auto& job : jobs) {
    tb_stack* raw = nullptr;
    check(tb_stack_generate(cfg.get(), job.kind, job.count, &raw));
    StackPtr stack(raw);
    const std::string path = path_in(o.out, job.file);
    check(tb_stack_write(stack.get(), path.c_str()));
    double energy_sd = 0.0;
    check(tb_stack_pulse_energy_std(stack.get(), &energy_sd));
    info("wrote %s: %llu frames, digest %s, pulse-energy std %.4f", path.c_str(),
         static_cast<unsigned long long>(job.count), hex(tb_stack_digest(stack.get())).c_str(),
         energy_sd);
  }
}

void run_find_cs(const Options& o) {
  StackPtr pdc = load_stack(path_in(o.input, kPdcFile));
  ConfigPtr cfg = analysis_config(o.config, pdc.get());
  tb_cs_result r{};
  check(tb_find_cs(cfg.get(), pdc.get(), o.out.c_str(), &r));
  if (r.searched) {
    info("argmin shift (%d,%d), sigma %.6g, plateau %.6g, ties %d", r.shift_row, r.shift_col,
         r.min_value, r.plateau, r.ties);
  } else {
    info("CS search disabled; configured shift (%d,%d)", r.shift_row, r.shift_col);
  }
}

void run_area_scan(const Options& o) {
  StackPtr pdc = load_stack(path_in(o.input, kPdcFile));
  StackPtr bg;
  const std::string bg_path = path_in(o.input, kBackgroundFile);
  if (std::filesystem::exists(bg_path)) bg = load_stack(bg_path);
  ConfigPtr cfg = analysis_config(o.config, pdc.get());
  size_t points = 0;
  check(tb_area_scan(cfg.get(), pdc.get(), bg.get(), o.out.c_str(), &points));
  info("area scan: %zu areas written to %s", points, path_in(o.out, "area_scan.csv").c_str());
}

void run_calibrate(const Options& o) {
  StackPtr pdc = load_stack(path_in(o.input, kPdcFile));
  StackPtr bg = load_stack(path_in(o.input, kBackgroundFile));
  ConfigPtr cfg = analysis_config(o.config, pdc.get());
  tb_calibration r{};
  check(tb_calibrate(cfg.get(), pdc.get(), bg.get(), o.out.c_str(), &r));
  print_calibration(r);
}

void run_table1(const Options& o) {
  ConfigPtr cfg;
  if (!o.config.empty()) {
    cfg = load_config(o.config);
  } else {
    tb_config* c = nullptr;
    check(tb_config_table1(&c));
    cfg.reset(c);
  }
  if (o.seed) check(tb_config_set_seed(cfg.get(), *o.seed));
  tb_calibration r{};
  check(tb_reproduce_table1(cfg.get(), o.out.c_str(), &r));
  print_calibration(r);
  info("table written to %s", path_in(o.out, "table1.csv").c_str());
}

void print_line(const char* line, void*) { info("%s", line); }

void run_selftest() {
  int failures = 0;
  const tb_status st = tb_selftest(print_line, nullptr, &failures);
  if (st == TB_OK) info("all selftest checks passed");
  check(st);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Twin-beam CCD calibration: simulate frame stacks and estimate detection efficiency"};
  app.set_version_flag("--version", tb_version());
  app.require_subcommand(1);
  app.add_flag("--quiet,-q", g_quiet, "Suppress progress output");

  Options o;
  uint64_t seed = 0;
  const auto add_seed = [&](CLI::App* cmd) {
    cmd->add_option("--seed", seed, "Override the master seed");
  };

  CLI::App* simulate = app.add_subcommand("simulate", "Generate PDC and background stacks");
  simulate->add_option("--config", o.config, "Run configuration (JSON)")->required()->check(CLI::ExistingFile);
  simulate->add_option("--out", o.out, "Output directory")->required();
  add_seed(simulate);

  const auto analysis = [&](const char* name, const char* help) {
    CLI::App* cmd = app.add_subcommand(name, help);
    cmd->add_option("--input", o.input, "Directory holding pdc.tbfs / background.tbfs")
        ->required()
        ->check(CLI::ExistingDirectory);
    cmd->add_option("--config", o.config, "Analysis configuration (default: the stack's sidecar)")
        ->check(CLI::ExistingFile);
    cmd->add_option("--out", o.out, "Output directory")->required();
    return cmd;
  };
  CLI::App* find_cs = analysis("find-cs", "Map sigma_spatial over idler shifts and report the argmin");
  CLI::App* area_scan = analysis("area-scan", "Noise reduction factor versus detection area");
  CLI::App* calibrate = analysis("calibrate", "Estimate eta_s, eta_i and their uncertainties");

  CLI::App* table1 = app.add_subcommand("reproduce-table1", "Simulate and analyse the reference run");
  table1->add_option("--config", o.config, "Override the canned configuration")->check(CLI::ExistingFile);
  table1->add_option("--out", o.out, "Output directory")->required();
  add_seed(table1);

  CLI::App* selftest = app.add_subcommand("selftest", "Run the reduced-scale invariant suite");

  for (CLI::App* cmd : {simulate, find_cs, area_scan, calibrate, table1, selftest}) {
    cmd->add_flag("--quiet,-q", g_quiet, "Suppress progress output");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }
  if (simulate->count("--seed") || table1->count("--seed")) o.seed = seed;

  try {
    if (*simulate) run_simulate(o);
    else if (*find_cs) run_find_cs(o);
    else if (*area_scan) run_area_scan(o);
    else if (*calibrate) run_calibrate(o);
    else if (*table1) run_table1(o);
    else if (*selftest) run_selftest();
  } catch (const Failure& f) {
    std::fprintf(stderr, "error [%s]: %s\n", tb_status_name(f.status), f.message.c_str());
    return static_cast<int>(f.status);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error [%s]: %s\n", tb_status_name(TB_IO), e.what());
    return static_cast<int>(TB_IO);
  }
  return 0;
}
