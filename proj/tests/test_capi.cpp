// Exercises the shared library through its C header only.
#include <doctest.h>

#include <cmath>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "twinbeam/twinbeam.h"

namespace {

std::string scratch(const char* tag) {
  const auto p = std::filesystem::temp_directory_path() /
                 (std::string("twinbeam-capi-") + tag + "-" + std::to_string(::getpid()));
  std::filesystem::remove_all(p);
  return p.string();
}

struct Handles {
  tb_config* cfg = nullptr;
  tb_stack* pdc = nullptr;
  tb_stack* bg = nullptr;
  ~Handles() {
    tb_stack_free(pdc);
    tb_stack_free(bg);
    tb_config_free(cfg);
  }
};

const char* kSmall = R"({
  "experiment": {"background": {"straylight_mean": 5.0}, "master_seed": 11},
  "analysis": {"z": 2, "n": 40, "m": 40}
})";

}  // namespace

TEST_CASE("version and status names") {
  CHECK(std::strlen(tb_version()) > 0);
  CHECK(std::string(tb_status_name(TB_OK)) == "ok");
  CHECK(std::string(tb_status_name(TB_CORRUPT_HEADER)) == "corrupt-header");
  CHECK(std::string(tb_status_name(TB_SELFTEST_FAILED)) == "selftest-failed");
  CHECK(std::string(tb_status_name(static_cast<tb_status>(55))) == "unknown");
}

TEST_CASE("null arguments are rejected") {
  CHECK(tb_config_default(nullptr) == TB_INVALID_ARGUMENT);
  CHECK(std::strlen(tb_last_error()) > 0);
  CHECK(tb_config_parse(nullptr, nullptr) == TB_INVALID_ARGUMENT);
  CHECK(tb_calibrate(nullptr, nullptr, nullptr, nullptr, nullptr) == TB_INVALID_ARGUMENT);
  tb_config_free(nullptr);
  tb_stack_free(nullptr);
}

TEST_CASE("configuration handles") {
  Handles h;
  REQUIRE(tb_config_parse(kSmall, &h.cfg) == TB_OK);
  uint64_t seed = 0;
  CHECK(tb_config_seed(h.cfg, &seed) == TB_OK);
  CHECK(seed == 11);
  uint64_t d1 = 0, d2 = 0;
  CHECK(tb_config_digest(h.cfg, &d1) == TB_OK);
  CHECK(tb_config_set_seed(h.cfg, 12) == TB_OK);
  CHECK(tb_config_digest(h.cfg, &d2) == TB_OK);
  CHECK(d1 != d2);
  uint64_t n = 0, m = 0;
  CHECK(tb_config_frame_counts(h.cfg, &n, &m) == TB_OK);
  CHECK(n == 80);
  CHECK(m == 80);

  size_t needed = 0;
  CHECK(tb_config_to_json(h.cfg, nullptr, 0, &needed) == TB_OK);
  REQUIRE(needed > 1);
  std::vector<char> buf(needed);
  CHECK(tb_config_to_json(h.cfg, buf.data(), buf.size(), &needed) == TB_OK);
  CHECK(buf[needed - 1] == '\0');
  tb_config* back = nullptr;
  REQUIRE(tb_config_parse(buf.data(), &back) == TB_OK);
  uint64_t d3 = 0;
  tb_config_digest(back, &d3);
  CHECK(d3 == d2);
  tb_config_free(back);
}

TEST_CASE("config errors carry a message") {
  tb_config* c = nullptr;
  CHECK(tb_config_parse("{\"nope\": 1}", &c) == TB_CONFIG);
  CHECK(c == nullptr);
  CHECK(std::string(tb_last_error()).find("nope") != std::string::npos);
  CHECK(tb_config_load("/nonexistent/run.json", &c) == TB_IO);
}

TEST_CASE("stacks through the C API") {
  Handles h;
  REQUIRE(tb_config_parse(kSmall, &h.cfg) == TB_OK);
  REQUIRE(tb_stack_generate(h.cfg, TB_PDC_ON, 80, &h.pdc) == TB_OK);
  REQUIRE(tb_stack_generate(h.cfg, TB_BACKGROUND, 80, &h.bg) == TB_OK);
  CHECK(tb_stack_count(h.pdc) == 80);
  CHECK(tb_stack_kind(h.bg) == TB_BACKGROUND);
  CHECK(tb_stack_rows(h.pdc) == 9);
  CHECK(tb_stack_cols(h.pdc) == 24);
  const uint32_t* counts = nullptr;
  CHECK(tb_stack_frame(h.pdc, 79, &counts) == TB_OK);
  CHECK(counts != nullptr);
  CHECK(tb_stack_frame(h.pdc, 80, &counts) == TB_INVALID_ARGUMENT);

  const std::string dir = scratch("stacks");
  std::filesystem::create_directories(dir);
  const std::string path = dir + "/pdc.tbfs";
  REQUIRE(tb_stack_write(h.pdc, path.c_str()) == TB_OK);
  tb_stack* back = nullptr;
  REQUIRE(tb_stack_read(path.c_str(), &back) == TB_OK);
  CHECK(tb_stack_digest(back) == tb_stack_digest(h.pdc));
  const uint32_t* a = nullptr;
  const uint32_t* b = nullptr;
  tb_stack_frame(h.pdc, 5, &a);
  tb_stack_frame(back, 5, &b);
  CHECK(std::memcmp(a, b, 9 * 24 * sizeof(uint32_t)) == 0);
  double sd = 0.0;
  CHECK(tb_stack_pulse_energy_std(back, &sd) == TB_OK);
  CHECK(std::isnan(sd));
  tb_config* from_stack = nullptr;
  CHECK(tb_stack_config(back, &from_stack) == TB_OK);
  uint64_t d = 0;
  tb_config_digest(from_stack, &d);
  CHECK(d == tb_stack_digest(back));
  tb_config_free(from_stack);
  tb_stack_free(back);

  std::filesystem::resize_file(path, 100);
  tb_stack* broken = nullptr;
  CHECK(tb_stack_read(path.c_str(), &broken) == TB_TRUNCATED_PAYLOAD);
  CHECK(broken == nullptr);
  std::filesystem::remove_all(dir);
}

TEST_CASE("analyses through the C API") {
  Handles h;
  REQUIRE(tb_config_parse(kSmall, &h.cfg) == TB_OK);
  REQUIRE(tb_stack_generate(h.cfg, TB_PDC_ON, 80, &h.pdc) == TB_OK);
  REQUIRE(tb_stack_generate(h.cfg, TB_BACKGROUND, 80, &h.bg) == TB_OK);
  const std::string dir = scratch("analyses");

  tb_cs_result cs{};
  CHECK(tb_find_cs(h.cfg, h.pdc, dir.c_str(), &cs) == TB_OK);
  CHECK(cs.searched == 1);
  CHECK(cs.shift_row == 0);
  CHECK(cs.shift_col == 0);
  CHECK(cs.min_value < cs.plateau);
  CHECK(std::filesystem::exists(dir + "/cs_map.csv"));

  size_t points = 0;
  CHECK(tb_area_scan(h.cfg, h.pdc, nullptr, dir.c_str(), &points) == TB_OK);
  CHECK(points > 1);
  CHECK(std::filesystem::exists(dir + "/area_scan.csv"));

  tb_calibration r{};
  CHECK(tb_calibrate(h.cfg, h.pdc, h.bg, dir.c_str(), &r) == TB_OK);
  CHECK(r.z_repeats == 2);
  CHECK(std::abs(r.eta_i - r.alpha_b * r.eta_s) < 1e-12);
  CHECK(std::abs(r.eta_s - 0.6) < 5 * r.u_eta_s);
  CHECK(std::filesystem::exists(dir + "/calibration_summary.csv"));

  // Swapped stacks: PDC frames where background is expected.
  CHECK(tb_calibrate(h.cfg, h.bg, h.pdc, nullptr, &r) != TB_OK);
  std::filesystem::remove_all(dir);
}

TEST_CASE("predictors through the C API") {
  double v = 0.0;
  CHECK(tb_predict_variance(0.1, 0.6, 5000, &v) == TB_OK);
  CHECK(v == doctest::Approx(318.0));
  CHECK(tb_predict_covariance(0.1, 0.6, 0.6, 5000, &v) == TB_OK);
  CHECK(v == doctest::Approx(198.0));
  CHECK(tb_predict_sigma(0.7, 0.5, 0.1, 5000, &v) == TB_OK);
  CHECK(v == doctest::Approx(0.42));
  CHECK(tb_predict_sigma_with_jitter(0.6, 0.6, 0.1, 1e-3, 5000, &v) == TB_OK);
  CHECK(v == doctest::Approx(0.4));
  CHECK(tb_predict_sigma_alpha(0.99416, 0.613, &v) == TB_OK);
  CHECK(v == doctest::Approx(0.384).epsilon(1e-3));
  CHECK(tb_predict_variance(0.1, 2.0, 5000, &v) == TB_DOMAIN);
  CHECK(tb_predict_variance(0.1, 0.5, 5000, nullptr) == TB_INVALID_ARGUMENT);
}

TEST_CASE("selftest through the C API") {
  int lines = 0;
  int failures = -1;
  const tb_status st = tb_selftest([](const char*, void* user) { ++*static_cast<int*>(user); }, &lines,
                                   &failures);
  CHECK(st == TB_OK);
  CHECK(failures == 0);
  CHECK(lines == 9);
}
