// End-to-end checks against the installed command-line binary: exit codes,
// stderr diagnostics, and artifact side effects.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <json.hpp>

using njson = nlohmann::json;
namespace fs = std::filesystem;

namespace {

const fs::path kCli = MASERSIM_CLI_PATH;
const fs::path kConfigDir = MASERSIM_CONFIG_DIR;

struct RunResult {
  int exit_code = -1;
  std::string out;
  std::string err;
};

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return std::string(std::istreambuf_iterator<char>(in),
                     std::istreambuf_iterator<char>());
}

fs::path fresh_dir(const std::string& name) {
  const fs::path dir = fs::temp_directory_path() / ("masersim_exe_" + name);
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

void write_file(const fs::path& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  out << content;
}

RunResult run_cli(const fs::path& work, const std::string& args) {
  const fs::path out_file = work / "stdout.txt";
  const fs::path err_file = work / "stderr.txt";
  const std::string cmd = "\"" + kCli.string() + "\" " + args + " > \"" +
                          out_file.string() + "\" 2> \"" + err_file.string() +
                          "\"";
  const int raw = std::system(cmd.c_str());
  RunResult r;
  r.exit_code = WIFEXITED(raw) ? WEXITSTATUS(raw) : -1;
  r.out = slurp(out_file);
  r.err = slurp(err_file);
  return r;
}

njson error_payload(const RunResult& r) {
  return njson::parse(r.err).at("error");
}

std::string base_config() {
  return "[rates]\n"
         "einstein_B_per_s = 1.1e-7\n"
         "gamma_s_per_s = 4.0e4\n"
         "kappa_c_per_s = 2.1e6\n";
}

std::string q(const fs::path& p) { return "\"" + p.string() + "\""; }

}  // namespace

TEST_CASE("version and help exit cleanly") {
  const fs::path dir = fresh_dir("version");
  RunResult v = run_cli(dir, "--version");
  CHECK(v.exit_code == 0);
  CHECK(v.out.find("0.1.0") != std::string::npos);

  RunResult h = run_cli(dir, "--help");
  CHECK(h.exit_code == 0);
  for (const char* sub : {"threshold", "lv-dynamics", "lineshape-sim", "hfi",
                          "fit", "sensitivity", "report"}) {
    CHECK(h.out.find(sub) != std::string::npos);
  }
}

TEST_CASE("threshold happy path announces its artifacts") {
  const fs::path dir = fresh_dir("threshold");
  write_file(dir / "config.toml", base_config());
  RunResult r = run_cli(dir, "threshold --config " + q(dir / "config.toml") +
                                 " --out " + q(dir / "out"));
  CHECK(r.exit_code == 0);
  CHECK(r.err.empty());
  CHECK(r.out.find("wrote") != std::string::npos);
  CHECK(r.out.find("threshold.json") != std::string::npos);
  CHECK(r.out.find("run_summary.json") != std::string::npos);
  CHECK(fs::exists(dir / "out" / "steady_state.csv"));
}

TEST_CASE("config validation failures exit 2 with structured issues") {
  const fs::path dir = fresh_dir("badconfig");
  write_file(dir / "config.toml",
             "[rates]\n"
             "einstein_B_per_s = 1.1e-7\n"
             "gamma_s_per_s = 4.0e4\n"
             "kappa_c_per_s = -2.1e6\n");
  RunResult r = run_cli(dir, "threshold --config " + q(dir / "config.toml"));
  CHECK(r.exit_code == 2);
  njson err = error_payload(r);
  CHECK(err["category"] == "validation");
  CHECK(err["exit_code"].get<int>() == 2);
  bool found = false;
  for (const auto& issue : err["issues"])
    if (issue["field"] == "rates.kappa_c_per_s") found = true;
  CHECK(found);
}

TEST_CASE("unreadable and unparseable configs are distinguished") {
  const fs::path dir = fresh_dir("cfgio");
  RunResult missing =
      run_cli(dir, "threshold --config " + q(dir / "absent.toml"));
  CHECK(missing.exit_code == 4);
  CHECK(error_payload(missing)["category"] == "io");

  write_file(dir / "broken.toml", base_config() + "[unclosed\n");
  RunResult broken =
      run_cli(dir, "threshold --config " + q(dir / "broken.toml"));
  CHECK(broken.exit_code == 2);
  njson err = error_payload(broken);
  CHECK(err["category"] == "parse");
  CHECK(err["message"].get<std::string>().find("line") != std::string::npos);
}

TEST_CASE("cli misuse exits 2 with a json diagnostic") {
  const fs::path dir = fresh_dir("misuse");
  write_file(dir / "config.toml", base_config());

  RunResult unknown_flag = run_cli(
      dir, "threshold --config " + q(dir / "config.toml") + " --frobnicate");
  CHECK(unknown_flag.exit_code == 2);
  CHECK(error_payload(unknown_flag)["category"] == "usage");

  RunResult no_sub = run_cli(dir, "--config " + q(dir / "config.toml"));
  CHECK(no_sub.exit_code == 2);

  RunResult no_config = run_cli(dir, "threshold");
  CHECK(no_config.exit_code == 2);
}

TEST_CASE("missing config sections surface the offending field") {
  const fs::path dir = fresh_dir("sections");
  write_file(dir / "config.toml", base_config());

  RunResult lv = run_cli(dir, "lv-dynamics --config " + q(dir / "config.toml") +
                                  " --out " + q(dir / "out_lv"));
  CHECK(lv.exit_code == 2);
  CHECK(error_payload(lv)["issues"][0]["field"] == "dynamics");

  RunResult hfi = run_cli(dir, "hfi --config " + q(dir / "config.toml") +
                                   " --out " + q(dir / "out_hfi"));
  CHECK(hfi.exit_code == 2);
  njson err = error_payload(hfi);
  CHECK(err["issues"][0]["field"] == "hfi.rho");
  CHECK(err["issues"][0]["message"].get<std::string>().find("rho") !=
        std::string::npos);
}

TEST_CASE("computation failures exit 3") {
  const fs::path dir = fresh_dir("comp");
  write_file(dir / "config.toml", base_config());
  // Peak inversion beyond the pole: accepted by the flag, rejected by physics.
  RunResult r = run_cli(dir, "lineshape-sim --config " + q(dir / "config.toml") +
                                 " --out " + q(dir / "out") + " --n-max 7e12");
  CHECK(r.exit_code == 3);
  njson err = error_payload(r);
  CHECK(err["category"] == "computation");
  CHECK(err["exit_code"].get<int>() == 3);
}

TEST_CASE("dataset problems exit 4") {
  const fs::path dir = fresh_dir("dataset");
  write_file(dir / "config.toml", base_config());

  RunResult missing = run_cli(dir, "fit --config " + q(dir / "config.toml") +
                                       " --out " + q(dir / "out") +
                                       " --input " + q(dir / "absent.csv"));
  CHECK(missing.exit_code == 4);
  CHECK(error_payload(missing)["category"] == "io");

  write_file(dir / "mangled.csv", "frequency_MHz,value\n1.0,2.0\n0.5,1.0\n");
  RunResult mangled = run_cli(dir, "fit --config " + q(dir / "config.toml") +
                                       " --out " + q(dir / "out") +
                                       " --input " + q(dir / "mangled.csv"));
  CHECK(mangled.exit_code == 4);
  CHECK(error_payload(mangled)["category"] == "parse");

  RunResult no_input = run_cli(dir, "fit --config " + q(dir / "config.toml") +
                                        " --out " + q(dir / "out"));
  CHECK(no_input.exit_code == 2);  // missing input is a usage problem
}

TEST_CASE("sensitivity via flags matches the closed form") {
  const fs::path dir = fresh_dir("sens");
  write_file(dir / "config.toml", base_config());
  RunResult r = run_cli(
      dir, "sensitivity --config " + q(dir / "config.toml") + " --out " +
               q(dir / "out") +
               " --sigma-V 4.5e-4 --slope-V-per-T 337 --bandwidth-Hz 5e8");
  CHECK(r.exit_code == 0);
  njson s = njson::parse(slurp(dir / "out" / "sensitivity.json"));
  CHECK(std::abs(s["eta_T_per_sqrt_Hz"].get<double>() / 4.222625955714453e-11 -
                 1.0) < 1e-12);
}

TEST_CASE("report runs the full pipeline from the shipped manifest") {
  const fs::path dir = fresh_dir("report");
  write_file(dir / "config.toml", base_config() +
                                      "[magnetometry]\ndelta_f_Hz = 5.0e8\n");
  RunResult r = run_cli(dir, "report --config " + q(dir / "config.toml") +
                                 " --out " + q(dir / "out") + " --manifest " +
                                 q(kConfigDir / "example_manifest.toml"));
  CHECK(r.exit_code == 0);
  njson rep = njson::parse(slurp(dir / "out" / "report.json"));
  CHECK(rep["fit"]["converged"].get<bool>() == true);
  CHECK(rep["sensitivity"]["eta_pT_per_sqrt_Hz"].get<double>() > 0.0);

  RunResult no_manifest =
      run_cli(dir, "report --config " + q(dir / "config.toml"));
  CHECK(no_manifest.exit_code == 2);
}

TEST_CASE("json table format switches spectrum artifacts") {
  const fs::path dir = fresh_dir("format");
  write_file(dir / "config.toml", base_config());
  RunResult r = run_cli(dir, "lineshape-sim --config " + q(dir / "config.toml") +
                                 " --out " + q(dir / "out") + " --format json");
  CHECK(r.exit_code == 0);
  CHECK(fs::exists(dir / "out" / "photons_below.json"));
  CHECK_FALSE(fs::exists(dir / "out" / "photons_below.csv"));

  RunResult bad = run_cli(dir, "lineshape-sim --config " +
                                   q(dir / "config.toml") + " --format yaml");
  CHECK(bad.exit_code == 2);
}
