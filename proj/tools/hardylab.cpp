#include <chrono>
#include <cstdio>
#include <cstdlib>
#include <ctime>
#include <filesystem>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>
#include <thread>
#include <vector>

#include "CLI11.hpp"

#include "hardylab/runner.hpp"

namespace fs = std::filesystem;
using namespace hardylab;

namespace {

enum ExitCode { kOk = 0, kError = 1, kUnconverged = 2 };

fs::path output_dir(const std::string& flag) {
  if (const char* env = std::getenv("HARDYLAB_OUT"); env && *env) return env;
  return flag;
}

std::string utc_now() {
  const std::time_t t = std::time(nullptr);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", std::gmtime(&t));
  return buf;
}

void write_meta(const fs::path& dir, const std::string& name, const std::string& config, const std::string& started,
                double seconds, int jobs) {
  const json meta = {{"name", name},
                     {"config_path", config},
                     {"started_utc", started},
                     {"finished_utc", utc_now()},
                     {"wall_seconds", num(seconds)},
                     {"jobs", jobs},
                     {"hardware_concurrency", std::thread::hardware_concurrency()}};
  write_text(dir / (name + ".meta.json"), dump(meta));
}

std::map<std::string, double> parse_params(const std::string& text) {
  std::map<std::string, double> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    if (item.empty()) continue;
    const auto eq = item.find('=');
    if (eq == std::string::npos) throw ConfigError("--params: expected key=value, got '" + item + "'");
    const std::string key = item.substr(0, eq);
    const std::string val = item.substr(eq + 1);
    try {
      std::size_t used = 0;
      out[key] = std::stod(val, &used);
      if (used != val.size()) throw std::invalid_argument(val);
    } catch (const std::exception&) {
      throw ConfigError("--params: '" + key + "' is not a number");
    }
  }
  return out;
}

int cmd_run(const std::string& config, const std::string& out_flag, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  const Scenario sc = load_scenario(config);
  const RunOutput r = run_scenario(sc, jobs);
  const fs::path dir = output_dir(out_flag);
  write_text(dir / (sc.name + ".report.json"), dump(r.report));
  if (!r.sets_csv.empty()) write_text(dir / (sc.name + ".sets.csv"), r.sets_csv);
  if (!r.curves_csv.empty()) write_text(dir / (sc.name + ".curves.csv"), r.curves_csv);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(dir, sc.name, config, started, secs, jobs);
  for (const TaskOutcome& t : r.tasks)
    std::cout << sc.name << " [" << t.task << "] " << t.summary << (t.converged ? "" : " [unconverged]") << "\n";
  if (!r.converged) {
    std::cerr << sc.name << ": completed without convergence; partial report written\n";
    return kUnconverged;
  }
  return kOk;
}

int cmd_study(const std::string& config, const std::vector<int>& resolutions, const std::string& step,
              std::optional<double> reference, const std::string& out_flag, int jobs) {
  const auto t0 = std::chrono::steady_clock::now();
  const std::string started = utc_now();
  const Scenario sc = load_scenario(config);
  const StepVariable var = step == "log" ? StepVariable::log : StepVariable::h;
  const StudyOutput s = convergence_study(sc, resolutions, var, reference, jobs);
  const fs::path dir = output_dir(out_flag);
  write_text(dir / (sc.name + ".study.json"), dump(s.report));
  write_text(dir / (sc.name + ".study.csv"), s.csv);
  const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  write_meta(dir, sc.name + ".study", config, started, secs, jobs);
  for (const StudyRow& r : s.rows) std::printf("n=%d h=%.6g value=%.12g%s\n", r.resolution, r.h, r.value, r.converged ? "" : " [unconverged]");
  std::printf("extrapolated limit=%.12g order=%.4g (%s)%s%s\n", s.extrapolation.limit, s.extrapolation.order,
              to_string(var).c_str(), s.extrapolation.note.empty() ? "" : " ", s.extrapolation.note.c_str());
  return s.converged ? kOk : kUnconverged;
}

int cmd_oracle(const std::string& name, const std::string& params) {
  const OracleValue o = evaluate_oracle(name, parse_params(params));
  std::printf("%.6f\n", o.value);
  return kOk;
}

int cmd_validate(const std::string& config) {
  const Scenario sc = load_scenario(config);
  check_scenario(sc);
  std::cout << config << ": ok (" << sc.tasks.size() << " task" << (sc.tasks.size() == 1 ? "" : "s") << ")\n";
  return kOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"hardylab: capacities, Hardy weights and best constants on discretized domains"};
  app.require_subcommand(1);
  int jobs = 1;
  std::string out_flag = "out";
  app.add_option("--jobs,-j", jobs, "Worker thread cap")->check(CLI::PositiveNumber);
  app.add_option("--out,-o", out_flag, "Output directory (HARDYLAB_OUT overrides)");

  std::string config;
  auto* run = app.add_subcommand("run", "Run a scenario and write its report");
  run->add_option("config", config, "Scenario file")->required();

  auto* study = app.add_subcommand("study", "Convergence study over resolutions");
  std::vector<int> resolutions;
  std::string step = "h";
  std::optional<double> reference;
  study->add_option("config", config, "Scenario file")->required();
  study->add_option("--resolutions,-r", resolutions, "Increasing resolutions (at least 3)")->required()->delimiter(',');
  study->add_option("--step", step, "Extrapolation variable")->check(CLI::IsMember({"h", "log"}));
  study->add_option("--reference", reference, "Reference value for relative errors");

  auto* oracle = app.add_subcommand("oracle", "Evaluate a closed-form oracle");
  std::string oracle_name, params;
  oracle->add_option("name", oracle_name, "Oracle name")->required();
  oracle->add_option("--params", params, "Comma separated key=value list")->required();

  auto* validate = app.add_subcommand("validate", "Check a scenario without solving");
  validate->add_option("config", config, "Scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kOk : kError;
  }

  try {
    if (*run) return cmd_run(config, out_flag, jobs);
    if (*study) return cmd_study(config, resolutions, step, reference, out_flag, jobs);
    if (*oracle) return cmd_oracle(oracle_name, params);
    if (*validate) return cmd_validate(config);
  } catch (const hardylab::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kError;
  }
  return kError;
}
