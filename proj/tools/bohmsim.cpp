// bohmsim: run, list and validate scenario configurations.
//   exit 0  all gating checks passed
//   exit 1  a check failed or the run hit a runtime error
//   exit 2  bad configuration or command line

#include <cstdio>
#include <iostream>

#include "CLI11.hpp"
#include "bohm.hpp"

namespace {

constexpr int kPass = 0, kFail = 1, kConfig = 2;

int list() {
  for (const auto& s : bohm::scenario::registry()) {
    std::cout << s.schema.name << "\n    " << s.schema.description << "\n    parameters:";
    for (const auto& p : s.schema.parameters)
      std::cout << ' ' << p.name << (p.fallback.is_null() ? " (required)" : "=" + p.fallback.dump());
    std::cout << '\n';
  }
  std::cout << "initial-state generators:\n";
  for (const auto& g : bohm::config::generators()) std::cout << "    " << g.name << ": " << g.description << '\n';
  return kPass;
}

std::string short_fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

void report_config_error(const std::string& path, const bohm::ConfigError& e) {
  std::cerr << path << ": config error: " << e.what() << '\n';
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Bohmian mechanics numerical lab"};
  app.require_subcommand(1);
  std::size_t threads = 0;
  std::string out, path;
  std::optional<std::uint64_t> seed;
  app.add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  auto* run = app.add_subcommand("run", "run a scenario and write report.json plus CSV files");
  run->add_option("config", path, "scenario JSON")->required();
  run->add_option("--out", out, "output directory (overrides the config)");
  run->add_option("--seed-override", seed, "replace the config seed");
  run->add_option("--threads", threads, "worker threads (0 = hardware)")->check(CLI::NonNegativeNumber);

  auto* validate = app.add_subcommand("validate", "check a scenario config without running it");
  validate->add_option("config", path, "scenario JSON")->required();
  validate->add_option("--seed-override", seed, "replace the config seed");

  app.add_subcommand("list", "list scenarios and initial-state generators");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int rc = app.exit(e);
    return rc == 0 ? kPass : kConfig;
  }
  if (app.got_subcommand("list")) return list();
  bohm::thread_limit() = threads;

  bohm::config::Overrides over;
  over.seed = seed;
  bohm::config::ScenarioConfig cfg;
  try {
    cfg = bohm::scenario::load_file(path, over);
  } catch (const bohm::ConfigError& e) {
    report_config_error(path, e);
    return kConfig;
  }
  if (*validate) {
    std::cout << path << ": ok (" << cfg.scenario << ", seed " << cfg.seed << ")\n";
    return kPass;
  }

  const std::filesystem::path dir = out.empty() ? std::filesystem::path(cfg.output) : std::filesystem::path(out);
  try {
    const auto rep = bohm::scenario::run(cfg);
    bohm::scenario::write_artifacts(rep, cfg, dir);
    for (const auto& c : rep.checks)
      std::cout << (c.pass ? "PASS " : (c.gating ? "FAIL " : "INFO ")) << c.name << ": " << short_fmt(c.value) << ' ' << c.relation << ' '
                << short_fmt(c.threshold) << '\n';
    std::cout << cfg.scenario << ": " << (rep.passed() ? "PASSED" : "FAILED") << " -> " << (dir / "report.json").string() << '\n';
    return rep.passed() ? kPass : kFail;
  } catch (const bohm::ConfigError& e) {
    report_config_error(path, e);
    return kConfig;
  } catch (const std::exception& e) {
    std::cerr << cfg.scenario << ": error: " << e.what() << '\n';
    return kFail;
  }
}
