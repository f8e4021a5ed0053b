#include <CLI11.hpp>

#include <cstdlib>
#include <filesystem>
#include <iostream>

#include "weakflow/scenario.hpp"

namespace {

using namespace weakflow;

ScenarioConfig resolve(const std::string& ref) {
  if (std::filesystem::exists(ref)) return load_scenario_file(ref);
  if (auto j = catalogue_scenario(ref)) return parse_scenario(*j);
  throw InvalidArgument("'" + ref + "' is neither a config file nor a bundled scenario (see 'weakflow list')");
}

std::optional<std::uint64_t> env_seed() {
  const char* s = std::getenv("WEAKFLOW_SEED");
  if (!s || !*s) return std::nullopt;
  char* end = nullptr;
  errno = 0;
  const unsigned long long v = std::strtoull(s, &end, 10);
  if (errno != 0 || *end != '\0' || s[0] == '-') throw InvalidArgument("WEAKFLOW_SEED: expected a nonnegative integer");
  return v;
}

int run(const std::string& ref, const std::string& out, unsigned jobs) {
  const auto sc = resolve(ref);
  validate_scenario(sc);
  if (jobs > 0) set_max_jobs(jobs);
  const auto res = run_scenario(sc, {env_seed()});
  const std::filesystem::path dir = !out.empty() ? out : sc.output.value_or("out/" + sc.name);
  write_outputs(res, dir);
  for (const auto& c : res.cases) {
    std::cout << c.name << " [" << c.task << "]: ";
    if (!c.error.empty()) std::cout << "error: " << c.error;
    else std::cout << to_string(c.verdict) << (c.expect ? std::string(" (expected ") + to_string(*c.expect) + ")" : "")
                   << (c.ok ? " ok" : " NOT OK");
    std::cout << "\n";
  }
  std::cout << "scenario " << res.name << ": " << (res.error ? "error" : to_string(res.verdict)) << " -> "
            << dir.string() << "\n";
  return res.exit_code;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Numerical checks for time-dependent metric measure spaces"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(weakflow::version));

  std::string ref, out;
  unsigned jobs = 0;
  auto* run_cmd = app.add_subcommand("run", "Run a scenario config file or a bundled scenario");
  run_cmd->add_option("config", ref, "Config file path or bundled scenario name")->required();
  run_cmd->add_option("--out", out, "Output directory (default: config output or out/<name>)");
  run_cmd->add_option("--jobs", jobs, "Maximum worker threads")->check(CLI::PositiveNumber);

  bool as_json = false;
  auto* list_cmd = app.add_subcommand("list", "List bundled scenarios");
  list_cmd->add_flag("--json", as_json, "Print a JSON array");

  std::string vref;
  auto* validate_cmd = app.add_subcommand("validate", "Validate a config without running it");
  validate_cmd->add_option("config", vref, "Config file path or bundled scenario name")->required();

  std::string sname;
  auto* show_cmd = app.add_subcommand("show", "Print the config of a bundled scenario");
  show_cmd->add_option("name", sname, "Bundled scenario name")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 1;
  }

  try {
    if (*run_cmd) return run(ref, out, jobs);
    if (*list_cmd) {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& e : weakflow::catalogue()) {
        const auto j = nlohmann::json::parse(e.text);
        arr.push_back({{"name", e.name}, {"description", j.value("description", "")}});
      }
      if (as_json) {
        std::cout << arr.dump(2) << "\n";
      } else {
        for (const auto& e : arr)
          std::cout << e["name"].get<std::string>() << "\n    " << e["description"].get<std::string>() << "\n";
      }
      return 0;
    }
    if (*validate_cmd) {
      const auto sc = resolve(vref);
      weakflow::validate_scenario(sc);
      std::cout << "ok: " << sc.name << " (" << sc.cases.size() << " case" << (sc.cases.size() == 1 ? "" : "s") << ")\n";
      return 0;
    }
    if (*show_cmd) {
      const auto j = weakflow::catalogue_scenario(sname);
      if (!j) throw weakflow::InvalidArgument("unknown scenario '" + sname + "'");
      std::cout << j->dump(2) << "\n";
      return 0;
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 1;
}
