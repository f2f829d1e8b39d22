// tlta: run scenarios, compile zones, verify event logs.
#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include "tlta/tlta.h"

namespace fs = std::filesystem;

namespace {

int exit_code(tlta_status s) {
  switch (s) {
    case TLTA_OK: return 0;
    case TLTA_ERR_INVARIANT:
    case TLTA_ERR_INTERNAL: return 3;
    default: return 2;
  }
}

int report(tlta_status s) {
  std::cerr << "tlta: " << tlta_last_error() << "\n";
  return exit_code(s);
}

bool write_file(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) return false;
  out << text;
  return static_cast<bool>(out.flush());
}

int cmd_run(const std::string& scenario_path, std::optional<std::uint64_t> seed, const std::string& out_dir) {
  tlta_scenario* sc = nullptr;
  if (tlta_status s = tlta_scenario_load(scenario_path.c_str(), &sc); s != TLTA_OK) return report(s);
  const std::uint64_t used_seed = seed.value_or(tlta_scenario_default_seed(sc));
  for (size_t i = 0; i < tlta_scenario_warning_count(sc); ++i) {
    std::cerr << "warning: " << tlta_scenario_warning(sc, i) << "\n";
  }

  tlta_result* result = nullptr;
  const tlta_status s = tlta_run(sc, used_seed, &result);
  const std::string name = tlta_scenario_name(sc);
  tlta_scenario_free(sc);
  if (s != TLTA_OK) return report(s);

  const fs::path dir = fs::path(out_dir) / (name + "-" + std::to_string(used_seed));
  std::error_code ec;
  fs::create_directories(dir, ec);
  std::string summary = tlta_result_summary(result);
  if (!seed) summary += "note: --seed omitted, used the scenario default seed\n";
  const bool ok = !ec && write_file(dir / "events.jsonl", tlta_result_log(result)) &&
                  write_file(dir / "metrics.json", tlta_result_metrics_json(result)) &&
                  write_file(dir / "summary.txt", summary);
  tlta_result_free(result);
  if (!ok) {
    std::cerr << "tlta: cannot write outputs under '" << dir.string() << "'\n";
    return 2;
  }
  std::cout << summary << "output: " << dir.string() << "\n";
  return 0;
}

std::optional<std::vector<double>> parse_polygon(const std::string& text) {
  std::vector<double> xy;
  std::stringstream pairs(text);
  std::string pair;
  while (std::getline(pairs, pair, ';')) {
    const auto comma = pair.find(',');
    if (comma == std::string::npos) return std::nullopt;
    try {
      std::size_t used = 0;
      const std::string xs = pair.substr(0, comma);
      const std::string ys = pair.substr(comma + 1);
      const double x = std::stod(xs, &used);
      if (used != xs.size()) return std::nullopt;
      const double y = std::stod(ys, &used);
      if (used != ys.size()) return std::nullopt;
      xy.push_back(x);
      xy.push_back(y);
    } catch (const std::exception&) {
      return std::nullopt;
    }
  }
  return xy;
}

int cmd_compile_zone(const std::string& scenario_path, const std::string& polygon, double cell_radius, int extent,
                     double op_scale, int layers, const std::string& out_path) {
  char* doc = nullptr;
  tlta_status s = TLTA_OK;
  if (!scenario_path.empty()) {
    tlta_scenario* sc = nullptr;
    s = tlta_scenario_load(scenario_path.c_str(), &sc);
    if (s != TLTA_OK) return report(s);
    s = tlta_compile_zone_scenario(sc, &doc);
    tlta_scenario_free(sc);
  } else {
    const auto xy = parse_polygon(polygon);
    if (!xy) {
      std::cerr << "tlta: --polygon: expected \"x,y;x,y;...\"\n";
      return 2;
    }
    s = tlta_compile_zone_polygon(xy->data(), xy->size() / 2, cell_radius, extent, op_scale, layers, &doc);
  }
  if (s != TLTA_OK) return report(s);

  const std::string text = std::string(doc) + "\n";
  tlta_string_free(doc);
  const auto zone = nlohmann::ordered_json::parse(text);
  for (const auto& [layer, n] : zone.at("counts").items()) std::cout << layer << "=" << n << "\n";
  std::cout << "op_scale=" << zone.at("op_scale").get<double>()
            << " (requested " << zone.at("requested_op_scale").get<double>() << ")\n";

  if (!out_path.empty() && !write_file(out_path, text)) {
    std::cerr << "tlta: cannot write '" << out_path << "'\n";
    return 2;
  }
  return 0;
}

int cmd_verify(const std::string& log_path) {
  char* message = nullptr;
  const tlta_status s = tlta_verify_log(log_path.c_str(), &message);
  if (s == TLTA_OK) {
    std::cout << "ok: " << log_path << "\n";
    return 0;
  }
  if (s == TLTA_ERR_TRUNCATED) {
    std::cerr << "truncated: " << (message ? message : tlta_last_error()) << "\n";
  } else if (s == TLTA_ERR_INVARIANT) {
    std::cerr << "violation: " << (message ? message : tlta_last_error()) << "\n";
  } else {
    std::cerr << "tlta: " << tlta_last_error() << "\n";
  }
  tlta_string_free(message);
  return s == TLTA_ERR_INVARIANT ? 3 : 2;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Trusted location trigger authorisation simulator"};
  app.require_subcommand(1);

  std::string scenario_path;
  std::optional<std::uint64_t> seed;
  std::string out_dir = "out";
  auto* run = app.add_subcommand("run", "Run a scenario and write its event log, metrics and summary");
  run->add_option("--scenario", scenario_path, "Scenario file")->required();
  run->add_option("--seed", seed, "Random seed (default: the scenario's seed)");
  run->add_option("--out", out_dir, "Output directory")->capture_default_str();

  std::string zone_scenario;
  std::string polygon;
  double cell_radius = 100.0;
  int extent = 10;
  double op_scale = 1.3;
  int layers = 1;
  std::string zone_out;
  auto* zone = app.add_subcommand("compile-zone", "Compile a protected zone into cell layers and perimeters");
  auto* zs = zone->add_option("--scenario", zone_scenario, "Scenario file supplying grid and zone");
  auto* zp = zone->add_option("--polygon", polygon, "Inline polygon \"x,y;x,y;...\"");
  zs->excludes(zp);
  zone->add_option("--cell-radius", cell_radius, "Cell radius in metres (with --polygon)")->capture_default_str();
  zone->add_option("--extent", extent, "Grid extent in cells (with --polygon)")->capture_default_str();
  zone->add_option("--op-scale", op_scale, "Requested op scale (with --polygon)")->capture_default_str();
  zone->add_option("--layers", layers, "Outer layers (with --polygon)")->capture_default_str();
  zone->add_option("--out", zone_out, "Write the zone document here");

  std::string log_path;
  auto* verify = app.add_subcommand("verify", "Check an event log against the simulator invariants");
  verify->add_option("--log", log_path, "events.jsonl to check")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (*run) return cmd_run(scenario_path, seed, out_dir);
  if (*zone) {
    if (zone_scenario.empty() && polygon.empty()) {
      std::cerr << "tlta: compile-zone needs --scenario or --polygon\n";
      return 2;
    }
    return cmd_compile_zone(zone_scenario, polygon, cell_radius, extent, op_scale, layers, zone_out);
  }
  return cmd_verify(log_path);
}
