#include <CLI11.hpp>

#include <cstdio>
#include <iostream>

#include "omnifuse/config.hpp"
#include "omnifuse/error.hpp"
#include "omnifuse/logging.hpp"
#include "omnifuse/runner.hpp"
#include "omnifuse/synth.hpp"

using namespace omnifuse;

namespace {

int code(ExitCode c) { return static_cast<int>(c); }

int cmd_run(const std::string& config_path, const std::string& mode, const std::string& out, const std::int64_t* seed) {
  auto config = load_run_config(config_path);
  if (!mode.empty()) config.mode = run_mode_from_string(mode);
  if (!out.empty()) config.output = std::filesystem::absolute(out);
  if (seed) config.seed = static_cast<std::uint64_t>(*seed);
  config.echo["mode"] = to_string(config.mode);
  config.echo["output"] = config.output.string();
  config.echo["seed"] = config.seed;

  const auto report = run(config);
  if (config.mode == RunMode::bench) write_report(report, config.output / "report.json");
  auto summary = report.to_json();
  summary.erase("config");
  std::cout << summary.dump(2) << "\n";
  if (report.exit_code() != ExitCode::success) {
    std::cerr << "error: " << report.skipped_frames.size() << " of " << report.frames_total
              << " frames could not be read\n";
  }
  return code(report.exit_code());
}

int cmd_synth(const std::string& scene_path, const std::string& out, std::int64_t seed) {
  const auto scene = load_scene(scene_path);
  make_synthetic_dataset(scene, out, static_cast<std::uint64_t>(seed));
  std::cout << "wrote " << scene.frames << " frames for " << scene.sensors.size() << " sensors to " << out << "\n";
  return 0;
}

int cmd_calib_check(const std::string& config_path) {
  const auto config = load_run_config(config_path);
  bool ok = true;
  for (const auto& s : config.sensors) {
    const auto r = check_round_trip(s.calibration);
    const bool pass = r.max_point_error_px <= 1e-6 && r.max_pixel_error <= 2 && r.coverage > 0.0;
    ok = ok && pass;
    std::printf("%-16s %s  point error %.3g px, pixel error %d/255, coverage %.1f%%\n", s.sensor_id.c_str(),
                pass ? "ok  " : "FAIL", r.max_point_error_px, r.max_pixel_error, 100.0 * r.coverage);
  }
  return ok ? 0 : code(ExitCode::config);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Sensor-masked image pipeline"};
  app.require_subcommand(1);

  std::string config_path, mode, out, scene_path;
  std::int64_t seed = 0;

  auto* run_cmd = app.add_subcommand("run", "Process a dataset (batch, stream) or benchmark the pipeline");
  run_cmd->add_option("--config", config_path, "Run config JSON")->required();
  run_cmd->add_option("--mode", mode, "batch, stream or bench")->check(CLI::IsMember({"batch", "stream", "bench"}));
  run_cmd->add_option("--out", out, "Output directory (overrides the config)");
  auto* seed_opt = run_cmd->add_option("--seed", seed, "Seed for synthetic bench inputs");

  std::string synth_out;
  std::int64_t synth_seed = 0;
  auto* synth_cmd = app.add_subcommand("synth", "Generate a synthetic dataset from a scene file");
  synth_cmd->add_option("--scene", scene_path, "Scene JSON")->required();
  synth_cmd->add_option("--out", synth_out, "Dataset directory")->required();
  synth_cmd->add_option("--seed", synth_seed, "Random seed");

  auto* calib_cmd = app.add_subcommand("calib", "Calibration tools");
  calib_cmd->require_subcommand(1);
  std::string calib_config;
  auto* check_cmd = calib_cmd->add_subcommand("check", "Validate calibration round trips");
  check_cmd->add_option("--config", calib_config, "Run config JSON")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return code(ExitCode::config);
  }

  try {
    if (*run_cmd) return cmd_run(config_path, mode, out, seed_opt->count() ? &seed : nullptr);
    if (*synth_cmd) return cmd_synth(scene_path, synth_out, synth_seed);
    if (*check_cmd) return cmd_calib_check(calib_config);
  } catch (const Error& e) {
    std::cerr << "error (" << to_string(e.kind()) << "): " << e.what() << "\n";
    return code(exit_code_for(e.kind()));
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return code(ExitCode::failure);
  }
  return code(ExitCode::failure);
}
