#include <chrono>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>

#include <CLI11.hpp>

#include "sllbar/config.hpp"
#include "sllbar/experiments.hpp"
#include "sllbar/observables.hpp"

namespace fs = std::filesystem;
using namespace sllbar;

namespace {

int verbosity = 0;

void log(int level, const std::string& msg) {
  if (verbosity >= level) std::cerr << msg << '\n';
}

std::ofstream open_output(const fs::path& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cli", "cannot write '" + path.string() + "'");
  return out;
}

std::string step_tag(std::size_t n) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%06zu", n);
  return buf;
}

void command_run(const RunManifest& m, const fs::path& dir) {
  const ExperimentConfig& cfg = m.run;
  const SpacePtr space = FeSpace::create(build_mesh(cfg.family, cfg.run.level));
  const BrownianPath path = sample_path(sample_seed(cfg.base_seed, 0), cfg.T, cfg.run.steps);
  std::vector<EnergySample> trace;
  const auto result = simulate(cfg, space, path.increments, [&](const SchemeState& s) {
    trace.push_back({s.t, energy(s.u, cfg.params.kappa, cfg.params.mu)});
    if (m.snapshot_stride > 0 && s.n % m.snapshot_stride == 0) {
      auto u = open_output(dir / ("snapshot_u_" + step_tag(s.n) + ".csv"));
      write_csv(u, s.u, "u");
      auto h = open_output(dir / ("snapshot_H_" + step_tag(s.n) + ".csv"));
      write_csv(h, s.H, "H");
    }
    log(2, "step " + std::to_string(s.n) + " t=" + format_number(s.t));
  });
  auto u = open_output(dir / "u_final.csv");
  write_csv(u, result.final_state.u, "u");
  auto h = open_output(dir / "H_final.csv");
  write_csv(h, result.final_state.H, "H");
  auto e = open_output(dir / "energy.csv");
  write_energy_csv(e, trace, "0");
  log(1, "run: " + std::to_string(cfg.run.steps) + " steps, max |u| = " + format_number(result.max_pointwise_u));
}

void command_energy(const RunManifest& m, const fs::path& dir) {
  const EnergyEnsemble ens = run_energy_ensemble(m.energy);
  for (std::size_t s = 0; s < ens.traces.size(); ++s) {
    char name[64];
    std::snprintf(name, sizeof name, "energy_sample_%03zu.csv", s);
    auto out = open_output(dir / name);
    write_energy_csv(out, ens.traces[s], std::to_string(s));
  }
  auto out = open_output(dir / "energy_mean.csv");
  write_energy_csv(out, ens.mean, "mean");
  log(1, "energy: " + std::to_string(ens.traces.size()) + " samples, mean energy " +
             format_number(ens.mean.front().value) + " -> " + format_number(ens.mean.back().value));
}

void command_converge(const RunManifest& m, const fs::path& dir, bool spatial) {
  const ConvergenceReport report =
      spatial ? run_spatial_convergence(m.space) : run_temporal_convergence(m.time);
  auto out = open_output(dir / (spatial ? "convergence_space.csv" : "convergence_time.csv"));
  write_report_csv(out, report);
  for (const auto& fit : report.rates)
    log(1, "rate " + fit.column + " = " + format_number(fit.slope) + " (residual " + format_number(fit.residual) + ")");
  if (spatial) log(1, "monotone E1_u fraction " + format_number(report.monotone_fraction));
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Mixed finite element solver and Monte Carlo harness for stochastic LLBar equations"};
  app.require_subcommand(1);
  app.fallthrough();

  std::optional<std::uint64_t> seed;
  bool paper = false, desk = false;
  std::string output;
  app.add_option("--seed", seed, "Override the base seed");
  auto* paper_flag = app.add_flag("--paper-preset", paper, "Use the paper-scale preset");
  app.add_flag("--desk-preset", desk, "Use the desk-scale preset")->excludes(paper_flag);
  app.add_option("-o,--output", output, "Output directory");
  app.add_flag("-v,--verbose", verbosity, "Increase verbosity (repeatable)");

  std::string config_path;
  Command command = Command::Run;
  struct Sub {
    const char* name;
    const char* help;
    Command command;
  };
  for (const Sub& s : {Sub{"run", "Single trajectory with optional snapshots", Command::Run},
                       Sub{"converge-space", "Spatial strong-error study", Command::ConvergeSpace},
                       Sub{"converge-time", "Temporal strong-error study", Command::ConvergeTime},
                       Sub{"energy", "Energy ensemble", Command::Energy}}) {
    auto* sub = app.add_subcommand(s.name, s.help);
    sub->add_option("config", config_path, "Configuration file")->required()->check(CLI::ExistingFile);
    sub->callback([&command, c = s.command] { command = c; });
  }

  CLI11_PARSE(app, argc, argv);

  try {
    ConfigOverrides ov;
    ov.seed = seed;
    if (paper) ov.preset = Preset::Paper;
    if (desk) ov.preset = Preset::Desk;
    if (!output.empty()) ov.output_dir = output;
    const RunManifest manifest = parse_config(config_path, ov);
    const fs::path dir = manifest.output_dir;
    fs::create_directories(dir);
    log(1, "scenario " + manifest.scenario + " (" + to_string(manifest.preset) + " preset)" +
               (manifest.imex ? ", IMEX" : ""));
    const auto start = std::chrono::steady_clock::now();
    switch (command) {
      case Command::Run: command_run(manifest, dir); break;
      case Command::Energy: command_energy(manifest, dir); break;
      case Command::ConvergeSpace: command_converge(manifest, dir, true); break;
      case Command::ConvergeTime: command_converge(manifest, dir, false); break;
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    log(1, "done in " + format_number(secs) + " s");
  } catch (const ConfigError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
