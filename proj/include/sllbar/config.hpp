#pragma once

// Sectioned key = value run configuration. Every key is optional except
// [scenario] name; omitted values come from the scenario's desk or paper
// preset. Unknown sections and keys are rejected.

#include <charconv>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <boost/property_tree/ini_parser.hpp>
#include <boost/property_tree/ptree.hpp>

#include "sllbar/errors.hpp"
#include "sllbar/experiments.hpp"
#include "sllbar/scenarios.hpp"

namespace sllbar {

class ConfigError : public Error {
public:
  ConfigError(const std::string& kind, const std::string& what) : Error("config", kind + ": " + what), kind_(kind) {}
  const std::string& kind() const noexcept { return kind_; }

private:
  std::string kind_;
};

class MissingKey : public ConfigError {
public:
  explicit MissingKey(const std::string& key) : ConfigError("MissingKey", "required key '" + key + "' is absent") {}
};

class TypeMismatch : public ConfigError {
public:
  TypeMismatch(const std::string& key, const std::string& value, const std::string& expected)
      : ConfigError("TypeMismatch", "key '" + key + "' = '" + value + "' is not " + expected) {}
};

class UnknownScenario : public ConfigError {
public:
  explicit UnknownScenario(const std::string& name) : ConfigError("UnknownScenario", "no scenario named '" + name + "'") {}
};

class UnknownKey : public ConfigError {
public:
  explicit UnknownKey(const std::string& key) : ConfigError("UnknownKey", "unrecognised key '" + key + "'") {}
};

enum class Preset { Desk, Paper };

inline std::string to_string(Preset p) { return p == Preset::Desk ? "desk" : "paper"; }

enum class Command { Run, ConvergeSpace, ConvergeTime, Energy };

/// Fully resolved configuration: one experiment description per command.
struct RunManifest {
  std::string scenario;
  Preset preset = Preset::Desk;
  ExperimentConfig run;
  ExperimentConfig energy;
  ExperimentConfig space;
  ExperimentConfig time;
  /// Write u/H snapshots every this many steps during `run`; 0 disables.
  std::size_t snapshot_stride = 0;
  std::string output_dir = "out";
  /// Both bilinear coefficients vanish: every step is one linear solve.
  bool imex = false;

  const ExperimentConfig& experiment(Command c) const {
    switch (c) {
      case Command::Run: return run;
      case Command::Energy: return energy;
      case Command::ConvergeSpace: return space;
      case Command::ConvergeTime: return time;
    }
    return run;
  }

  void set_seed(std::uint64_t seed) {
    for (auto* e : {&run, &energy, &space, &time}) e->base_seed = seed;
  }
  void set_threads(unsigned threads) {
    for (auto* e : {&run, &energy, &space, &time}) e->threads = threads;
  }
};

struct ConfigOverrides {
  std::optional<Preset> preset;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> output_dir;
};

namespace detail {

struct StudyScale {
  double T;
  SweepPoint reference;
  std::vector<SweepPoint> sweep;
  std::size_t samples;
};

struct ScaleSet {
  double run_T;
  SweepPoint run;
  double energy_T;
  SweepPoint energy;
  std::size_t energy_samples;
  StudyScale space;
  StudyScale time;
};

inline std::vector<SweepPoint> levels_at(std::vector<int> levels, std::size_t steps) {
  std::vector<SweepPoint> out;
  for (int l : levels) out.push_back({l, steps});
  return out;
}

inline std::vector<SweepPoint> steps_at(int level, std::vector<std::size_t> steps) {
  std::vector<SweepPoint> out;
  for (auto s : steps) out.push_back({level, s});
  return out;
}

inline ScaleSet preset_scales(Profile scenario, Preset preset) {
  const bool paper = preset == Preset::Paper;
  switch (scenario) {
    case Profile::Sim2:
      if (paper)
        return {0.2, {4, 20}, 0.2, {4, 20}, 30,
                {0.2, {6, 160}, levels_at({2, 3, 4}, 160), 25},
                {0.2, {6, 160}, steps_at(6, {5, 10, 20}), 25}};
      return {0.2, {4, 20}, 0.2, {3, 20}, 10,
              {0.2, {5, 40}, levels_at({2, 3, 4}, 40), 5},
              {0.2, {4, 40}, steps_at(4, {5, 10, 20}), 5}};
    case Profile::Sim3:
      if (paper)
        return {0.2, {4, 10}, 0.2, {4, 10}, 30,
                {0.05, {6, 40}, levels_at({2, 3, 4}, 40), 25},
                {0.2, {6, 160}, steps_at(6, {5, 10, 20}), 25}};
      return {0.2, {4, 10}, 0.2, {3, 10}, 10,
              {0.05, {5, 20}, levels_at({2, 3, 4}, 20), 5},
              {0.2, {4, 40}, steps_at(4, {5, 10, 20}), 5}};
    default:
      if (paper)
        return {0.2, {4, 10}, 0.2, {4, 10}, 30,
                {0.05, {7, 160}, levels_at({2, 3, 4}, 160), 25},
                {0.05, {7, 160}, steps_at(7, {5, 10, 20}), 25}};
      return {0.2, {4, 20}, 0.2, {4, 10}, 30,
              {0.05, {7, 40}, levels_at({2, 3, 4}, 40), 10},
              {0.2, {5, 320}, steps_at(5, {10, 20, 40}), 10}};
  }
}

class Reader {
public:
  explicit Reader(const boost::property_tree::ptree& tree) : tree_(tree) {}

  std::optional<std::string> raw(const std::string& section, const std::string& key) {
    used_.insert(section + "." + key);
    auto sec = tree_.get_child_optional(section);
    if (!sec) return std::nullopt;
    auto v = sec->get_optional<std::string>(key);
    if (!v) return std::nullopt;
    return trim(*v);
  }

  std::string require(const std::string& section, const std::string& key) {
    auto v = raw(section, key);
    if (!v) throw MissingKey(section + "." + key);
    return *v;
  }

  template <class T>
  void get(const std::string& section, const std::string& key, T& target) {
    if (auto v = raw(section, key)) target = convert<T>(section + "." + key, *v);
  }

  template <class T>
  void require(const std::string& section, const std::string& key, T& target) {
    target = convert<T>(section + "." + key, require(section, key));
  }

  /// Throws UnknownKey for anything in the file that was never looked up.
  void reject_unused() const {
    for (const auto& [section, child] : tree_) {
      if (child.empty()) throw UnknownKey(section);
      for (const auto& [key, value] : child)
        if (!used_.count(section + "." + key)) throw UnknownKey(section + "." + key);
    }
  }

  static std::string trim(const std::string& s) {
    const auto b = s.find_first_not_of(" \t\r");
    if (b == std::string::npos) return {};
    const auto e = s.find_last_not_of(" \t\r");
    return s.substr(b, e - b + 1);
  }

  template <class T>
  static T convert(const std::string& key, const std::string& text) {
    if constexpr (std::is_same_v<T, std::string>) {
      return text;
    } else if constexpr (std::is_same_v<T, bool>) {
      if (text == "true" || text == "1" || text == "yes") return true;
      if (text == "false" || text == "0" || text == "no") return false;
      throw TypeMismatch(key, text, "a boolean");
    } else if constexpr (std::is_floating_point_v<T>) {
      T value{};
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || p != text.data() + text.size() || text.empty()) throw TypeMismatch(key, text, "a number");
      return value;
    } else if constexpr (std::is_integral_v<T>) {
      T value{};
      auto [p, ec] = std::from_chars(text.data(), text.data() + text.size(), value);
      if (ec != std::errc() || p != text.data() + text.size() || text.empty())
        throw TypeMismatch(key, text, std::is_signed_v<T> ? "an integer" : "a non-negative integer");
      return value;
    } else {
      // comma-separated list
      using E = typename T::value_type;
      T out;
      std::stringstream ss(text);
      std::string item;
      while (std::getline(ss, item, ',')) out.push_back(convert<E>(key, trim(item)));
      if (out.empty()) throw TypeMismatch(key, text, "a non-empty list");
      return out;
    }
  }

private:
  const boost::property_tree::ptree& tree_;
  std::set<std::string> used_;
};

inline Profile profile_or_throw(const std::string& key, const std::string& name) {
  try {
    return parse_profile(name);
  } catch (const InvalidArgument&) {
    throw TypeMismatch(key, name, "one of sim1, sim2, sim3, constant, zero");
  }
}

}  // namespace detail

/// Parses configuration text; see parse_config.
inline RunManifest parse_config_text(const std::string& text, const ConfigOverrides& overrides = {}) {
  boost::property_tree::ptree tree;
  {
    std::istringstream in(text);
    try {
      boost::property_tree::ini_parser::read_ini(in, tree);
    } catch (const boost::property_tree::ini_parser_error& e) {
      throw ConfigError("SyntaxError", "line " + std::to_string(e.line()) + ": " + e.message());
    }
  }
  detail::Reader r(tree);

  RunManifest m;
  m.scenario = r.require("scenario", "name");
  Profile base = Profile::Sim1;
  bool custom = false;
  if (m.scenario == "sim1") base = Profile::Sim1;
  else if (m.scenario == "sim2") base = Profile::Sim2;
  else if (m.scenario == "sim3") base = Profile::Sim3;
  else if (m.scenario == "custom") custom = true;
  else throw UnknownScenario(m.scenario);

  if (auto p = r.raw("scenario", "preset")) {
    if (*p == "desk") m.preset = Preset::Desk;
    else if (*p == "paper") m.preset = Preset::Paper;
    else throw TypeMismatch("scenario.preset", *p, "desk or paper");
  }
  if (overrides.preset) m.preset = *overrides.preset;

  ExperimentConfig e;
  e.scenario = m.scenario;
  if (custom) {
    const std::string mesh = r.require("scenario", "mesh");
    if (mesh == "interval") e.family = MeshFamily::Interval;
    else if (mesh == "square") e.family = MeshFamily::Square;
    else throw TypeMismatch("scenario.mesh", mesh, "interval or square");
    e.initial = detail::profile_or_throw("scenario.initial", r.require("scenario", "initial"));
    e.noise = detail::profile_or_throw("scenario.noise", r.require("scenario", "noise"));
    base = e.family == MeshFamily::Interval ? Profile::Sim1 : Profile::Sim2;
    for (const char* key : {"lambda1", "lambda2", "gamma", "kappa", "mu", "beta1", "beta2"}) r.require("model", key);
  } else {
    if (r.raw("scenario", "mesh")) throw UnknownKey("scenario.mesh (only custom scenarios choose a mesh)");
    e.family = natural_family(base);
    e.initial = base;
    e.noise = base;
    e.params = scenario_params(base);
    if (auto v = r.raw("scenario", "initial")) e.initial = detail::profile_or_throw("scenario.initial", *v);
    if (auto v = r.raw("scenario", "noise")) e.noise = detail::profile_or_throw("scenario.noise", *v);
  }

  ModelParams& p = e.params;
  r.get("model", "lambda1", p.lambda1);
  r.get("model", "lambda2", p.lambda2);
  r.get("model", "gamma", p.gamma);
  r.get("model", "kappa", p.kappa);
  r.get("model", "mu", p.mu);
  r.get("model", "beta1", p.beta1);
  r.get("model", "beta2", p.beta2);
  r.get("model", "R", p.R);
  if (auto v = r.raw("model", "nu")) {
    const auto nu = detail::Reader::convert<std::vector<double>>("model.nu", *v);
    if (nu.size() > 2) throw TypeMismatch("model.nu", *v, "one or two numbers");
    p.nu = Vec2(nu[0], nu.size() > 1 ? nu[1] : 0.0);
  }
  if (auto v = r.raw("model", "mass_source")) {
    if (*v == "zero") p.mass_source = MassSource::Zero;
    else if (*v == "linear") p.mass_source = MassSource::Linear;
    else throw TypeMismatch("model.mass_source", *v, "zero or linear");
  }

  r.get("sampling", "seed", e.base_seed);
  r.get("sampling", "threads", e.threads);
  r.get("sampling", "norms", e.norms);

  SolverConfig& s = e.solver;
  if (auto v = r.raw("solver", "method")) {
    if (*v == "picard") s.method = NonlinearMethod::Picard;
    else if (*v == "newton") s.method = NonlinearMethod::Newton;
    else if (*v == "picard-newton") s.method = NonlinearMethod::PicardThenNewton;
    else throw TypeMismatch("solver.method", *v, "picard, newton or picard-newton");
  }
  r.get("solver", "tolerance", s.picard_tol);
  r.get("solver", "max_iterations", s.picard_max_iters);
  r.get("solver", "linear_tolerance", s.linear_tol);

  const detail::ScaleSet sc = detail::preset_scales(base, m.preset);

  m.run = e;
  m.run.T = sc.run_T;
  m.run.run = sc.run;
  m.run.samples = 1;
  r.get("run", "T", m.run.T);
  r.get("run", "level", m.run.run.level);
  r.get("run", "steps", m.run.run.steps);
  r.get("run", "snapshot_stride", m.snapshot_stride);

  m.energy = e;
  m.energy.T = sc.energy_T;
  m.energy.run = sc.energy;
  m.energy.samples = sc.energy_samples;
  r.get("energy", "T", m.energy.T);
  r.get("energy", "level", m.energy.run.level);
  r.get("energy", "steps", m.energy.run.steps);
  r.get("energy", "samples", m.energy.samples);

  auto study = [&](const char* section, const detail::StudyScale& scale, bool spatial) {
    ExperimentConfig x = e;
    x.T = scale.T;
    x.reference = scale.reference;
    x.sweep = scale.sweep;
    x.samples = scale.samples;
    r.get(section, "T", x.T);
    r.get(section, "samples", x.samples);
    r.get(section, "reference_level", x.reference.level);
    r.get(section, "reference_steps", x.reference.steps);
    x.run = x.reference;
    if (spatial) {
      std::vector<int> levels;
      for (const auto& pt : scale.sweep) levels.push_back(pt.level);
      r.get(section, "levels", levels);
      x.sweep = detail::levels_at(levels, x.reference.steps);
    } else {
      std::vector<std::size_t> steps;
      for (const auto& pt : scale.sweep) steps.push_back(pt.steps);
      r.get(section, "steps", steps);
      x.sweep = detail::steps_at(x.reference.level, steps);
    }
    return x;
  };
  m.space = study("space", sc.space, true);
  m.time = study("time", sc.time, false);

  r.get("output", "directory", m.output_dir);
  if (overrides.output_dir) m.output_dir = *overrides.output_dir;
  r.reject_unused();

  if (overrides.seed) m.set_seed(*overrides.seed);
  m.imex = e.params.is_imex();
  for (const auto* x : {&m.run, &m.energy, &m.space, &m.time}) x->validate();
  return m;
}

inline RunManifest parse_config(const std::filesystem::path& path, const ConfigOverrides& overrides = {}) {
  std::ifstream in(path);
  if (!in) throw ConfigError("FileError", "cannot open '" + path.string() + "'");
  std::stringstream buffer;
  buffer << in.rdbuf();
  return parse_config_text(buffer.str(), overrides);
}

}  // namespace sllbar
