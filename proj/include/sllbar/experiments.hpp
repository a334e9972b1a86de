#pragma once

// Monte Carlo harness: strong-error convergence studies against a reference
// discretisation driven by the same Brownian path, energy ensembles, and the
// CSV formats they are written in.

#include <algorithm>
#include <array>
#include <atomic>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <exception>
#include <map>
#include <ostream>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include "sllbar/errors.hpp"
#include "sllbar/fields.hpp"
#include "sllbar/observables.hpp"
#include "sllbar/scenarios.hpp"
#include "sllbar/stepper.hpp"
#include "sllbar/stochastic.hpp"

namespace sllbar {

struct SweepPoint {
  int level = 0;
  std::size_t steps = 1;

  friend bool operator==(const SweepPoint&, const SweepPoint&) = default;
};

class NonNestingSweep : public Error {
public:
  explicit NonNestingSweep(const std::string& what) : Error("experiments", "non-nesting sweep: " + what) {}
};

struct ExperimentConfig {
  std::string scenario = "sim1";
  MeshFamily family = MeshFamily::Interval;
  Profile initial = Profile::Sim1;
  Profile noise = Profile::Sim1;
  std::uint64_t base_seed = 1;
  std::size_t samples = 25;
  double T = 0.05;
  /// Discretisation used by single runs and energy ensembles.
  SweepPoint run{4, 10};
  SweepPoint reference{7, 160};
  std::vector<SweepPoint> sweep;
  ModelParams params;
  SolverConfig solver;
  std::vector<int> norms{0, 1};
  /// Worker threads for independent samples; 0 picks the hardware count.
  unsigned threads = 0;

  double reference_k() const { return T / static_cast<double>(reference.steps); }

  void validate() const {
    params.validate();
    solver.validate();
    if (!(T > 0.0)) throw InvalidArgument("experiments", "final time must be positive");
    if (samples < 1) throw InvalidArgument("experiments", "at least one sample is required");
    if (reference.steps < 1 || run.steps < 1) throw InvalidArgument("experiments", "step counts must be positive");
    for (int s : norms)
      if (s != 0 && s != 1) throw InvalidArgument("experiments", "norm index must be 0 or 1");
    for (const auto& p : sweep) {
      if (p.level > reference.level)
        throw NonNestingSweep("level " + std::to_string(p.level) + " is finer than the reference level " +
                              std::to_string(reference.level));
      if (p.level < 0) throw NonNestingSweep("negative level");
      if (p.steps < 1 || reference.steps % p.steps != 0)
        throw NonNestingSweep("step count " + std::to_string(p.steps) + " does not divide the reference step count " +
                              std::to_string(reference.steps));
    }
  }
};

struct ConvergenceRow {
  int level = 0;
  double h = 0.0;
  std::size_t steps = 0;
  double k = 0.0;
  std::size_t M = 0;
  double E0_u = 0.0;
  double E1_u = 0.0;
  double E0_H = 0.0;
  double E1_H = 0.0;

  double column(const std::string& name) const {
    if (name == "E0_u") return E0_u;
    if (name == "E1_u") return E1_u;
    if (name == "E0_H") return E0_H;
    if (name == "E1_H") return E1_H;
    throw InvalidArgument("experiments", "unknown error column " + name);
  }
};

struct RateFit {
  std::string column;
  double slope = 0.0;
  double residual = 0.0;
};

enum class SweepAxis { Space, Time };

struct ConvergenceReport {
  SweepAxis axis = SweepAxis::Space;
  std::vector<ConvergenceRow> rows;
  /// Slopes of log(error) against log(h) or log(k): positive means convergence.
  std::vector<RateFit> rates;
  /// Share of samples whose H1 error of u does not increase with the level.
  double monotone_fraction = 1.0;

  const RateFit* rate(const std::string& column) const {
    for (const auto& r : rates)
      if (r.column == column) return &r;
    return nullptr;
  }
};

/// Least-squares slope of log(err) against log(x) and the RMS deviation of
/// the fit in log space.
inline RateFit fit_rate(const std::vector<std::pair<double, double>>& points) {
  if (points.size() < 2) throw InvalidArgument("experiments", "rate fit needs at least two points");
  double sx = 0.0, sy = 0.0;
  for (auto [x, e] : points) {
    if (!(x > 0.0) || !(e > 0.0)) throw InvalidArgument("experiments", "rate fit needs positive data");
    sx += std::log(x);
    sy += std::log(e);
  }
  const double n = static_cast<double>(points.size());
  const double mx = sx / n, my = sy / n;
  double sxx = 0.0, sxy = 0.0;
  for (auto [x, e] : points) {
    sxx += (std::log(x) - mx) * (std::log(x) - mx);
    sxy += (std::log(x) - mx) * (std::log(e) - my);
  }
  if (sxx == 0.0) throw InvalidArgument("experiments", "rate fit needs distinct abscissae");
  RateFit fit;
  fit.slope = sxy / sxx;
  double ss = 0.0;
  for (auto [x, e] : points) {
    const double d = std::log(e) - (my + fit.slope * (std::log(x) - mx));
    ss += d * d;
  }
  fit.residual = std::sqrt(ss / n);
  return fit;
}

/// Runs fn(i) for i in [0, n) on up to `threads` workers. Exceptions are
/// collected per index and the one with the lowest index is rethrown.
template <class Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads == 0) threads = std::max(1u, std::thread::hardware_concurrency());
  threads = static_cast<unsigned>(std::min<std::size_t>(threads, std::max<std::size_t>(n, 1)));
  std::vector<std::exception_ptr> errors(n);
  std::atomic<std::size_t> next{0};
  auto worker = [&] {
    for (std::size_t i = next++; i < n; i = next++) {
      try {
        fn(i);
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  if (threads <= 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (unsigned t = 0; t < threads; ++t) pool.emplace_back(worker);
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

/// Caches one FeSpace per refinement level of a family.
class SpaceCache {
public:
  explicit SpaceCache(MeshFamily family) : family_(family) {}

  SpacePtr get(int level) {
    auto it = spaces_.find(level);
    if (it == spaces_.end()) it = spaces_.emplace(level, FeSpace::create(build_mesh(family_, level))).first;
    return it->second;
  }

private:
  MeshFamily family_;
  std::map<int, SpacePtr> spaces_;
};

/// Final state of one trajectory on `space` with the given increments.
inline TrajectoryResult simulate(const ExperimentConfig& config, const SpacePtr& space,
                                 std::span<const double> increments, const StepObserver& observe = {}) {
  const double k = config.T / static_cast<double>(increments.size());
  MixedScheme scheme(space, config.params, noise_profile(config.noise), config.solver);
  const FeField u0 = l2_project(space, initial_datum(config.initial, config.params.mu));
  return run_trajectory(scheme, u0, increments, k, observe);
}

namespace detail {

inline ConvergenceReport run_convergence(const ExperimentConfig& config, SweepAxis axis) {
  config.validate();
  SpaceCache cache(config.family);
  const SpacePtr ref_space = cache.get(config.reference.level);
  for (const auto& p : config.sweep) cache.get(p.level);

  const std::size_t npts = config.sweep.size();
  // errors[m][p] = {e0u, e1u, e0H, e1H}
  std::vector<std::vector<std::array<double, 4>>> errors(config.samples, std::vector<std::array<double, 4>>(npts));

  parallel_for(config.samples, config.threads, [&](std::size_t m) {
    const BrownianPath path = sample_path(sample_seed(config.base_seed, m), config.T, config.reference.steps);
    SchemeState ref;
    try {
      ref = simulate(config, ref_space, path.increments).final_state;
    } catch (const Error& e) {
      throw Error("experiments", "sample " + std::to_string(m) + ", reference level " +
                                     std::to_string(config.reference.level) + ": " + e.what());
    }
    for (std::size_t p = 0; p < npts; ++p) {
      const SweepPoint& pt = config.sweep[p];
      if (pt == config.reference) {
        errors[m][p] = {0.0, 0.0, 0.0, 0.0};
        continue;
      }
      const std::vector<double> dw = coarsen(path, config.reference.steps / pt.steps);
      SchemeState s;
      try {
        s = simulate(config, cache.get(pt.level), dw).final_state;
      } catch (const Error& e) {
        throw Error("experiments", "sample " + std::to_string(m) + ", level " + std::to_string(pt.level) +
                                       ", steps " + std::to_string(pt.steps) + ": " + e.what());
      }
      errors[m][p] = {strong_error(s.u, ref.u, 0), strong_error(s.u, ref.u, 1), strong_error(s.H, ref.H, 0),
                      strong_error(s.H, ref.H, 1)};
    }
  });

  ConvergenceReport report;
  report.axis = axis;
  for (std::size_t p = 0; p < npts; ++p) {
    std::array<double, 4> sq{};
    for (std::size_t m = 0; m < config.samples; ++m)
      for (int c = 0; c < 4; ++c) sq[c] += errors[m][p][c] * errors[m][p][c];
    const double M = static_cast<double>(config.samples);
    ConvergenceRow row;
    row.level = config.sweep[p].level;
    row.h = std::ldexp(1.0, -row.level);
    row.steps = config.sweep[p].steps;
    row.k = config.T / static_cast<double>(row.steps);
    row.M = config.samples;
    row.E0_u = std::sqrt(sq[0] / M);
    row.E1_u = std::sqrt(sq[1] / M);
    row.E0_H = std::sqrt(sq[2] / M);
    row.E1_H = std::sqrt(sq[3] / M);
    report.rows.push_back(row);
  }

  if (axis == SweepAxis::Space && npts >= 2) {
    std::size_t monotone = 0;
    for (std::size_t m = 0; m < config.samples; ++m) {
      bool ok = true;
      for (std::size_t p = 0; p < npts; ++p)
        for (std::size_t q = 0; q < npts; ++q)
          if (config.sweep[q].level > config.sweep[p].level && errors[m][q][1] > errors[m][p][1]) ok = false;
      monotone += ok ? 1 : 0;
    }
    report.monotone_fraction = static_cast<double>(monotone) / static_cast<double>(config.samples);
  }

  if (npts >= 2) {
    for (int s : {0, 1}) {
      if (std::find(config.norms.begin(), config.norms.end(), s) == config.norms.end()) continue;
      for (const char* field : {"u", "H"}) {
        const std::string column = "E" + std::to_string(s) + "_" + field;
        std::vector<std::pair<double, double>> pts;
        bool positive = true;
        for (const auto& row : report.rows) {
          const double x = axis == SweepAxis::Space ? row.h : row.k;
          positive = positive && row.column(column) > 0.0;
          pts.emplace_back(x, row.column(column));
        }
        if (!positive) continue;
        RateFit fit = fit_rate(pts);
        fit.column = column;
        report.rates.push_back(fit);
      }
    }
  }
  return report;
}

}  // namespace detail

/// Meshes vary, every sweep point runs on the reference time grid.
inline ConvergenceReport run_spatial_convergence(const ExperimentConfig& config) {
  for (const auto& p : config.sweep)
    if (p.steps != config.reference.steps)
      throw NonNestingSweep("spatial sweeps must use the reference step count " + std::to_string(config.reference.steps));
  return detail::run_convergence(config, SweepAxis::Space);
}

/// Step counts vary on the reference mesh; increments come from coarsening
/// the reference path.
inline ConvergenceReport run_temporal_convergence(const ExperimentConfig& config) {
  for (const auto& p : config.sweep)
    if (p.level != config.reference.level)
      throw NonNestingSweep("temporal sweeps must use the reference level " + std::to_string(config.reference.level));
  return detail::run_convergence(config, SweepAxis::Time);
}

struct EnergyEnsemble {
  std::vector<std::vector<EnergySample>> traces;
  std::vector<EnergySample> mean;
  /// Largest nodal |u| over every sample and step.
  double max_pointwise_u = 0.0;
};

/// Energy after every step of config.samples trajectories at config.run.
inline EnergyEnsemble run_energy_ensemble(const ExperimentConfig& config) {
  config.validate();
  const SpacePtr space = FeSpace::create(build_mesh(config.family, config.run.level));
  EnergyEnsemble out;
  out.traces.resize(config.samples);
  std::vector<double> max_u(config.samples, 0.0);
  parallel_for(config.samples, config.threads, [&](std::size_t m) {
    const BrownianPath path = sample_path(sample_seed(config.base_seed, m), config.T, config.run.steps);
    auto& trace = out.traces[m];
    trace.reserve(config.run.steps + 1);
    try {
      const auto result = simulate(config, space, path.increments, [&](const SchemeState& s) {
        trace.push_back({s.t, energy(s.u, config.params.kappa, config.params.mu)});
      });
      max_u[m] = result.max_pointwise_u;
    } catch (const Error& e) {
      throw Error("experiments", "sample " + std::to_string(m) + ": " + e.what());
    }
  });
  out.max_pointwise_u = *std::max_element(max_u.begin(), max_u.end());
  out.mean = out.traces.front();
  for (std::size_t n = 0; n < out.mean.size(); ++n) {
    double sum = 0.0;
    for (const auto& tr : out.traces) sum += tr[n].value;
    out.mean[n].value = sum / static_cast<double>(config.samples);
  }
  return out;
}

// ---- CSV output ----------------------------------------------------------

inline std::string format_number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline void write_report_csv(std::ostream& out, const ConvergenceReport& report) {
  out << "level,h,steps,k,M,E0_u,E1_u,E0_H,E1_H\n";
  for (const auto& r : report.rows) {
    out << r.level << ',' << format_number(r.h) << ',' << r.steps << ',' << format_number(r.k) << ',' << r.M << ','
        << format_number(r.E0_u) << ',' << format_number(r.E1_u) << ',' << format_number(r.E0_H) << ','
        << format_number(r.E1_H) << '\n';
  }
  for (const auto& fit : report.rates)
    out << "# rate " << fit.column << ' ' << format_number(fit.slope) << ' ' << format_number(fit.residual) << '\n';
}

/// Energy trace rows `sample,t,energy`; `label` fills the sample column.
inline void write_energy_csv(std::ostream& out, const std::vector<EnergySample>& trace, const std::string& label,
                             bool header = true) {
  if (header) out << "sample,t,energy\n";
  for (const auto& e : trace) out << label << ',' << format_number(e.t) << ',' << format_number(e.value) << '\n';
}

}  // namespace sllbar
