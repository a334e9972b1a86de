#pragma once

// One step of the semi-implicit mixed finite element scheme for (u, H):
//
//   (u - u_prev, chi) = k l1 (H, chi) + k l2 (grad H, grad chi) - k g (u x H, chi)
//                       + k (C(u), chi) + k (M_R(u_prev), chi) + (G(u_prev), chi) dW
//   (H, phi)          = -(grad u, grad phi) + (f_R(u_prev), phi)
//
// The two terms bilinear in the unknowns (u x H and u x (nu . grad) u) are
// linearised by lagging u (Picard), falling back to damped Newton with a
// continuation in the bilinear coefficients when Picard fails; every iteration
// solves one 6n x 6n sparse system with a sparse LU factorization.

#include <cmath>
#include <cstddef>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <Eigen/SparseLU>

#include "sllbar/errors.hpp"
#include "sllbar/fields.hpp"
#include "sllbar/physics.hpp"

namespace sllbar {

enum class NonlinearMethod {
  Picard,
  Newton,
  /// Picard first; if it fails to converge, restart the step with Newton.
  PicardThenNewton,
};

struct SolverConfig {
  /// Stopping threshold on the L2 norm of the u-iterate update.
  double picard_tol = 1e-10;
  int picard_max_iters = 50;
  double linear_tol = 1e-12;
  NonlinearMethod method = NonlinearMethod::PicardThenNewton;

  void validate() const {
    if (!(picard_tol > 0.0) || !(linear_tol > 0.0) || picard_max_iters < 1)
      throw InvalidArgument("stepper", "solver tolerances and iteration bound must be positive");
  }
};

struct SchemeState {
  std::size_t n = 0;
  double t = 0.0;
  FeField u;
  FeField H;
};

struct StepStats {
  int iterations = 0;
  bool used_newton = false;
  std::vector<double> history;
};

/// Residual of both equations of the scheme, tested against every basis
/// function (Euclidean norms of the residual vectors).
struct SchemeResidual {
  double u_equation = 0.0;
  double H_equation = 0.0;
};

/// Integrator for one trajectory. Holds a reference to a shared, immutable
/// FeSpace plus per-trajectory caches, so one instance must not be used from
/// several threads at once.
class MixedScheme {
public:
  MixedScheme(SpacePtr space, ModelParams params, const VectorField& g, SolverConfig config = {})
      : space_(std::move(space)), params_(params), config_(config) {
    params_.validate();
    config_.validate();
    const auto& mesh = space_->mesh();
    const std::size_t nq = space_->rule().size();
    g_at_q_.resize(mesh.num_cells() * nq, Vec3::Zero());
    if (g) {
      for (std::size_t c = 0; c < mesh.num_cells(); ++c)
        for (std::size_t q = 0; q < nq; ++q) g_at_q_[c * nq + q] = g(space_->qpoint(c, q));
    }
    build_transport();
  }

  const SpacePtr& space() const noexcept { return space_; }
  const ModelParams& params() const noexcept { return params_; }
  const SolverConfig& config() const noexcept { return config_; }

  /// State at n = 0. H^0 solves the second equation with u = u_prev = u0.
  SchemeState initial_state(const FeField& u0) const {
    if (u0.space() != space_) throw InvalidArgument("stepper", "initial datum lives on a different mesh");
    const NodalValues rhs = force_load(u0.coeffs()) - space_->stiffness() * u0.coeffs();
    return SchemeState{0, 0.0, u0, FeField(space_, space_->solve_mass(rhs))};
  }

  /// Advances prev by one step of size k with Wiener increment dW.
  SchemeState step(const SchemeState& prev, double dW, double k, StepStats* stats = nullptr) {
    if (!(k > 0.0)) throw InvalidArgument("stepper", "time step must be positive");
    const StepLoads loads = step_loads(prev.u.coeffs(), dW, k);

    StepStats local;
    StepStats& st = stats ? *stats : local;
    st = StepStats{};

    std::optional<Eigen::VectorXd> x;
    if (config_.method != NonlinearMethod::Newton) {
      try {
        x = picard(prev, loads, k, st);
      } catch (const PicardDiverged&) {
        if (config_.method != NonlinearMethod::PicardThenNewton) throw;
      }
    }
    if (!x) {
      StepStats newton_stats;
      x = newton(prev, loads, k, newton_stats);
      newton_stats.used_newton = true;
      newton_stats.iterations += st.iterations;
      newton_stats.history.insert(newton_stats.history.begin(), st.history.begin(), st.history.end());
      st = std::move(newton_stats);
    }

    SchemeState next;
    next.n = prev.n + 1;
    next.t = static_cast<double>(next.n) * k;
    next.u = FeField(space_, unpack(*x, 0));
    next.H = FeField(space_, unpack(*x, 3));
    return next;
  }

  /// Residuals of the fully nonlinear scheme at (u, H).
  SchemeResidual residual(const SchemeState& prev, const FeField& u, const FeField& H, double dW, double k) const {
    const StepLoads loads = step_loads(prev.u.coeffs(), dW, k);
    const SparseMatrix a = system_matrix(u.coeffs(), k);
    const Eigen::VectorXd r = a * pack(u.coeffs(), H.coeffs()) - loads.rhs;
    double ru = 0.0, rh = 0.0;
    for (Eigen::Index i = 0; i < space_->size(); ++i) {
      ru += r.segment<3>(6 * i).squaredNorm();
      rh += r.segment<3>(6 * i + 3).squaredNorm();
    }
    return {std::sqrt(ru), std::sqrt(rh)};
  }

  /// L2 norm of a nodal difference.
  double l2(const NodalValues& d) const { return std::sqrt(std::max(0.0, (d.transpose() * (space_->mass() * d)).trace())); }

  // Unknown ordering: vertex i owns [6i, 6i+3) for u and [6i+3, 6i+6) for H.
  Eigen::VectorXd pack(const NodalValues& u, const NodalValues& H) const {
    Eigen::VectorXd x(6 * space_->size());
    for (Eigen::Index i = 0; i < space_->size(); ++i) {
      x.segment<3>(6 * i) = u.row(i).transpose();
      x.segment<3>(6 * i + 3) = H.row(i).transpose();
    }
    return x;
  }

  NodalValues unpack(const Eigen::VectorXd& x, int offset) const {
    NodalValues out(space_->size(), 3);
    for (Eigen::Index i = 0; i < space_->size(); ++i) out.row(i) = x.segment<3>(6 * i + offset).transpose();
    return out;
  }

  /// Assembled block matrix of the linearisation with lagged field w.
  SparseMatrix system_matrix(const NodalValues& w, double k, double scale = 1.0) const {
    Triplets t;
    add_constant_blocks(t, k);
    add_lagged_blocks(t, w, k, scale);
    SparseMatrix a(6 * space_->size(), 6 * space_->size());
    a.setFromTriplets(t.begin(), t.end());
    return a;
  }

  /// Right-hand side of the block system for a given previous state.
  Eigen::VectorXd right_hand_side(const SchemeState& prev, double dW, double k) const {
    return step_loads(prev.u.coeffs(), dW, k).rhs;
  }

  /// (f_R(v), phi_i) by quadrature through the P1 basis.
  NodalValues force_load(const NodalValues& v) const {
    NodalValues b = NodalValues::Zero(space_->size(), 3);
    for_each_qpoint([&](std::size_t c, std::size_t q, double w, const auto& k) {
      const Vec3 f = truncated_force(value_at(*space_, v, c, q), params_);
      scatter(b, k, space_->rule().points[q], w * f);
    });
    return b;
  }

private:
  struct StepLoads {
    Eigen::VectorXd rhs;
  };

  template <class Fn>
  void for_each_qpoint(Fn&& fn) const {
    const auto& mesh = space_->mesh();
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& cell = mesh.cell(c);
      for (std::size_t q = 0; q < space_->rule().size(); ++q) fn(c, q, space_->qweight(c, q), cell);
    }
  }

  void scatter(NodalValues& b, const Mesh::Cell& cell, const std::array<double, 3>& bary, const Vec3& value) const {
    for (int a = 0; a < space_->mesh().vertices_per_cell(); ++a)
      b.row(static_cast<Eigen::Index>(cell[a])) += bary[a] * value.transpose();
  }

  StepLoads step_loads(const NodalValues& u_prev, double dW, double k) const {
    NodalValues force = NodalValues::Zero(space_->size(), 3);
    NodalValues drift = NodalValues::Zero(space_->size(), 3);
    const std::size_t nq = space_->rule().size();
    for_each_qpoint([&](std::size_t c, std::size_t q, double w, const auto& cell) {
      const Vec3 u = value_at(*space_, u_prev, c, q);
      const auto& bary = space_->rule().points[q];
      scatter(force, cell, bary, w * truncated_force(u, params_));
      const Vec3 extra = k * truncated_mass_source(u, params_) +
                         dW * noise_coefficient(u, g_at_q_[c * nq + q], params_);
      scatter(drift, cell, bary, w * extra);
    });
    const NodalValues u_rows = space_->mass() * u_prev + drift;
    return StepLoads{pack(u_rows, force)};
  }

  void build_transport() {
    // T_ij = int phi_i (nu . grad phi_j)
    const auto& mesh = space_->mesh();
    const int nv = mesh.vertices_per_cell();
    Triplets t;
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& cell = mesh.cell(c);
      const auto& g = space_->geometry(c);
      for (int a = 0; a < nv; ++a) {
        const double phi_integral = g.measure / static_cast<double>(nv);
        for (int b = 0; b < nv; ++b) {
          double dir = params_.nu(0) * g.grad[b][0];
          if (mesh.dim() == 2) dir += params_.nu(1) * g.grad[b][1];
          t.emplace_back(cell[a], cell[b], phi_integral * dir);
        }
      }
    }
    transport_.resize(space_->size(), space_->size());
    transport_.setFromTriplets(t.begin(), t.end());
  }

  static void add_scalar(Triplets& t, const SparseMatrix& m, double scale, int row_off, int col_off) {
    if (scale == 0.0) return;
    for (Eigen::Index j = 0; j < m.outerSize(); ++j)
      for (SparseMatrix::InnerIterator it(m, j); it; ++it)
        for (int c = 0; c < 3; ++c)
          t.emplace_back(6 * it.row() + row_off + c, 6 * it.col() + col_off + c, scale * it.value());
  }

  void add_constant_blocks(Triplets& t, double k) const {
    const auto& p = params_;
    add_scalar(t, space_->mass(), 1.0, 0, 0);
    add_scalar(t, transport_, -k * p.beta1, 0, 0);
    add_scalar(t, space_->mass(), -k * p.lambda1, 0, 3);
    add_scalar(t, space_->stiffness(), -k * p.lambda2, 0, 3);
    add_scalar(t, space_->stiffness(), 1.0, 3, 0);
    add_scalar(t, space_->mass(), 1.0, 3, 3);
  }

  static Mat3 skew(const Vec3& w) {
    Mat3 s;
    s << 0.0, -w(2), w(1), w(2), 0.0, -w(0), -w(1), w(0), 0.0;
    return s;  // s * z == w x z
  }

  /// Blocks from the linearisation: k gamma (w x H, chi) and
  /// -k beta2 (w x (nu . grad) u, chi), both multiplied by `scale`. With h
  /// given, also the derivative with respect to the lagged field at (w, h).
  void add_lagged_blocks(Triplets& t, const NodalValues& w, double k, double scale,
                         const NodalValues* h = nullptr) const {
    if (params_.is_imex()) return;
    ModelParams p = params_;
    p.gamma *= scale;
    p.beta2 *= scale;
    const auto& mesh = space_->mesh();
    const int nv = mesh.vertices_per_cell();
    for (std::size_t c = 0; c < mesh.num_cells(); ++c) {
      const auto& cell = mesh.cell(c);
      const auto& g = space_->geometry(c);
      double dir[3];
      for (int b = 0; b < nv; ++b) {
        dir[b] = p.nu(0) * g.grad[b][0];
        if (mesh.dim() == 2) dir[b] += p.nu(1) * g.grad[b][1];
      }
      Vec3 z = Vec3::Zero();  // (nu . grad) w, constant on the cell
      if (h) z = along_current(gradient_on(*space_, w, c), p, mesh.dim());

      for (std::size_t q = 0; q < space_->rule().size(); ++q) {
        const double wq = space_->qweight(c, q);
        const auto& bary = space_->rule().points[q];
        const Mat3 sw = skew(value_at(*space_, w, c, q));
        Mat3 du_extra = Mat3::Zero();
        if (h) du_extra = -k * p.gamma * skew(value_at(*space_, *h, c, q)) + k * p.beta2 * skew(z);
        for (int a = 0; a < nv; ++a) {
          for (int b = 0; b < nv; ++b) {
            const Mat3 uh = (wq * bary[a] * bary[b] * k * p.gamma) * sw;
            const Mat3 uu = (-wq * bary[a] * dir[b] * k * p.beta2) * sw + (wq * bary[a] * bary[b]) * du_extra;
            const auto row = static_cast<Eigen::Index>(6 * cell[a]);
            const auto col = static_cast<Eigen::Index>(6 * cell[b]);
            for (int r = 0; r < 3; ++r) {
              for (int s = 0; s < 3; ++s) {
                t.emplace_back(row + r, col + 3 + s, uh(r, s));
                t.emplace_back(row + r, col + s, uu(r, s));
              }
            }
          }
        }
      }
    }
  }

  Eigen::VectorXd solve(const SparseMatrix& a, const Eigen::VectorXd& rhs, Eigen::SparseLU<SparseMatrix>& lu,
                        bool& analysed) const {
    if (!analysed) {
      lu.analyzePattern(a);
      analysed = true;
    }
    lu.factorize(a);
    if (lu.info() != Eigen::Success)
      throw LinearSolveFailed("stepper", "block system factorization: " + lu.lastErrorMessage());
    return refine(a, lu, rhs);
  }

  /// Direct solve followed by up to three rounds of iterative refinement,
  /// targeting a normwise backward error of linear_tol.
  Eigen::VectorXd refine(const SparseMatrix& a, const Eigen::SparseLU<SparseMatrix>& lu,
                         const Eigen::VectorXd& rhs) const {
    Eigen::VectorXd x = lu.solve(rhs);
    if (lu.info() != Eigen::Success || !x.allFinite()) throw LinearSolveFailed("stepper", "block system solve");
    const double a_norm = (a.cwiseAbs() * Eigen::VectorXd::Ones(a.cols())).maxCoeff();
    double backward = 0.0;
    for (int round = 0; round < 4; ++round) {
      const Eigen::VectorXd r = rhs - a * x;
      const double scale = rhs.lpNorm<Eigen::Infinity>() + a_norm * x.lpNorm<Eigen::Infinity>();
      backward = scale > 0.0 ? r.lpNorm<Eigen::Infinity>() / scale : 0.0;
      if (backward <= config_.linear_tol || round == 3) break;
      x += lu.solve(r);
    }
    if (!x.allFinite() || backward > std::max(1e3 * config_.linear_tol, 1e-9))
      throw LinearSolveFailed("stepper", "backward error " + std::to_string(backward) + " above tolerance");
    return x;
  }

  Eigen::VectorXd picard(const SchemeState& prev, const StepLoads& loads, double k, StepStats& st) {
    if (params_.is_imex()) {
      // The system is linear: one solve, factorization reused across steps.
      if (!imex_lu_ || imex_k_ != k) {
        imex_matrix_ = system_matrix(prev.u.coeffs(), k);
        imex_lu_.emplace();
        imex_lu_->compute(imex_matrix_);
        if (imex_lu_->info() != Eigen::Success)
          throw LinearSolveFailed("stepper", "block system factorization: " + imex_lu_->lastErrorMessage());
        imex_k_ = k;
      }
      Eigen::VectorXd x = refine(imex_matrix_, *imex_lu_, loads.rhs);
      st.iterations = 1;
      st.history.push_back(l2(unpack(x, 0) - prev.u.coeffs()));
      return x;
    }

    NodalValues w = prev.u.coeffs();
    for (int m = 0; m < config_.picard_max_iters; ++m) {
      const SparseMatrix a = system_matrix(w, k);
      Eigen::VectorXd x = solve(a, loads.rhs, lu_, lu_analysed_);
      NodalValues u_next = unpack(x, 0);
      const double change = l2(u_next - w);
      st.iterations = m + 1;
      st.history.push_back(change);
      if (!std::isfinite(change)) break;
      if (change < config_.picard_tol) return x;
      w = std::move(u_next);
    }
    throw PicardDiverged("Picard iteration did not reach tolerance " + std::to_string(config_.picard_tol) +
                             " within " + std::to_string(config_.picard_max_iters) +
                             " iterations (last update " + std::to_string(st.history.back()) +
                             "); try a smaller time step",
                         st.history);
  }

  /// Damped Newton on the system whose bilinear coefficients are multiplied
  /// by `scale`. Updates (u, h) in place; returns false when the iteration
  /// budget is exhausted.
  bool damped_newton(NodalValues& u, NodalValues& h, const StepLoads& loads, double k, double scale, int max_iters,
                     StepStats& st) {
    auto residual_of = [&](const NodalValues& uu, const NodalValues& hh) {
      return Eigen::VectorXd(system_matrix(uu, k, scale) * pack(uu, hh) - loads.rhs);
    };
    Eigen::VectorXd r = residual_of(u, h);
    for (int m = 0; m < max_iters; ++m) {
      Triplets t;
      add_constant_blocks(t, k);
      add_lagged_blocks(t, u, k, scale, &h);
      SparseMatrix jac(r.size(), r.size());
      jac.setFromTriplets(t.begin(), t.end());
      const Eigen::VectorXd dx = solve(jac, -r, newton_lu_, newton_analysed_);
      const NodalValues du = unpack(dx, 0);
      const NodalValues dh = unpack(dx, 3);

      // Backtracking on the Euclidean residual norm.
      const double r0 = r.norm();
      double alpha = 1.0;
      Eigen::VectorXd r_trial = residual_of(u + du, h + dh);
      while (!(r_trial.norm() <= (1.0 - 1e-4 * alpha) * r0) && alpha > 1.0 / 1024.0) {
        alpha *= 0.5;
        r_trial = residual_of(u + alpha * du, h + alpha * dh);
      }
      u += alpha * du;
      h += alpha * dh;
      r = std::move(r_trial);
      const double change = alpha * l2(du);
      ++st.iterations;
      st.history.push_back(change);
      if (!std::isfinite(change)) return false;
      if (change < config_.picard_tol) return true;
    }
    return false;
  }

  /// Newton's method from (u_prev, H_prev); if it stalls, a continuation in
  /// the bilinear coefficients (gamma, beta2) from the linear problem up to
  /// the full one, each stage started from the previous stage's solution.
  Eigen::VectorXd newton(const SchemeState& prev, const StepLoads& loads, double k, StepStats& st) {
    NodalValues u = prev.u.coeffs();
    NodalValues h = prev.H.coeffs();
    if (damped_newton(u, h, loads, k, 1.0, config_.picard_max_iters, st)) return pack(u, h);

    const Eigen::VectorXd linear = solve(system_matrix(prev.u.coeffs(), k, 0.0), loads.rhs, newton_lu_, newton_analysed_);
    NodalValues u_done = unpack(linear, 0);
    NodalValues h_done = unpack(linear, 3);
    double reached = 0.0;
    double increment = 0.25;
    while (reached < 1.0) {
      const double target = std::min(1.0, reached + increment);
      u = u_done;
      h = h_done;
      if (damped_newton(u, h, loads, k, target, 25, st)) {
        reached = target;
        u_done = u;
        h_done = h;
        increment = std::min(0.5, 1.5 * increment);
      } else {
        increment *= 0.5;
        if (increment < 1.0 / 4096.0) break;
      }
    }
    if (reached == 1.0) return pack(u_done, h_done);
    throw PicardDiverged("Newton continuation stalled at " + std::to_string(reached) +
                             " of the bilinear coupling; try a smaller time step",
                         st.history);
  }

  SpacePtr space_;
  ModelParams params_;
  SolverConfig config_;
  std::vector<Vec3> g_at_q_;
  SparseMatrix transport_;

  Eigen::SparseLU<SparseMatrix> lu_;
  bool lu_analysed_ = false;
  Eigen::SparseLU<SparseMatrix> newton_lu_;
  bool newton_analysed_ = false;
  std::optional<Eigen::SparseLU<SparseMatrix>> imex_lu_;
  SparseMatrix imex_matrix_;
  double imex_k_ = 0.0;
};

/// Called with the state at n = 0 and after every accepted step.
using StepObserver = std::function<void(const SchemeState&)>;

struct TrajectoryResult {
  SchemeState final_state;
  /// Nonlinear iterations taken by each step.
  std::vector<int> iterations;
  /// Largest nodal |u| seen along the trajectory, initial datum included.
  double max_pointwise_u = 0.0;
};

/// Runs increments.size() steps of size k from u0 (already in V_h).
inline TrajectoryResult run_trajectory(MixedScheme& scheme, const FeField& u0, std::span<const double> increments,
                                       double k, const StepObserver& observe = {}) {
  TrajectoryResult result;
  result.final_state = scheme.initial_state(u0);
  result.max_pointwise_u = u0.max_pointwise_norm();
  if (observe) observe(result.final_state);
  result.iterations.reserve(increments.size());
  for (std::size_t n = 0; n < increments.size(); ++n) {
    StepStats stats;
    try {
      result.final_state = scheme.step(result.final_state, increments[n], k, &stats);
    } catch (const PicardDiverged& e) {
      throw PicardDiverged("step " + std::to_string(n + 1) + " (t = " + std::to_string(static_cast<double>(n + 1) * k) +
                               "): " + e.what(),
                           e.history());
    } catch (const Error& e) {
      throw Error("stepper", "step " + std::to_string(n + 1) + ": " + e.what());
    }
    if (!result.final_state.u.all_finite() || !result.final_state.H.all_finite())
      throw Error("stepper", "step " + std::to_string(n + 1) + ": non-finite solution");
    result.iterations.push_back(stats.iterations);
    result.max_pointwise_u = std::max(result.max_pointwise_u, result.final_state.u.max_pointwise_norm());
    if (observe) observe(result.final_state);
  }
  return result;
}

}  // namespace sllbar
