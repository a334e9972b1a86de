#pragma once

#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

namespace sllbar {

/// Base class of every error raised by the library. The message is prefixed
/// with the originating module so the CLI can print it verbatim.
class Error : public std::runtime_error {
public:
  Error(std::string module, const std::string& what)
      : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

  const std::string& module() const noexcept { return module_; }

private:
  std::string module_;
};

class MeshMismatch : public Error {
public:
  explicit MeshMismatch(const std::string& what) : Error("mesh", what) {}
};

class InvalidArgument : public Error {
public:
  InvalidArgument(std::string module, const std::string& what)
      : Error(std::move(module), what) {}
};

class LinearSolveFailed : public Error {
public:
  LinearSolveFailed(std::string module, const std::string& what)
      : Error(std::move(module), "linear solve failed: " + what) {}
};

/// Raised when the nonlinear iteration of one time step does not reach its
/// tolerance. `history` holds the L2 norm of successive iterate updates.
class PicardDiverged : public Error {
public:
  PicardDiverged(const std::string& what, std::vector<double> history)
      : Error("stepper", what), history_(std::move(history)) {}

  const std::vector<double>& history() const noexcept { return history_; }

private:
  std::vector<double> history_;
};

}  // namespace sllbar
