#pragma once

#include <stdexcept>
#include <string>

namespace vdlab {

struct Error : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Invalid grid or scenario configuration.
struct ConfigError : Error {
  using Error::Error;
};

// A parameter outside the range an operation accepts (p < 1, alpha outside (0,1), ...).
struct DomainError : Error {
  using Error::Error;
};

// Kernel or trajectory too coarse for the requested scale.
struct ResolutionError : Error {
  using Error::Error;
};

// Test function support does not fit inside the mollified time range.
struct SupportError : Error {
  using Error::Error;
};

struct ConvergenceError : Error {
  ConvergenceError(const std::string& what, int iters, double res)
      : Error(what), iterations(iters), residual(res) {}
  int iterations;
  double residual;
};

struct CflError : Error {
  CflError(const std::string& what, double cfl) : Error(what), cfl_number(cfl) {}
  double cfl_number;
};

struct DensityFloorError : Error {
  DensityFloorError(const std::string& what, double t, double rho)
      : Error(what), time(t), min_density(rho) {}
  double time;
  double min_density;
};

}  // namespace vdlab
