#pragma once

// Flow states and trajectories shared by the solver and the analysis code.

#include <cmath>
#include <concepts>
#include <cstddef>
#include <string>
#include <utility>
#include <vector>

#include "vdlab/grid.hpp"

namespace vdlab {

struct FlowState {
  PeriodicField rho;  // density, scalar
  PeriodicField u;    // velocity, dim components
  PeriodicField P;    // pressure, zero mean
  double t = 0.0;

  const Grid& grid() const { return rho.grid(); }
};

inline FlowState make_state(PeriodicField rho, PeriodicField u, double t = 0.0) {
  PeriodicField P(rho.grid(), 1);
  return FlowState{std::move(rho), std::move(u), std::move(P), t};
}

// E = int rho |u|^2 dx, without the factor 1/2.
inline double energy(const PeriodicField& rho, const PeriodicField& u) {
  const std::size_t np = rho.points();
  double s = 0.0;
  for (std::size_t i = 0; i < np; ++i) {
    double m = 0.0;
    for (int c = 0; c < u.components(); ++c) m += u.component(c)[i] * u.component(c)[i];
    s += rho[i] * m;
  }
  return s * rho.grid().cell_volume();
}
inline double energy(const FlowState& s) { return energy(s.rho, s.u); }

inline double mass(const FlowState& s) { return s.rho.integral(); }

// int rho u_i dx per component.
inline std::vector<double> momentum(const FlowState& s) {
  std::vector<double> m;
  for (int c = 0; c < s.u.components(); ++c) m.push_back(inner_product(s.rho, s.u.component_field(c)));
  return m;
}

// Anything that yields uniformly spaced snapshots by index. Stored
// trajectories and lazily generated synthetic ones both qualify.
template <class S>
concept SnapshotSource = requires(const S& s, std::size_t i) {
  { s.size() } -> std::convertible_to<std::size_t>;
  { s.time(i) } -> std::convertible_to<double>;
  { s.grid() } -> std::convertible_to<Grid>;
  { s.state(i) } -> std::convertible_to<FlowState>;
};

template <SnapshotSource S>
double uniform_time_step(const S& src) {
  if (src.size() < 2) throw ResolutionError("trajectory needs at least two snapshots");
  const double t0 = src.time(0);
  const double dt = (src.time(src.size() - 1) - t0) / static_cast<double>(src.size() - 1);
  if (!(dt > 0.0)) throw ConfigError("trajectory times must be strictly increasing");
  for (std::size_t i = 1; i < src.size(); ++i) {
    const double step = src.time(i) - src.time(i - 1);
    if (std::abs(step - dt) > 1e-9 * dt) throw ConfigError("trajectory sampling is not uniform");
  }
  return dt;
}

class FlowTrajectory {
 public:
  FlowTrajectory() = default;
  explicit FlowTrajectory(const Grid& g, std::string digest = {}) : grid_(g), digest_(std::move(digest)) {}

  void append(FlowState s) {
    if (!snapshots_.empty() && !(s.t > snapshots_.back().t)) throw ConfigError("snapshot times must increase");
    snapshots_.push_back(std::move(s));
  }

  std::size_t size() const { return snapshots_.size(); }
  double time(std::size_t i) const { return snapshots_[i].t; }
  const FlowState& state(std::size_t i) const { return snapshots_[i]; }
  FlowState& state(std::size_t i) { return snapshots_[i]; }
  const Grid& grid() const { return grid_; }
  const std::string& config_digest() const { return digest_; }
  void set_config_digest(std::string d) { digest_ = std::move(d); }
  const std::vector<FlowState>& snapshots() const { return snapshots_; }

  double time_step() const { return uniform_time_step(*this); }

 private:
  Grid grid_{};
  std::string digest_;
  std::vector<FlowState> snapshots_;
};

template <SnapshotSource S>
FlowTrajectory materialize(const S& src) {
  FlowTrajectory out(src.grid());
  for (std::size_t i = 0; i < src.size(); ++i) out.append(src.state(i));
  return out;
}

}  // namespace vdlab
