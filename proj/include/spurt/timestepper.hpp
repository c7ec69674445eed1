#pragma once

#include <cmath>
#include <functional>

#include <Eigen/Core>

namespace spurt {

/// Black-box timestepper: the only access the analysis layer has to the
/// dynamics. advance(u, mu, T) returns the state after time T at parameter mu.
///
/// Implementations must be safe to call concurrently from several threads.
class Timestepper {
public:
  using OrbitObserver = std::function<void(double t, const Eigen::VectorXd& u)>;

  virtual ~Timestepper() = default;

  virtual Eigen::Index dimension() const = 0;
  virtual Eigen::VectorXd advance(const Eigen::VectorXd& u, double mu,
                                  double horizon) const = 0;
  /// Internal micro step, used for time-derivative estimates.
  virtual double time_step() const = 0;

  /// Advance while reporting intermediate states. The default samples the
  /// trajectory once per time_step().
  virtual Eigen::VectorXd observe(const Eigen::VectorXd& u, double mu,
                                  double horizon,
                                  const OrbitObserver& observer) const {
    const double dt = time_step();
    const long steps = std::lround(std::ceil(horizon / dt - 1e-9));
    Eigen::VectorXd s = u;
    double t = 0.0;
    for (long k = 0; k < steps; ++k) {
      const double h = std::min(dt, horizon - t);
      s = advance(s, mu, h);
      t += h;
      observer(t, s);
    }
    return s;
  }
};

} // namespace spurt
