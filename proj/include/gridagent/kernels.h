#pragma once

// Dense power-flow kernels. Each kernel has a serial reference and an OpenMP
// variant that must agree with it bit-for-bit; the variants only split the
// outer row loop across threads.

#include <Eigen/Dense>
#include <vector>

namespace gridagent::kernels {

enum class Execution { Serial, Parallel };

/// Complex bus voltages from polar coordinates.
Eigen::VectorXcd polar_voltages(const Eigen::VectorXd& vm, const Eigen::VectorXd& va);

/// Net injections S_i = V_i * conj(sum_j Y_ij V_j), split into P and Q.
void power_injections_serial(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::VectorXd& p,
                             Eigen::VectorXd& q);
void power_injections_parallel(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::VectorXd& p,
                               Eigen::VectorXd& q);

/// Polar Newton-Raphson Jacobian.
///
/// Unknowns are [theta_k for k in angle_buses, |V_k| for k in magnitude_buses];
/// rows are [P_i for i in angle_buses, Q_i for i in magnitude_buses].
void jacobian_serial(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, const std::vector<int>& angle_buses,
                     const std::vector<int>& magnitude_buses, Eigen::MatrixXd& jac);
void jacobian_parallel(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, const std::vector<int>& angle_buses,
                       const std::vector<int>& magnitude_buses, Eigen::MatrixXd& jac);

inline void power_injections(Execution ex, const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::VectorXd& p,
                             Eigen::VectorXd& q) {
  if (ex == Execution::Parallel) {
    power_injections_parallel(y, v, p, q);
  } else {
    power_injections_serial(y, v, p, q);
  }
}

inline void jacobian(Execution ex, const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v,
                     const std::vector<int>& angle_buses, const std::vector<int>& magnitude_buses,
                     Eigen::MatrixXd& jac) {
  if (ex == Execution::Parallel) {
    jacobian_parallel(y, v, angle_buses, magnitude_buses, jac);
  } else {
    jacobian_serial(y, v, angle_buses, magnitude_buses, jac);
  }
}

/// Number of threads the parallel kernels will use.
int max_threads();

}  // namespace gridagent::kernels
