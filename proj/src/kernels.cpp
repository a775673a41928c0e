#include "gridagent/kernels.h"

#include <complex>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace gridagent::kernels {

namespace {

using cd = std::complex<double>;

inline cd row_current(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::Index i) {
  cd acc(0.0, 0.0);
  for (Eigen::Index j = 0; j < y.cols(); ++j) acc += y(i, j) * v(j);
  return acc;
}

inline void injection_row(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::Index i, Eigen::VectorXd& p,
                          Eigen::VectorXd& q) {
  const cd s = v(i) * std::conj(row_current(y, v, i));
  p(i) = s.real();
  q(i) = s.imag();
}

struct ColumnMaps {
  std::vector<int> angle_col;  // bus -> column, -1 if not an unknown
  std::vector<int> mag_col;
};

ColumnMaps column_maps(Eigen::Index n, const std::vector<int>& angle_buses, const std::vector<int>& magnitude_buses) {
  ColumnMaps m{std::vector<int>(static_cast<std::size_t>(n), -1), std::vector<int>(static_cast<std::size_t>(n), -1)};
  const int na = static_cast<int>(angle_buses.size());
  for (int c = 0; c < na; ++c) m.angle_col[static_cast<std::size_t>(angle_buses[static_cast<std::size_t>(c)])] = c;
  for (std::size_t c = 0; c < magnitude_buses.size(); ++c) {
    m.mag_col[static_cast<std::size_t>(magnitude_buses[c])] = na + static_cast<int>(c);
  }
  return m;
}

// Fills one Jacobian row. `take_imag` selects Q (true) or P (false).
inline void jacobian_row(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, const ColumnMaps& maps, int bus,
                         bool take_imag, Eigen::Index row, Eigen::MatrixXd& jac) {
  const Eigen::Index i = bus;
  const cd vi = v(i);
  const cd ii = row_current(y, v, i);
  const cd j(0.0, 1.0);
  auto part = [take_imag](cd z) { return take_imag ? z.imag() : z.real(); };
  for (Eigen::Index k = 0; k < y.cols(); ++k) {
    const int ac = maps.angle_col[static_cast<std::size_t>(k)];
    const int mc = maps.mag_col[static_cast<std::size_t>(k)];
    if (ac < 0 && mc < 0) continue;
    const double vk_abs = std::abs(v(k));
    const cd ek = vk_abs > 0.0 ? v(k) / vk_abs : cd(1.0, 0.0);
    if (k == i) {
      if (ac >= 0) jac(row, ac) = part(j * vi * std::conj(ii - y(i, i) * vi));
      if (mc >= 0) jac(row, mc) = part(vi * std::conj(y(i, i) * ek) + std::conj(ii) * ek);
    } else {
      if (ac >= 0) jac(row, ac) = part(-j * vi * std::conj(y(i, k) * v(k)));
      if (mc >= 0) jac(row, mc) = part(vi * std::conj(y(i, k) * ek));
    }
  }
}

}  // namespace

Eigen::VectorXcd polar_voltages(const Eigen::VectorXd& vm, const Eigen::VectorXd& va) {
  Eigen::VectorXcd v(vm.size());
  for (Eigen::Index i = 0; i < vm.size(); ++i) v(i) = std::polar(vm(i), va(i));
  return v;
}

void power_injections_serial(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::VectorXd& p,
                             Eigen::VectorXd& q) {
  const Eigen::Index n = y.rows();
  p.resize(n);
  q.resize(n);
  for (Eigen::Index i = 0; i < n; ++i) injection_row(y, v, i, p, q);
}

void power_injections_parallel(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, Eigen::VectorXd& p,
                               Eigen::VectorXd& q) {
  const Eigen::Index n = y.rows();
  p.resize(n);
  q.resize(n);
#pragma omp parallel for schedule(static) if (n >= 32)
  for (Eigen::Index i = 0; i < n; ++i) injection_row(y, v, i, p, q);
}

void jacobian_serial(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, const std::vector<int>& angle_buses,
                     const std::vector<int>& magnitude_buses, Eigen::MatrixXd& jac) {
  const auto maps = column_maps(y.rows(), angle_buses, magnitude_buses);
  const auto na = static_cast<Eigen::Index>(angle_buses.size());
  const auto nm = static_cast<Eigen::Index>(magnitude_buses.size());
  jac.setZero(na + nm, na + nm);
  for (Eigen::Index r = 0; r < na + nm; ++r) {
    const bool q_row = r >= na;
    const int bus = q_row ? magnitude_buses[static_cast<std::size_t>(r - na)] : angle_buses[static_cast<std::size_t>(r)];
    jacobian_row(y, v, maps, bus, q_row, r, jac);
  }
}

void jacobian_parallel(const Eigen::MatrixXcd& y, const Eigen::VectorXcd& v, const std::vector<int>& angle_buses,
                       const std::vector<int>& magnitude_buses, Eigen::MatrixXd& jac) {
  const auto maps = column_maps(y.rows(), angle_buses, magnitude_buses);
  const auto na = static_cast<Eigen::Index>(angle_buses.size());
  const auto nm = static_cast<Eigen::Index>(magnitude_buses.size());
  jac.setZero(na + nm, na + nm);
#pragma omp parallel for schedule(static) if (na + nm >= 32)
  for (Eigen::Index r = 0; r < na + nm; ++r) {
    const bool q_row = r >= na;
    const int bus = q_row ? magnitude_buses[static_cast<std::size_t>(r - na)] : angle_buses[static_cast<std::size_t>(r)];
    jacobian_row(y, v, maps, bus, q_row, r, jac);
  }
}

int max_threads() {
#ifdef _OPENMP
  return omp_get_max_threads();
#else
  return 1;
#endif
}

}  // namespace gridagent::kernels
