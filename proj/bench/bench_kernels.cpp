// Serial vs OpenMP kernels: wall time and bitwise agreement.

#include <algorithm>
#include <chrono>
#include <random>
#include <vector>

#include <fmt/format.h>

#include "CLI11.hpp"

#include "gridagent/case_io.h"
#include "gridagent/kernels.h"
#include "gridagent/powerflow.h"

using namespace gridagent;

namespace {

using Clock = std::chrono::steady_clock;

template <class F>
double median_ms(int reps, F&& f) {
  std::vector<double> t;
  for (int i = 0; i < reps; ++i) {
    const auto t0 = Clock::now();
    f();
    t.push_back(std::chrono::duration<double, std::milli>(Clock::now() - t0).count());
  }
  std::sort(t.begin(), t.end());
  return t[t.size() / 2];
}

// Dense random symmetric admittance-like matrix.
Eigen::MatrixXcd random_y(int n, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Eigen::MatrixXcd y = Eigen::MatrixXcd::Zero(n, n);
  for (int i = 0; i < n; ++i) {
    for (int j = i + 1; j < n; ++j) {
      const std::complex<double> v(u(rng), 10.0 * u(rng));
      y(i, j) = y(j, i) = -v;
      y(i, i) += v;
      y(j, j) += v;
    }
  }
  return y;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Compare serial and OpenMP power-flow kernels"};
  std::vector<int> sizes{69, 200, 500, 1000};
  int reps = 7;
  app.add_option("--sizes", sizes, "Matrix orders");
  app.add_option("--reps", reps, "Repetitions per measurement (median reported)")->check(CLI::PositiveNumber);
  CLI11_PARSE(app, argc, argv);

  fmt::print("threads: {}\n", kernels::max_threads());
  fmt::print("{:>6} {:>14} {:>14} {:>8} {:>14} {:>14} {:>8} {:>9}\n", "n", "inj serial ms", "inj omp ms", "speedup",
             "jac serial ms", "jac omp ms", "speedup", "bitwise");
  std::mt19937_64 rng(1);
  bool all_equal = true;
  for (int n : sizes) {
    const Eigen::MatrixXcd y = random_y(n, rng);
    Eigen::VectorXd vm(n), va(n);
    std::uniform_real_distribution<double> uv(0.95, 1.05), ua(-0.2, 0.2);
    for (int i = 0; i < n; ++i) {
      vm(i) = uv(rng);
      va(i) = i == 0 ? 0.0 : ua(rng);
    }
    const Eigen::VectorXcd v = kernels::polar_voltages(vm, va);
    std::vector<int> angle, mag;
    for (int i = 1; i < n; ++i) {
      angle.push_back(i);
      if (i % 5 != 0) mag.push_back(i);
    }
    Eigen::VectorXd ps, qs, pp, qp;
    Eigen::MatrixXd js, jp;
    const double is = median_ms(reps, [&] { kernels::power_injections_serial(y, v, ps, qs); });
    const double ip = median_ms(reps, [&] { kernels::power_injections_parallel(y, v, pp, qp); });
    const double jss = median_ms(reps, [&] { kernels::jacobian_serial(y, v, angle, mag, js); });
    const double jsp = median_ms(reps, [&] { kernels::jacobian_parallel(y, v, angle, mag, jp); });
    const bool equal = ps == pp && qs == qp && js == jp;
    all_equal = all_equal && equal;
    fmt::print("{:>6} {:>14.3f} {:>14.3f} {:>8.2f} {:>14.3f} {:>14.3f} {:>8.2f} {:>9}\n", n, is, ip, is / ip, jss, jsp,
               jss / jsp, equal ? "yes" : "NO");
  }

  fmt::print("\nfull solve (median of {}):\n", reps);
  for (const auto& name : builtin_names()) {
    const Network net = builtin_network(name);
    PowerFlowSolution a, b;
    const double ts = median_ms(reps, [&] { a = solve(net, {.execution = kernels::Execution::Serial}); });
    const double tp = median_ms(reps, [&] { b = solve(net, {.execution = kernels::Execution::Parallel}); });
    bool equal = a.iterations == b.iterations;
    for (std::size_t i = 0; i < a.buses.size(); ++i) {
      equal = equal && a.buses[i].v_pu == b.buses[i].v_pu && a.buses[i].theta_rad == b.buses[i].theta_rad;
    }
    all_equal = all_equal && equal;
    fmt::print("{:<10} serial {:8.3f} ms  omp {:8.3f} ms  identical {}\n", name, ts, tp, equal ? "yes" : "NO");
  }
  return all_equal ? 0 : 1;
}
