#include "tbf/parallel.hpp"

#include <omp.h>

#include <cstdlib>
#include <string>

namespace tbf {
namespace {

int initial_workers() {
  if (const char* env = std::getenv(kWorkersEnv)) {
    try {
      const int n = std::stoi(env);
      if (n > 0) return n;
    } catch (...) {
    }
  }
  return omp_get_num_procs();
}

int& worker_setting() {
  static int workers = initial_workers();
  return workers;
}

constexpr std::size_t kLeaf = 8;

double strided_sum_impl(const double* base, std::size_t stride, std::size_t count) {
  if (count <= kLeaf) {
    double s = 0.0;
    for (std::size_t i = 0; i < count; ++i) s += base[i * stride];
    return s;
  }
  const std::size_t half = count / 2;
  return strided_sum_impl(base, stride, half) + strided_sum_impl(base + half * stride, stride, count - half);
}

}  // namespace

int num_workers() { return worker_setting(); }

void set_num_workers(int n) { worker_setting() = n > 0 ? n : initial_workers(); }

double pairwise_sum(std::span<const double> values) { return strided_sum_impl(values.data(), 1, values.size()); }

double strided_pairwise_sum(std::span<const double> values, std::size_t offset, std::size_t stride,
                            std::size_t count) {
  if (count == 0) return 0.0;
  return strided_sum_impl(values.data() + offset, stride, count);
}

}  // namespace tbf
