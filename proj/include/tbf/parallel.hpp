#pragma once

#include <cstddef>
#include <span>

namespace tbf {

// Environment variable read once for the default worker count.
inline constexpr const char* kWorkersEnv = "TBF_NUM_THREADS";

// Number of OpenMP workers used by the compute kernels. Defaults to the value
// of TBF_NUM_THREADS if set, otherwise the number of available cores.
int num_workers();
void set_num_workers(int n);

// Fixed-order pairwise summation. The split points depend only on the length,
// so the result is bit-identical regardless of how the terms were produced.
double pairwise_sum(std::span<const double> values);

// Sums values[offset], values[offset + stride], ... (count terms) pairwise.
double strided_pairwise_sum(std::span<const double> values, std::size_t offset, std::size_t stride,
                            std::size_t count);

}  // namespace tbf
