#pragma once

#include <cstdint>

namespace femma {

// Instrumentation shared by the contraction kernels and the operators.
// Every entry point that accepts an `OpCounters*` treats nullptr as "don't count".
struct OpCounters {
  std::uint64_t flops = 0;
  std::uint64_t d_reads = 0;         // scalar loads from the stored quadrature D array
  std::uint64_t geometry_evals = 0;  // per-element on-the-fly Jacobian computations
  std::uint64_t apply_calls = 0;     // apply_block invocations
  std::uint64_t mma_instructions = 0;
  std::uint64_t gathers = 0;         // H1 L->E gathers
  std::uint64_t scatters = 0;        // H1 E->L scatter-adds

  void reset() { *this = OpCounters{}; }
};

inline void count_flops(OpCounters* c, std::uint64_t n) {
  if (c) c->flops += n;
}

}  // namespace femma
