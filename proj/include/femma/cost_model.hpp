#pragma once

// Shared-memory byte and FLOP accounting for one GEMM executed on scalar
// cores (each thread computes one C entry and re-reads its A row and B
// column) versus the warp MMA path (each A, B and C element moves once).

#include <cmath>
#include <cstdint>
#include <numeric>
#include <ostream>
#include <string>
#include <vector>

#include "femma/errors.hpp"
#include "femma/warp_mma.hpp"

namespace femma {

inline constexpr std::int64_t kDoubleBytes = 8;

// Exact non-negative rational, kept reduced.
struct Rational {
  std::int64_t num = 0;
  std::int64_t den = 1;

  static Rational of(std::int64_t n, std::int64_t d) {
    if (d == 0) throw Error("Rational: zero denominator");
    const std::int64_t g = std::gcd(n, d);
    return {n / g, d / g};
  }
  double value() const { return static_cast<double>(num) / static_cast<double>(den); }
  bool operator==(const Rational&) const = default;
};

struct CostBreakdown {
  std::int64_t smem_bytes = 0;
  std::int64_t flops = 0;
  Rational intensity;  // flops / smem_bytes
  std::int64_t word_bytes = kDoubleBytes;
};

inline std::int64_t smem_bytes_scalar(const GemmShape& s) {
  const std::int64_t mn = static_cast<std::int64_t>(s.m) * s.n;
  return kDoubleBytes * (mn * (2LL * s.k) + mn);
}

inline std::int64_t smem_bytes_mma(const GemmShape& s) {
  return kDoubleBytes * (static_cast<std::int64_t>(s.m) * s.k + static_cast<std::int64_t>(s.n) * s.k +
                         static_cast<std::int64_t>(s.m) * s.n);
}

inline std::int64_t flops(const GemmShape& s) {
  return 2LL * s.m * s.n * s.k;
}

inline Rational intensity_scalar_exact(const GemmShape& s) {
  return Rational::of(flops(s), smem_bytes_scalar(s));
}
inline Rational intensity_mma_exact(const GemmShape& s) { return Rational::of(flops(s), smem_bytes_mma(s)); }
inline Rational read_reduction_exact(const GemmShape& s) {
  return Rational::of(smem_bytes_scalar(s), smem_bytes_mma(s));
}

inline double intensity_scalar(const GemmShape& s) { return intensity_scalar_exact(s).value(); }
inline double intensity_mma(const GemmShape& s) { return intensity_mma_exact(s).value(); }
inline double read_reduction(const GemmShape& s) { return read_reduction_exact(s).value(); }

inline CostBreakdown scalar_cost(const GemmShape& s) {
  return {smem_bytes_scalar(s), flops(s), intensity_scalar_exact(s)};
}
inline CostBreakdown mma_cost(const GemmShape& s) {
  return {smem_bytes_mma(s), flops(s), intensity_mma_exact(s)};
}

// Rounds to `digits` significant figures.
inline double round_significant(double x, int digits) {
  if (x == 0.0) return 0.0;
  const double scale = std::pow(10.0, digits - 1 - static_cast<int>(std::floor(std::log10(std::abs(x)))));
  return std::round(x * scale) / scale;
}

inline double round_decimals(double x, int decimals) {
  const double scale = std::pow(10.0, decimals);
  return std::round(x * scale) / scale;
}

// Evaluation strategies of the block operator.
enum class Strategy { PA, MF, FusedPA, FusedMF };

inline const char* strategy_name(Strategy s) {
  switch (s) {
    case Strategy::PA: return "PA";
    case Strategy::MF: return "MF";
    case Strategy::FusedPA: return "FusedPA";
    case Strategy::FusedMF: return "FusedMF";
  }
  return "?";
}

inline Strategy parse_strategy(const std::string& name) {
  for (Strategy s : {Strategy::PA, Strategy::MF, Strategy::FusedPA, Strategy::FusedMF})
    if (name == strategy_name(s)) return s;
  throw ParseError("unknown strategy '" + name + "' (expected PA, MF, FusedPA or FusedMF)");
}

// Passes over the stored quadrature data per operator application: the
// unfused PA operator streams D once for the gradient block and once for the
// divergence block; the fused kernel applies D and D^T from one load;
// matrix-free variants store no D.
inline int quad_data_passes(Strategy s) {
  switch (s) {
    case Strategy::PA: return 2;
    case Strategy::FusedPA: return 1;
    case Strategy::MF:
    case Strategy::FusedMF: return 0;
  }
  return 0;
}

// Model ratio of quadrature-data traffic, numerator over denominator.
inline double fusion_traffic_ratio(Strategy numerator, Strategy denominator) {
  const int a = quad_data_passes(numerator);
  const int b = quad_data_passes(denominator);
  if (a == 0 || b == 0)
    throw Error(std::string("fusion_traffic_ratio: no stored quadrature data for pair (") +
                strategy_name(numerator) + ", " + strategy_name(denominator) + ")");
  return static_cast<double>(a) / b;
}

struct CostRow {
  GemmShape shape;
  std::int64_t smem_bytes_scalar = 0;
  std::int64_t smem_bytes_mma = 0;
  std::int64_t flops = 0;
  double intensity = 0.0;
  double read_reduction = 0.0;
};

inline CostRow cost_row(const GemmShape& s) {
  return {s, smem_bytes_scalar(s), smem_bytes_mma(s), flops(s), intensity_scalar(s), read_reduction(s)};
}

inline void write_cost_csv(std::ostream& out, const std::vector<CostRow>& rows) {
  out << "shape,smem_bytes_scalar,smem_bytes_mma,flops,intensity,read_reduction\n";
  for (const auto& r : rows)
    out << r.shape.str() << "," << r.smem_bytes_scalar << "," << r.smem_bytes_mma << "," << r.flops
        << "," << round_significant(r.intensity, 2) << "," << round_decimals(r.read_reduction, 1)
        << "\n";
}

}  // namespace femma
