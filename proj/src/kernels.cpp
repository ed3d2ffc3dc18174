// SPDX-License-Identifier: Apache-2.0
//
// Scalar reference kernels and the runtime ISA dispatch table.

#include "spae/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <limits>
#include <stdexcept>
#include <string>

namespace spae::kern {

namespace scalar {

double reduce_sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double reduce_min(const double* x, std::size_t n) {
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = x[i] < m ? x[i] : m;
  return m;
}

double reduce_max(const double* x, std::size_t n) {
  double m = -std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < n; ++i) m = x[i] > m ? x[i] : m;
  return m;
}

double sum_sq_dev(const double* x, std::size_t n, double mean) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
    const double d = x[i] - mean;
    acc += d * d;
  }
  return acc;
}

void scale(double* x, std::size_t n, double a) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= a;
}

void scale_shift(double* y, const double* x, std::size_t n, double m, double s) {
  for (std::size_t i = 0; i < n; ++i) y[i] = (x[i] - m) * s;
}

void add_scaled(double* y, const double* x, std::size_t n, double a) {
  for (std::size_t i = 0; i < n; ++i) y[i] += a * x[i];
}

}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
#define SPAE_BUILD_AVX2 1
namespace avx2 {
double reduce_sum(const double* x, std::size_t n);
double reduce_min(const double* x, std::size_t n);
double reduce_max(const double* x, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
void scale(double* x, std::size_t n, double a);
void scale_shift(double* y, const double* x, std::size_t n, double m, double s);
void add_scaled(double* y, const double* x, std::size_t n, double a);
}  // namespace avx2
#else
#define SPAE_BUILD_AVX2 0
#endif

#if defined(__aarch64__)
#define SPAE_BUILD_NEON 1
namespace neon {
double reduce_sum(const double* x, std::size_t n);
double reduce_min(const double* x, std::size_t n);
double reduce_max(const double* x, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
void scale(double* x, std::size_t n, double a);
void scale_shift(double* y, const double* x, std::size_t n, double m, double s);
void add_scaled(double* y, const double* x, std::size_t n, double a);
}  // namespace neon
#else
#define SPAE_BUILD_NEON 0
#endif

namespace {

struct Table {
  double (*reduce_sum)(const double*, std::size_t);
  double (*reduce_min)(const double*, std::size_t);
  double (*reduce_max)(const double*, std::size_t);
  double (*sum_sq_dev)(const double*, std::size_t, double);
  void (*scale)(double*, std::size_t, double);
  void (*scale_shift)(double*, const double*, std::size_t, double, double);
  void (*add_scaled)(double*, const double*, std::size_t, double);
};

constexpr Table kScalarTable{scalar::reduce_sum, scalar::reduce_min, scalar::reduce_max,
                             scalar::sum_sq_dev, scalar::scale,      scalar::scale_shift,
                             scalar::add_scaled};

#if SPAE_BUILD_AVX2
constexpr Table kAvx2Table{avx2::reduce_sum, avx2::reduce_min, avx2::reduce_max,
                           avx2::sum_sq_dev, avx2::scale,      avx2::scale_shift,
                           avx2::add_scaled};
#endif
#if SPAE_BUILD_NEON
constexpr Table kNeonTable{neon::reduce_sum, neon::reduce_min, neon::reduce_max,
                           neon::sum_sq_dev, neon::scale,      neon::scale_shift,
                           neon::add_scaled};
#endif

bool isa_available(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return true;
    case Isa::Avx2:
#if SPAE_BUILD_AVX2
      return __builtin_cpu_supports("avx2") != 0;
#else
      return false;
#endif
    case Isa::Neon:
      return SPAE_BUILD_NEON != 0;
  }
  return false;
}

Isa detect_isa() {
  if (const char* env = std::getenv("SPAE_KERNELS")) {
    const std::string v(env);
    if (v == "scalar") return Isa::Scalar;
    if (v == "avx2" && isa_available(Isa::Avx2)) return Isa::Avx2;
    if (v == "neon" && isa_available(Isa::Neon)) return Isa::Neon;
    // "auto" and anything unrecognized fall through to detection.
  }
  if (isa_available(Isa::Avx2)) return Isa::Avx2;
  if (isa_available(Isa::Neon)) return Isa::Neon;
  return Isa::Scalar;
}

const Table* table_for(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return &kScalarTable;
#if SPAE_BUILD_AVX2
    case Isa::Avx2:
      return &kAvx2Table;
#endif
#if SPAE_BUILD_NEON
    case Isa::Neon:
      return &kNeonTable;
#endif
    default:
      return &kScalarTable;
  }
}

Isa g_isa = detect_isa();
const Table* g_table = table_for(g_isa);

}  // namespace

const char* isa_name(Isa isa) {
  switch (isa) {
    case Isa::Scalar:
      return "scalar";
    case Isa::Avx2:
      return "avx2";
    case Isa::Neon:
      return "neon";
  }
  return "?";
}

Isa active_isa() { return g_isa; }

void set_isa(Isa isa) {
  if (!isa_available(isa))
    throw std::invalid_argument(std::string("kernel ISA not available: ") + isa_name(isa));
  g_isa = isa;
  g_table = table_for(isa);
}

double reduce_sum(const double* x, std::size_t n) { return g_table->reduce_sum(x, n); }
double reduce_min(const double* x, std::size_t n) { return g_table->reduce_min(x, n); }
double reduce_max(const double* x, std::size_t n) { return g_table->reduce_max(x, n); }
double sum_sq_dev(const double* x, std::size_t n, double mean) {
  return g_table->sum_sq_dev(x, n, mean);
}
void scale(double* x, std::size_t n, double a) { g_table->scale(x, n, a); }
void scale_shift(double* y, const double* x, std::size_t n, double m, double s) {
  g_table->scale_shift(y, x, n, m, s);
}
void add_scaled(double* y, const double* x, std::size_t n, double a) {
  g_table->add_scaled(y, x, n, a);
}

}  // namespace spae::kern
