// SPDX-License-Identifier: Apache-2.0
//
// Vector kernels: scalar reference implementations plus SIMD variants
// (AVX2 on x86-64, NEON on aarch64) selected once at startup.

#pragma once

#include <cstddef>

namespace spae::kern {

enum class Isa { Scalar, Avx2, Neon };

const char* isa_name(Isa isa);

// ISA used by the dispatching entry points below. Resolved from CPU features
// on first use; the SPAE_KERNELS env var (scalar|avx2|neon|auto) overrides.
Isa active_isa();

// Forces an ISA, for equivalence tests. Throws std::invalid_argument if the
// requested ISA is not available in this build/CPU.
void set_isa(Isa isa);

double reduce_sum(const double* x, std::size_t n);
double reduce_min(const double* x, std::size_t n);  // +inf when n == 0
double reduce_max(const double* x, std::size_t n);  // -inf when n == 0
double sum_sq_dev(const double* x, std::size_t n, double mean);
void scale(double* x, std::size_t n, double a);                                   // x *= a
void scale_shift(double* y, const double* x, std::size_t n, double m, double s);  // y = (x - m) * s
void add_scaled(double* y, const double* x, std::size_t n, double a);             // y += a * x

// Scalar reference path, always available; the oracle the SIMD variants are
// tested against.
namespace scalar {
double reduce_sum(const double* x, std::size_t n);
double reduce_min(const double* x, std::size_t n);
double reduce_max(const double* x, std::size_t n);
double sum_sq_dev(const double* x, std::size_t n, double mean);
void scale(double* x, std::size_t n, double a);
void scale_shift(double* y, const double* x, std::size_t n, double m, double s);
void add_scaled(double* y, const double* x, std::size_t n, double a);
}  // namespace scalar

}  // namespace spae::kern
