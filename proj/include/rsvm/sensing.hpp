#pragma once

#include "rsvm/measurement_operator.hpp"
#include "rsvm/types.hpp"

#include <cstdint>
#include <initializer_list>
#include <optional>
#include <random>
#include <string_view>

namespace rsvm {

using Rng = std::mt19937_64;

/// Deterministic generator for the stream identified by (seed, path...).
/// Distinct paths give statistically independent streams, so trial grids can
/// be evaluated in any order.
Rng stream_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path);

enum class Scenario { Completion, Reconstruction };

std::string_view to_string(Scenario s);
Scenario scenario_from_string(std::string_view s);

struct ProblemInstance {
  MeasurementOperator op;
  Vector y;
  std::optional<Matrix> ground_truth;
  double sigma_n = 0.0;

  Index p() const { return op.p(); }
  Index q() const { return op.q(); }
  Index m() const { return op.m(); }
};

/// m distinct entries of a p x q matrix, uniformly without replacement,
/// stored in ascending vec order.
MeasurementOperator completion_operator(Index p, Index q, Index m, Rng &rng);

/// m x pq matrix with N(0,1) entries and unit-norm columns.
MeasurementOperator gaussian_operator(Index p, Index q, Index m, Rng &rng);

/// X = L R^T with L (p x r), R (q x r) standard normal.
Matrix generate_low_rank(Index p, Index q, Index r, Rng &rng);

/// X = L L^T with L (p x r) standard normal; symmetric PSD of rank r.
Matrix generate_psd_low_rank(Index p, Index r, Rng &rng);

/// Noise standard deviation for a linear SNR: sigma^2 = r/snr for
/// completion and p q r / (m snr) for reconstruction.
double noise_sigma_for_snr(Scenario kind, Index p, Index q, Index r, Index m, double snr);

double snr_from_db(double db);

/// y = A vec(x) + n, n ~ N(0, sigma_n^2 I).
ProblemInstance measure(MeasurementOperator op, const Matrix &x, double sigma_n, Rng &rng);

/// Number of measurements for a sampling ratio m/pq (floored).
Index measurements_for_fraction(Index p, Index q, double fraction);

} // namespace rsvm
