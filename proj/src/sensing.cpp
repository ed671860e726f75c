#include "rsvm/sensing.hpp"

#include "rsvm/kron_ops.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

namespace rsvm {

namespace {

std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

Matrix standard_normal(Index rows, Index cols, Rng &rng) {
  std::normal_distribution<double> dist(0.0, 1.0);
  Matrix out(rows, cols);
  for (Index j = 0; j < cols; ++j)
    for (Index i = 0; i < rows; ++i)
      out(i, j) = dist(rng);
  return out;
}

} // namespace

Rng stream_rng(std::uint64_t seed, std::initializer_list<std::uint64_t> path) {
  std::uint64_t h = splitmix64(seed);
  for (std::uint64_t part : path)
    h = splitmix64(h ^ splitmix64(part + 0x632be59bd9b4e019ULL));
  std::seed_seq seq{static_cast<std::uint32_t>(h), static_cast<std::uint32_t>(h >> 32)};
  return Rng(seq);
}

std::string_view to_string(Scenario s) {
  return s == Scenario::Completion ? "completion" : "reconstruction";
}

Scenario scenario_from_string(std::string_view s) {
  if (s == "completion")
    return Scenario::Completion;
  if (s == "reconstruction")
    return Scenario::Reconstruction;
  throw std::invalid_argument("unknown scenario '" + std::string(s) + "'");
}

MeasurementOperator completion_operator(Index p, Index q, Index m, Rng &rng) {
  const Index n = p * q;
  if (m <= 0 || m > n)
    throw std::invalid_argument("completion_operator: need 0 < m <= pq, got m=" + std::to_string(m));
  std::vector<Index> pool(static_cast<std::size_t>(n));
  std::iota(pool.begin(), pool.end(), Index{0});
  // partial Fisher-Yates
  for (Index k = 0; k < m; ++k) {
    std::uniform_int_distribution<Index> pick(k, n - 1);
    std::swap(pool[static_cast<std::size_t>(k)], pool[static_cast<std::size_t>(pick(rng))]);
  }
  pool.resize(static_cast<std::size_t>(m));
  std::sort(pool.begin(), pool.end());
  return MeasurementOperator::completion(p, q, std::move(pool));
}

MeasurementOperator gaussian_operator(Index p, Index q, Index m, Rng &rng) {
  if (m < 1)
    throw std::invalid_argument("gaussian_operator: m must be at least 1");
  Matrix a = standard_normal(m, p * q, rng);
  for (Index j = 0; j < a.cols(); ++j)
    a.col(j).normalize();
  return MeasurementOperator::dense(p, q, std::move(a));
}

Matrix generate_low_rank(Index p, Index q, Index r, Rng &rng) {
  if (r < 1 || r > std::min(p, q))
    throw std::invalid_argument("generate_low_rank: need 1 <= r <= min(p,q)");
  const Matrix left = standard_normal(p, r, rng);
  const Matrix right = standard_normal(q, r, rng);
  return left * right.transpose();
}

Matrix generate_psd_low_rank(Index p, Index r, Rng &rng) {
  if (r < 1 || r > p)
    throw std::invalid_argument("generate_psd_low_rank: need 1 <= r <= p");
  const Matrix left = standard_normal(p, r, rng);
  return left * left.transpose();
}

double noise_sigma_for_snr(Scenario kind, Index p, Index q, Index r, Index m, double snr) {
  if (!(snr > 0.0))
    throw std::invalid_argument("noise_sigma_for_snr: snr must be positive");
  const double rd = static_cast<double>(r);
  const double var = kind == Scenario::Completion
                         ? rd / snr
                         : static_cast<double>(p) * static_cast<double>(q) * rd /
                               (static_cast<double>(m) * snr);
  return std::sqrt(var);
}

double snr_from_db(double db) { return std::pow(10.0, db / 10.0); }

ProblemInstance measure(MeasurementOperator op, const Matrix &x, double sigma_n, Rng &rng) {
  if (x.rows() != op.p() || x.cols() != op.q())
    throw DimensionError("measure: ground truth shape does not match operator");
  if (sigma_n < 0.0)
    throw std::invalid_argument("measure: sigma_n must be non-negative");
  Vector y = op.forward(vec(x));
  if (sigma_n > 0.0) {
    std::normal_distribution<double> dist(0.0, sigma_n);
    for (Index i = 0; i < y.size(); ++i)
      y(i) += dist(rng);
  }
  return ProblemInstance{std::move(op), std::move(y), x, sigma_n};
}

Index measurements_for_fraction(Index p, Index q, double fraction) {
  if (!(fraction > 0.0) || fraction > 1.0)
    throw std::invalid_argument("sampling fraction must lie in (0, 1]");
  const double exact = fraction * static_cast<double>(p * q);
  return std::max<Index>(1, static_cast<Index>(std::floor(exact + 1e-9)));
}

} // namespace rsvm
