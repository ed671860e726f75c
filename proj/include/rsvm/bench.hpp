#pragma once

#include "rsvm/nuclear.hpp"
#include "rsvm/rsvm_accel.hpp"
#include "rsvm/rsvm_core.hpp"
#include "rsvm/sensing.hpp"

#include <json.hpp>

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

namespace rsvm {

/// Invalid experiment description; the CLI maps this to exit code 1.
class ConfigError : public std::invalid_argument {
public:
  using std::invalid_argument::invalid_argument;
};

enum class Algorithm { Rsvm, RsvmAccel, RsvmSymmetric, Nuclear };

std::string_view to_string(Algorithm a);
Algorithm algorithm_from_string(std::string_view s);
std::vector<Algorithm> parse_algorithm_list(std::string_view csv);

enum class SweepParam { MFraction, P, Q, R };
std::string_view to_string(SweepParam s);

enum class TruthKind { LowRank, PsdLowRank };

struct AccelSettings {
  BlockStrategy strategy = BlockStrategy::Columns;
  Index n_blocks = 4;
  Index grid_s = 1, grid_t = 1;
  int sweeps = 3;
};

struct ExperimentConfig {
  Scenario scenario = Scenario::Completion;
  TruthKind truth = TruthKind::LowRank;
  std::vector<Index> p{15}, q{30}, r{3};
  std::vector<double> m_fraction{0.7};
  SweepParam sweep = SweepParam::MFraction;
  double snr_db = 20.0;
  int n_matrices = 10;
  int n_measurements = 10;
  std::vector<Algorithm> algorithms{Algorithm::Rsvm, Algorithm::Nuclear};
  std::uint64_t seed = 1;
  int threads = 1;
  bool record_timing = false; // wall times are written as 0 unless enabled
  Hyperparameters hyper;
  AccelSettings accel;
  Index symmetric_terms = 0;
  NuclearConfig nuclear;
  std::string output_path;

  /// Number of sweep points.
  std::size_t points() const;
  struct Point {
    Index p, q, r;
    double m_fraction;
    double sweep_value;
  };
  Point point(std::size_t i) const;

  void validate() const;
};

/// Parses a config document. Exactly one of p, q, r, m_fraction must be an
/// array; it defines the sweep. Unknown keys are rejected.
ExperimentConfig config_from_json(const nlohmann::json &doc);
ExperimentConfig load_config(const std::filesystem::path &path);

struct ResultRow {
  std::string scenario;
  std::string algorithm;
  Index p = 0, q = 0, r = 0, m = 0;
  int trial_matrix = 0, trial_noise = 0;
  double nmse_linear = 0.0;
  double nmse_db = 0.0;
  int iterations = 0;
  double wall_time_seconds = 0.0;
  double sweep_value = 0.0;
  double err_sq = 0.0;    // ||X - Xhat||_F^2
  double truth_sq = 0.0;  // ||X||_F^2
  double signal_sq = 0.0; // ||A vec(X)||^2
  double noise_sq = 0.0;  // ||n||^2
  bool failed = false;
};

/// ||X - Xhat||_F^2 / ||X||_F^2; throws if X = 0.
double nmse(const Matrix &x_true, const Matrix &x_hat);
double to_db(double ratio);

/// Runs one algorithm on one instance. Exceptions propagate.
Estimate run_algorithm(Algorithm alg, const ProblemInstance &inst, const ExperimentConfig &cfg);

/// The instance for grid cell (point, matrix, noise); independent of thread
/// count and evaluation order.
ProblemInstance make_trial_instance(const ExperimentConfig &cfg, std::size_t point, int matrix_trial,
                                    int noise_trial);

std::vector<ResultRow> run_experiment(const ExperimentConfig &cfg);

struct AggregateRow {
  double sweep_value = 0.0;
  std::string algorithm;
  double nmse_db = 0.0;            // ratio of means
  int n_trials = 0;
  int n_failures = 0;
  double mean_wall_time = 0.0;
  double nmse_db_mean_ratio = 0.0; // mean of per-trial ratios
  double snr_db_empirical = 0.0;
};

/// Groups by (sweep_value, algorithm) in order of first appearance; failed
/// rows are excluded from the means and counted in n_failures.
std::vector<AggregateRow> aggregate(const std::vector<ResultRow> &rows);

void write_csv(const std::vector<ResultRow> &rows, const std::filesystem::path &path);
void write_csv(const std::vector<AggregateRow> &rows, const std::filesystem::path &path);
std::string to_csv(const std::vector<ResultRow> &rows);
std::string to_csv(const std::vector<AggregateRow> &rows);
std::vector<ResultRow> read_result_csv(const std::filesystem::path &path);
std::vector<ResultRow> parse_result_csv(std::istream &in);

} // namespace rsvm
