#include "rsvm/bench.hpp"

#include "rsvm/kron_ops.hpp"
#include "rsvm/rsvm_symmetric.hpp"

#include <atomic>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <limits>
#include <map>
#include <set>
#include <sstream>
#include <thread>

namespace rsvm {

std::string_view to_string(Algorithm a) {
  switch (a) {
  case Algorithm::Rsvm: return "rsvm";
  case Algorithm::RsvmAccel: return "rsvm-accel";
  case Algorithm::RsvmSymmetric: return "rsvm-symmetric";
  case Algorithm::Nuclear: return "nuclear";
  }
  return "?";
}

Algorithm algorithm_from_string(std::string_view s) {
  for (Algorithm a : {Algorithm::Rsvm, Algorithm::RsvmAccel, Algorithm::RsvmSymmetric, Algorithm::Nuclear})
    if (to_string(a) == s)
      return a;
  throw ConfigError("unknown algorithm '" + std::string(s) + "'");
}

std::vector<Algorithm> parse_algorithm_list(std::string_view csv) {
  std::vector<Algorithm> out;
  std::size_t start = 0;
  while (start <= csv.size()) {
    const std::size_t comma = csv.find(',', start);
    const auto item = csv.substr(start, comma == std::string_view::npos ? csv.npos : comma - start);
    if (!item.empty())
      out.push_back(algorithm_from_string(item));
    if (comma == std::string_view::npos)
      break;
    start = comma + 1;
  }
  if (out.empty())
    throw ConfigError("algorithm list is empty");
  return out;
}

std::string_view to_string(SweepParam s) {
  switch (s) {
  case SweepParam::MFraction: return "m_fraction";
  case SweepParam::P: return "p";
  case SweepParam::Q: return "q";
  case SweepParam::R: return "r";
  }
  return "?";
}

std::size_t ExperimentConfig::points() const {
  switch (sweep) {
  case SweepParam::MFraction: return m_fraction.size();
  case SweepParam::P: return p.size();
  case SweepParam::Q: return q.size();
  case SweepParam::R: return r.size();
  }
  return 0;
}

ExperimentConfig::Point ExperimentConfig::point(std::size_t i) const {
  auto pick = [&](const auto &list, SweepParam which) { return list[sweep == which ? i : 0]; };
  Point pt{pick(p, SweepParam::P), pick(q, SweepParam::Q), pick(r, SweepParam::R),
           pick(m_fraction, SweepParam::MFraction), 0.0};
  switch (sweep) {
  case SweepParam::MFraction: pt.sweep_value = pt.m_fraction; break;
  case SweepParam::P: pt.sweep_value = static_cast<double>(pt.p); break;
  case SweepParam::Q: pt.sweep_value = static_cast<double>(pt.q); break;
  case SweepParam::R: pt.sweep_value = static_cast<double>(pt.r); break;
  }
  return pt;
}

void ExperimentConfig::validate() const {
  auto sized = [&](std::size_t n, SweepParam which, const char *name) {
    if (n == 0)
      throw ConfigError(std::string("config: '") + name + "' is empty");
    if (n > 1 && sweep != which)
      throw ConfigError(std::string("config: '") + name + "' has several values but is not the sweep");
  };
  sized(p.size(), SweepParam::P, "p");
  sized(q.size(), SweepParam::Q, "q");
  sized(r.size(), SweepParam::R, "r");
  sized(m_fraction.size(), SweepParam::MFraction, "m_fraction");
  if (n_matrices < 1 || n_measurements < 1)
    throw ConfigError("config: n_matrices and n_measurements must be positive");
  if (algorithms.empty())
    throw ConfigError("config: no algorithms selected");
  if (threads < 1)
    throw ConfigError("config: threads must be at least 1");
  try {
    hyper.validate();
    nuclear.validate();
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  if (accel.sweeps < 1)
    throw ConfigError("config: accel.sweeps must be at least 1");
  for (std::size_t i = 0; i < points(); ++i) {
    const auto pt = point(i);
    if (pt.p < 1 || pt.q < 1)
      throw ConfigError("config: p and q must be positive");
    if (pt.r < 1 || pt.r > std::min(pt.p, pt.q))
      throw ConfigError("config: rank must lie in [1, min(p,q)]");
    if (!(pt.m_fraction > 0.0) || pt.m_fraction > 1.0)
      throw ConfigError("config: m_fraction must lie in (0, 1]");
    const bool square_needed = truth == TruthKind::PsdLowRank;
    bool symmetric_alg = false;
    for (Algorithm a : algorithms)
      symmetric_alg |= a == Algorithm::RsvmSymmetric;
    if ((square_needed || symmetric_alg) && pt.p != pt.q)
      throw ConfigError("config: symmetric truth or rsvm-symmetric requires p == q");
    const Index extent = accel.strategy == BlockStrategy::Columns ? pt.q : pt.p;
    if (accel.strategy != BlockStrategy::Grid && (accel.n_blocks < 1 || accel.n_blocks > extent))
      throw ConfigError("config: accel.blocks out of range for this shape");
    if (accel.strategy == BlockStrategy::Grid &&
        (accel.grid_s < 1 || accel.grid_s > pt.p || accel.grid_t < 1 || accel.grid_t > pt.q))
      throw ConfigError("config: accel.grid out of range for this shape");
  }
}

namespace {

template <class T> std::vector<T> scalar_or_list(const nlohmann::json &v, bool &is_list) {
  is_list = v.is_array();
  if (is_list)
    return v.get<std::vector<T>>();
  return {v.get<T>()};
}

void reject_unknown(const nlohmann::json &obj, const std::set<std::string> &known, const std::string &where) {
  for (auto it = obj.begin(); it != obj.end(); ++it)
    if (!known.count(it.key()))
      throw ConfigError("config: unknown key '" + it.key() + "' in " + where);
}

} // namespace

ExperimentConfig config_from_json(const nlohmann::json &doc) {
  if (!doc.is_object())
    throw ConfigError("config: document must be an object");
  reject_unknown(doc,
                 {"scenario", "truth", "p", "q", "r", "m_fraction", "snr_db", "n_matrices",
                  "n_measurements", "algorithms", "seed", "threads", "record_timing", "hyper",
                  "accel", "symmetric", "nuclear", "output"},
                 "top level");
  ExperimentConfig cfg;
  try {
    if (doc.contains("scenario"))
      cfg.scenario = scenario_from_string(doc["scenario"].get<std::string>());
    if (doc.contains("truth")) {
      const auto t = doc["truth"].get<std::string>();
      if (t == "lowrank")
        cfg.truth = TruthKind::LowRank;
      else if (t == "psd")
        cfg.truth = TruthKind::PsdLowRank;
      else
        throw ConfigError("config: truth must be 'lowrank' or 'psd'");
    }

    int sweeps = 0;
    bool is_list = false;
    auto take = [&](const char *key, auto &field, SweepParam which) {
      using T = typename std::decay_t<decltype(field)>::value_type;
      if (!doc.contains(key))
        return;
      field = scalar_or_list<T>(doc[key], is_list);
      if (is_list) {
        ++sweeps;
        cfg.sweep = which;
      }
    };
    take("p", cfg.p, SweepParam::P);
    take("q", cfg.q, SweepParam::Q);
    take("r", cfg.r, SweepParam::R);
    take("m_fraction", cfg.m_fraction, SweepParam::MFraction);
    if (sweeps != 1)
      throw ConfigError("config: exactly one of p, q, r, m_fraction must be a list (found " +
                        std::to_string(sweeps) + ")");

    cfg.snr_db = doc.value("snr_db", cfg.snr_db);
    cfg.n_matrices = doc.value("n_matrices", cfg.n_matrices);
    cfg.n_measurements = doc.value("n_measurements", cfg.n_measurements);
    if (doc.contains("algorithms")) {
      cfg.algorithms.clear();
      for (const auto &a : doc["algorithms"])
        cfg.algorithms.push_back(algorithm_from_string(a.get<std::string>()));
    }
    cfg.seed = doc.value("seed", cfg.seed);
    cfg.threads = doc.value("threads", cfg.threads);
    cfg.record_timing = doc.value("record_timing", cfg.record_timing);
    cfg.output_path = doc.value("output", cfg.output_path);

    if (doc.contains("hyper")) {
      const auto &h = doc["hyper"];
      reject_unknown(h, {"epsilon_scale", "c", "d", "nu_eff", "tol", "max_iter", "jitter", "scale_rule"},
                     "hyper");
      cfg.hyper.epsilon_scale = h.value("epsilon_scale", cfg.hyper.epsilon_scale);
      cfg.hyper.c = h.value("c", cfg.hyper.c);
      cfg.hyper.d = h.value("d", cfg.hyper.d);
      cfg.hyper.nu_eff = h.value("nu_eff", cfg.hyper.nu_eff);
      cfg.hyper.tol = h.value("tol", cfg.hyper.tol);
      cfg.hyper.max_iter = h.value("max_iter", cfg.hyper.max_iter);
      cfg.hyper.jitter = h.value("jitter", cfg.hyper.jitter);
      if (h.contains("scale_rule"))
        cfg.hyper.scale_rule = scale_rule_from_string(h["scale_rule"].get<std::string>());
    }
    if (doc.contains("accel")) {
      const auto &a = doc["accel"];
      reject_unknown(a, {"strategy", "blocks", "grid", "sweeps"}, "accel");
      const auto strategy = a.value("strategy", std::string("columns"));
      if (strategy == "columns")
        cfg.accel.strategy = BlockStrategy::Columns;
      else if (strategy == "rows")
        cfg.accel.strategy = BlockStrategy::Rows;
      else if (strategy == "grid")
        cfg.accel.strategy = BlockStrategy::Grid;
      else
        throw ConfigError("config: accel.strategy must be columns, rows or grid");
      cfg.accel.n_blocks = a.value("blocks", cfg.accel.n_blocks);
      if (a.contains("grid")) {
        const auto g = a["grid"].get<std::vector<Index>>();
        if (g.size() != 2)
          throw ConfigError("config: accel.grid must be [s, t]");
        cfg.accel.grid_s = g[0];
        cfg.accel.grid_t = g[1];
      }
      cfg.accel.sweeps = a.value("sweeps", cfg.accel.sweeps);
    }
    if (doc.contains("symmetric")) {
      const auto &s = doc["symmetric"];
      reject_unknown(s, {"s_terms"}, "symmetric");
      cfg.symmetric_terms = s.value("s_terms", cfg.symmetric_terms);
    }
    if (doc.contains("nuclear")) {
      const auto &n = doc["nuclear"];
      reject_unknown(n, {"lambda_low", "lambda_high", "fista_tol", "bisect_tol", "max_fista_iter",
                         "max_bisect_iter"},
                     "nuclear");
      cfg.nuclear.lambda_low = n.value("lambda_low", cfg.nuclear.lambda_low);
      cfg.nuclear.lambda_high = n.value("lambda_high", cfg.nuclear.lambda_high);
      cfg.nuclear.fista_tol = n.value("fista_tol", cfg.nuclear.fista_tol);
      cfg.nuclear.bisect_tol = n.value("bisect_tol", cfg.nuclear.bisect_tol);
      cfg.nuclear.max_fista_iter = n.value("max_fista_iter", cfg.nuclear.max_fista_iter);
      cfg.nuclear.max_bisect_iter = n.value("max_bisect_iter", cfg.nuclear.max_bisect_iter);
    }
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError(std::string("config: ") + e.what());
  } catch (const ConfigError &) {
    throw;
  } catch (const std::invalid_argument &e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  cfg.validate();
  return cfg;
}

ExperimentConfig load_config(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config '" + path.string() + "'");
  nlohmann::json doc;
  try {
    doc = nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception &e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(doc);
}

double nmse(const Matrix &x_true, const Matrix &x_hat) {
  if (x_true.rows() != x_hat.rows() || x_true.cols() != x_hat.cols())
    throw DimensionError("nmse: shape mismatch");
  const double denom = x_true.squaredNorm();
  if (denom == 0.0)
    throw std::invalid_argument("nmse: ground truth is zero");
  return (x_true - x_hat).squaredNorm() / denom;
}

double to_db(double ratio) { return 10.0 * std::log10(ratio); }

Estimate run_algorithm(Algorithm alg, const ProblemInstance &inst, const ExperimentConfig &cfg) {
  switch (alg) {
  case Algorithm::Rsvm:
    return solve(inst, cfg.hyper);
  case Algorithm::RsvmAccel: {
    const auto part = cfg.accel.strategy == BlockStrategy::Grid
                          ? partition_grid(inst.p(), inst.q(), cfg.accel.grid_s, cfg.accel.grid_t)
                          : partition_blocks(inst.p(), inst.q(), cfg.accel.strategy, cfg.accel.n_blocks);
    return solve_accelerated(inst, cfg.hyper, part, cfg.accel.sweeps);
  }
  case Algorithm::RsvmSymmetric:
    return solve_symmetric(inst, cfg.hyper, cfg.symmetric_terms);
  case Algorithm::Nuclear:
    return solve_constrained(inst, delta_from_sigma(inst.m(), inst.sigma_n), cfg.nuclear).estimate;
  }
  throw std::logic_error("unreachable");
}

ProblemInstance make_trial_instance(const ExperimentConfig &cfg, std::size_t point, int matrix_trial,
                                    int noise_trial) {
  const auto pt = cfg.point(point);
  Rng truth_rng = stream_rng(cfg.seed, {1, point, static_cast<std::uint64_t>(matrix_trial)});
  const Matrix truth = cfg.truth == TruthKind::PsdLowRank ? generate_psd_low_rank(pt.p, pt.r, truth_rng)
                                                          : generate_low_rank(pt.p, pt.q, pt.r, truth_rng);
  Rng meas_rng = stream_rng(cfg.seed, {2, point, static_cast<std::uint64_t>(matrix_trial),
                                       static_cast<std::uint64_t>(noise_trial)});
  const Index m = measurements_for_fraction(pt.p, pt.q, pt.m_fraction);
  auto op = cfg.scenario == Scenario::Completion ? completion_operator(pt.p, pt.q, m, meas_rng)
                                                 : gaussian_operator(pt.p, pt.q, m, meas_rng);
  const double sigma =
      noise_sigma_for_snr(cfg.scenario, pt.p, pt.q, pt.r, m, snr_from_db(cfg.snr_db));
  return measure(std::move(op), truth, sigma, meas_rng);
}

std::vector<ResultRow> run_experiment(const ExperimentConfig &cfg) {
  cfg.validate();
  const std::size_t n_alg = cfg.algorithms.size();
  const std::size_t per_point = static_cast<std::size_t>(cfg.n_matrices) * static_cast<std::size_t>(cfg.n_measurements);
  const std::size_t n_tasks = cfg.points() * per_point;
  std::vector<ResultRow> rows(n_tasks * n_alg);

  auto run_task = [&](std::size_t task) {
    const std::size_t point = task / per_point;
    const int mat = static_cast<int>((task % per_point) / static_cast<std::size_t>(cfg.n_measurements));
    const int noise = static_cast<int>(task % static_cast<std::size_t>(cfg.n_measurements));
    const auto pt = cfg.point(point);
    const ProblemInstance inst = make_trial_instance(cfg, point, mat, noise);
    const Vector clean = inst.op.forward(vec(*inst.ground_truth));

    for (std::size_t a = 0; a < n_alg; ++a) {
      ResultRow &row = rows[task * n_alg + a];
      row.scenario = std::string(to_string(cfg.scenario));
      row.algorithm = std::string(to_string(cfg.algorithms[a]));
      row.p = pt.p;
      row.q = pt.q;
      row.r = pt.r;
      row.m = inst.m();
      row.trial_matrix = mat;
      row.trial_noise = noise;
      row.sweep_value = pt.sweep_value;
      row.truth_sq = inst.ground_truth->squaredNorm();
      row.signal_sq = clean.squaredNorm();
      row.noise_sq = (inst.y - clean).squaredNorm();
      const auto start = std::chrono::steady_clock::now();
      try {
        const Estimate est = run_algorithm(cfg.algorithms[a], inst, cfg);
        row.err_sq = (*inst.ground_truth - est.x_hat).squaredNorm();
        row.nmse_linear = row.err_sq / row.truth_sq;
        row.nmse_db = to_db(row.nmse_linear);
        row.iterations = est.iterations;
        if (!std::isfinite(row.err_sq))
          row.failed = true;
      } catch (const std::exception &) {
        row.failed = true;
      }
      if (row.failed) {
        row.err_sq = row.nmse_linear = row.nmse_db = std::numeric_limits<double>::quiet_NaN();
      }
      if (cfg.record_timing)
        row.wall_time_seconds =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    }
  };

  const std::size_t n_threads = std::min<std::size_t>(static_cast<std::size_t>(cfg.threads), n_tasks);
  if (n_threads <= 1) {
    for (std::size_t t = 0; t < n_tasks; ++t)
      run_task(t);
    return rows;
  }
  std::atomic<std::size_t> next{0};
  std::vector<std::jthread> pool;
  for (std::size_t w = 0; w < n_threads; ++w)
    pool.emplace_back([&] {
      for (std::size_t t = next++; t < n_tasks; t = next++)
        run_task(t);
    });
  pool.clear();
  return rows;
}

std::vector<AggregateRow> aggregate(const std::vector<ResultRow> &rows) {
  struct Acc {
    AggregateRow out;
    double err = 0.0, truth = 0.0, ratio = 0.0, wall = 0.0, signal = 0.0, noise = 0.0;
  };
  std::vector<Acc> groups;
  std::map<std::pair<double, std::string>, std::size_t> slot;
  for (const auto &row : rows) {
    const auto key = std::make_pair(row.sweep_value, row.algorithm);
    auto [it, inserted] = slot.try_emplace(key, groups.size());
    if (inserted) {
      Acc acc;
      acc.out.sweep_value = row.sweep_value;
      acc.out.algorithm = row.algorithm;
      groups.push_back(acc);
    }
    Acc &acc = groups[it->second];
    if (row.failed) {
      ++acc.out.n_failures;
      continue;
    }
    ++acc.out.n_trials;
    acc.err += row.err_sq;
    acc.truth += row.truth_sq;
    acc.ratio += row.err_sq / row.truth_sq;
    acc.wall += row.wall_time_seconds;
    acc.signal += row.signal_sq;
    acc.noise += row.noise_sq;
  }
  std::vector<AggregateRow> out;
  const double nan = std::numeric_limits<double>::quiet_NaN();
  for (auto &acc : groups) {
    const double n = acc.out.n_trials;
    if (acc.out.n_trials > 0) {
      acc.out.nmse_db = to_db(acc.err / acc.truth);
      acc.out.nmse_db_mean_ratio = to_db(acc.ratio / n);
      acc.out.mean_wall_time = acc.wall / n;
      acc.out.snr_db_empirical = acc.noise > 0.0 ? to_db(acc.signal / acc.noise)
                                                 : std::numeric_limits<double>::infinity();
    } else {
      acc.out.nmse_db = acc.out.nmse_db_mean_ratio = acc.out.snr_db_empirical = nan;
    }
    out.push_back(acc.out);
  }
  return out;
}

namespace {

std::string fmt(double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}

constexpr const char *kRowHeader =
    "scenario,algorithm,p,q,r,m,trial_matrix,trial_noise,nmse_linear,nmse_db,iterations,"
    "wall_time_seconds,sweep_value,err_sq,truth_sq,signal_sq,noise_sq,failed";
constexpr const char *kAggHeader =
    "sweep_value,algorithm,nmse_db,n_trials,n_failures,mean_wall_time,nmse_db_mean_ratio,snr_db_empirical";

void write_text(const std::string &text, const std::filesystem::path &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out)
    throw std::runtime_error("failed writing '" + path.string() + "'");
}

} // namespace

std::string to_csv(const std::vector<ResultRow> &rows) {
  std::ostringstream out;
  out << kRowHeader << '\n';
  for (const auto &r : rows)
    out << r.scenario << ',' << r.algorithm << ',' << r.p << ',' << r.q << ',' << r.r << ',' << r.m
        << ',' << r.trial_matrix << ',' << r.trial_noise << ',' << fmt(r.nmse_linear) << ','
        << fmt(r.nmse_db) << ',' << r.iterations << ',' << fmt(r.wall_time_seconds) << ','
        << fmt(r.sweep_value) << ',' << fmt(r.err_sq) << ',' << fmt(r.truth_sq) << ','
        << fmt(r.signal_sq) << ',' << fmt(r.noise_sq) << ',' << (r.failed ? 1 : 0) << '\n';
  return out.str();
}

std::string to_csv(const std::vector<AggregateRow> &rows) {
  std::ostringstream out;
  out << kAggHeader << '\n';
  for (const auto &r : rows)
    out << fmt(r.sweep_value) << ',' << r.algorithm << ',' << fmt(r.nmse_db) << ',' << r.n_trials
        << ',' << r.n_failures << ',' << fmt(r.mean_wall_time) << ',' << fmt(r.nmse_db_mean_ratio)
        << ',' << fmt(r.snr_db_empirical) << '\n';
  return out.str();
}

void write_csv(const std::vector<ResultRow> &rows, const std::filesystem::path &path) {
  write_text(to_csv(rows), path);
}

void write_csv(const std::vector<AggregateRow> &rows, const std::filesystem::path &path) {
  write_text(to_csv(rows), path);
}

std::vector<ResultRow> parse_result_csv(std::istream &in) {
  std::string line;
  if (!std::getline(in, line) || line != kRowHeader)
    throw std::runtime_error("result csv: unexpected header");
  std::vector<ResultRow> rows;
  int line_no = 1;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty())
      continue;
    std::vector<std::string> f;
    std::stringstream ss(line);
    std::string cell;
    while (std::getline(ss, cell, ','))
      f.push_back(cell);
    if (f.size() != 18)
      throw std::runtime_error("result csv: line " + std::to_string(line_no) + " has " +
                               std::to_string(f.size()) + " fields");
    auto num = [&](std::size_t i) { return std::strtod(f[i].c_str(), nullptr); };
    auto integer = [&](std::size_t i) { return std::stoll(f[i]); };
    ResultRow r;
    r.scenario = f[0];
    r.algorithm = f[1];
    r.p = integer(2);
    r.q = integer(3);
    r.r = integer(4);
    r.m = integer(5);
    r.trial_matrix = static_cast<int>(integer(6));
    r.trial_noise = static_cast<int>(integer(7));
    r.nmse_linear = num(8);
    r.nmse_db = num(9);
    r.iterations = static_cast<int>(integer(10));
    r.wall_time_seconds = num(11);
    r.sweep_value = num(12);
    r.err_sq = num(13);
    r.truth_sq = num(14);
    r.signal_sq = num(15);
    r.noise_sq = num(16);
    r.failed = integer(17) != 0;
    rows.push_back(std::move(r));
  }
  return rows;
}

std::vector<ResultRow> read_result_csv(const std::filesystem::path &path) {
  std::ifstream in(path);
  if (!in)
    throw std::runtime_error("cannot open '" + path.string() + "'");
  return parse_result_csv(in);
}

} // namespace rsvm
