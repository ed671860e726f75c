#pragma once

#include "rsvm/sensing.hpp"

#include <json.hpp>

#include <filesystem>

namespace rsvm {

/// {p, q, m, kind, indices | matrix, y, sigma_n, ground_truth?}
/// Matrices are stored as arrays of rows; indices are 0-based vec indices
/// (i + j*p). Doubles round-trip exactly.
nlohmann::json instance_to_json(const ProblemInstance &inst);
ProblemInstance instance_from_json(const nlohmann::json &doc);

void save_instance(const ProblemInstance &inst, const std::filesystem::path &path);
ProblemInstance load_instance(const std::filesystem::path &path);

} // namespace rsvm
