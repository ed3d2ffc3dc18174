// SPDX-License-Identifier: Apache-2.0
//
// Byte-stable serialization: trajectory/query JSONL, CSV tables and run
// manifests.

#pragma once

#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "spae/core_model.hpp"
#include "spae/probe.hpp"
#include "spae/toy_env.hpp"

namespace spae {

using Json = nlohmann::ordered_json;

// Malformed input data (exit code 2 at the CLI).
struct DataError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// Shortest round-trip decimal form of a double.
std::string fmt_double(double v);

struct TrajectoryRecord {
  TokenTrajectory trajectory;
  std::vector<ProbeRecord> probes;   // optional
  std::vector<double> phi;           // optional
  std::string phases;                // optional, "S"/"C" per step
  std::vector<double> adv_raw;       // optional
  std::vector<double> adv_final;     // optional
  std::optional<Query> query;        // optional, embedded for oracle analyses
};

Json trajectory_to_json(const TrajectoryRecord& record);
TrajectoryRecord trajectory_from_json(const Json& j);

void write_trajectory_jsonl(const std::string& path,
                            std::span<const TrajectoryRecord> records);
// Throws DataError naming the 1-based line number of the first bad line.
std::vector<TrajectoryRecord> read_trajectory_jsonl(const std::string& path);

Json query_to_json(const Query& query);
Query query_from_json(const Json& j);
void write_query_jsonl(const std::string& path, std::span<const Query> queries);
std::vector<Query> read_query_jsonl(const std::string& path);

// CSV with a fixed header; all cells pre-rendered.
void write_csv(const std::string& path, const std::string& header,
               std::span<const std::vector<std::string>> rows);

struct RunManifest {
  std::string command;
  Json config;
  std::uint64_t seed = 0;
  std::string content_hash;  // hash of (command, canonical config)
  std::vector<std::string> outputs;
};

std::string manifest_content_hash(const std::string& command, const Json& config);
void write_manifest(const std::string& path, const RunManifest& manifest);

}  // namespace spae
