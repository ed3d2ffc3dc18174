// SPDX-License-Identifier: Apache-2.0

#include "spae/serialize.hpp"

#include <charconv>
#include <fstream>
#include <sstream>

namespace spae {

std::string fmt_double(double v) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

namespace {

Json probe_to_json(const ProbeRecord& rec) {
  Json j;
  j["k"] = rec.step_index;
  j["conf"] = rec.confidence;
  j["acc"] = rec.correctness;
  j["entropies"] = rec.sample_entropies;
  j["accs"] = rec.sample_correctness;
  return j;
}

ProbeRecord probe_from_json(const Json& j) {
  ProbeRecord rec;
  rec.step_index = j.at("k").get<int>();
  rec.confidence = j.at("conf").get<double>();
  rec.correctness = j.at("acc").get<double>();
  rec.sample_entropies = j.at("entropies").get<std::vector<double>>();
  rec.sample_correctness = j.at("accs").get<std::vector<double>>();
  return rec;
}

}  // namespace

Json trajectory_to_json(const TrajectoryRecord& record) {
  const TokenTrajectory& t = record.trajectory;
  Json j;
  j["query_id"] = t.query_id;
  j["tokens"] = t.tokens;
  j["logprobs"] = t.logprobs;
  j["reasoning_end"] = t.reasoning_end;
  Json steps = Json::array();
  for (const StepSpan& s : t.steps) steps.push_back({s.begin, s.end});
  j["steps"] = std::move(steps);
  j["reward"] = t.reward;
  if (t.truncated) j["truncated"] = true;
  if (!record.probes.empty()) {
    Json probes = Json::array();
    for (const ProbeRecord& rec : record.probes) probes.push_back(probe_to_json(rec));
    j["probe"] = std::move(probes);
  }
  if (!record.phi.empty()) j["phi"] = record.phi;
  if (!record.phases.empty()) {
    Json phases = Json::array();
    for (char c : record.phases) phases.push_back(std::string(1, c));
    j["phases"] = std::move(phases);
  }
  if (!record.adv_raw.empty()) j["adv_raw"] = record.adv_raw;
  if (!record.adv_final.empty()) j["adv_final"] = record.adv_final;
  if (record.query) j["query"] = query_to_json(*record.query);
  return j;
}

TrajectoryRecord trajectory_from_json(const Json& j) {
  TrajectoryRecord record;
  TokenTrajectory& t = record.trajectory;
  t.query_id = j.at("query_id").get<std::uint64_t>();
  t.tokens = j.at("tokens").get<TokenSeq>();
  t.logprobs = j.at("logprobs").get<std::vector<double>>();
  t.reasoning_end = j.at("reasoning_end").get<int>();
  for (const Json& s : j.at("steps"))
    t.steps.push_back({s.at(0).get<int>(), s.at(1).get<int>()});
  t.reward = j.at("reward").get<int>();
  t.truncated = j.value("truncated", false);
  if (j.contains("probe"))
    for (const Json& p : j.at("probe")) record.probes.push_back(probe_from_json(p));
  if (j.contains("phi")) record.phi = j.at("phi").get<std::vector<double>>();
  if (j.contains("phases"))
    for (const Json& p : j.at("phases")) record.phases += p.get<std::string>();
  if (j.contains("adv_raw")) record.adv_raw = j.at("adv_raw").get<std::vector<double>>();
  if (j.contains("adv_final")) record.adv_final = j.at("adv_final").get<std::vector<double>>();
  if (j.contains("query")) record.query = query_from_json(j.at("query"));
  return record;
}

namespace {

void write_jsonl(const std::string& path, const std::vector<Json>& lines) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  for (const Json& j : lines) out << j.dump() << '\n';
  if (!out) throw DataError("write failed: " + path);
}

template <typename Fn>
auto read_jsonl(const std::string& path, Fn parse) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open: " + path);
  std::vector<decltype(parse(Json{}))> out;
  std::string line;
  long line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(parse(Json::parse(line)));
    } catch (const std::exception& e) {
      throw DataError(path + ": line " + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace

void write_trajectory_jsonl(const std::string& path,
                            std::span<const TrajectoryRecord> records) {
  std::vector<Json> lines;
  lines.reserve(records.size());
  for (const TrajectoryRecord& r : records) lines.push_back(trajectory_to_json(r));
  write_jsonl(path, lines);
}

std::vector<TrajectoryRecord> read_trajectory_jsonl(const std::string& path) {
  return read_jsonl(path, [](const Json& j) { return trajectory_from_json(j); });
}

Json query_to_json(const Query& query) {
  Json j;
  j["query_id"] = query.id;
  j["tokens"] = query.prompt;
  j["answer"] = query.answer;
  j["meta"] = {{"seed", query.meta.seed},
               {"modulus", query.meta.modulus},
               {"chain_length", query.meta.chain_length}};
  return j;
}

Query query_from_json(const Json& j) {
  Query q;
  q.id = j.at("query_id").get<std::uint64_t>();
  q.prompt = j.at("tokens").get<TokenSeq>();
  q.answer = j.at("answer").get<TokenSeq>();
  const Json& meta = j.at("meta");
  q.meta.seed = meta.at("seed").get<std::uint64_t>();
  q.meta.modulus = meta.at("modulus").get<int>();
  q.meta.chain_length = meta.at("chain_length").get<int>();
  return q;
}

void write_query_jsonl(const std::string& path, std::span<const Query> queries) {
  std::vector<Json> lines;
  lines.reserve(queries.size());
  for (const Query& q : queries) lines.push_back(query_to_json(q));
  write_jsonl(path, lines);
}

std::vector<Query> read_query_jsonl(const std::string& path) {
  return read_jsonl(path, [](const Json& j) { return query_from_json(j); });
}

void write_csv(const std::string& path, const std::string& header,
               std::span<const std::vector<std::string>> rows) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << header << '\n';
  for (const auto& row : rows) {
    for (std::size_t i = 0; i < row.size(); ++i) {
      if (i) out << ',';
      out << row[i];
    }
    out << '\n';
  }
  if (!out) throw DataError("write failed: " + path);
}

std::string manifest_content_hash(const std::string& command, const Json& config) {
  const std::string payload = command + '\n' + config.dump();
  std::uint64_t h = 0xcbf29ce484222325ULL;  // FNV-1a
  for (unsigned char c : payload) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

void write_manifest(const std::string& path, const RunManifest& manifest) {
  Json j;
  j["command"] = manifest.command;
  j["seed"] = manifest.seed;
  j["content_hash"] = manifest.content_hash;
  j["outputs"] = manifest.outputs;
  j["config"] = manifest.config;
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot open for writing: " + path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("write failed: " + path);
}

}  // namespace spae
