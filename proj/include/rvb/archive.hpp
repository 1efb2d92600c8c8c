#pragma once

// Run storage: one JSON-lines file per run.
//
//   runs/<run-id>/archive.jsonl   header, epoch records, stop, metrics
//   runs/<run-id>/timing.jsonl    wall-clock side channel (not replayed)
//   runs/<run-id>/raw_llm/        adapter exchanges, one file per epoch
//
// Every archive line is {"body": ..., "kind": ..., "sha256": sha256(body)}.

#include <filesystem>
#include <fstream>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/llm_adapter.hpp"
#include "rvb/records.hpp"

namespace rvb::archive {

inline constexpr std::string_view kSchema = "rvb-archive/1";

struct TimingEntry {
  int epoch = 0;
  double wall_ms = 0.0;
};

struct RawExchange {
  int epoch = 0;
  llm::Exchange exchange;
};

struct RunArchive {
  // {"schema", "name", "domain", "seed", "config"}; config embeds the scenario.
  nlohmann::json header;
  std::vector<EpochRecord> records;
  std::optional<StopReason> stop;
  nlohmann::json metrics;

  std::vector<TimingEntry> timing;
  std::vector<RawExchange> exchanges;

  Domain domain() const;
  int last_epoch() const { return records.empty() ? 0 : records.back().epoch; }
};

nlohmann::json make_header(std::string_view name, Domain domain, std::uint64_t seed,
                           const nlohmann::json& config);

// Throws ArchiveOrderError unless record.epoch == last_epoch() + 1.
void append_epoch(RunArchive& archive, EpochRecord record);

// One archive line, including the trailing newline.
std::string encode_line(std::string_view kind, const nlohmann::json& body);

// archive.jsonl contents.
std::string serialize(const RunArchive& archive);

// Throws SchemaError for an unknown schema and ArchiveIOError for damaged
// or truncated input.
RunArchive parse(std::string_view text);

void save_run(const std::filesystem::path& dir, const RunArchive& archive);

// Accepts the run directory or the archive.jsonl path itself.
RunArchive load_run(const std::filesystem::path& path);

std::filesystem::path archive_file(const std::filesystem::path& path);

// Streams a run to disk as it happens so a crash leaves every completed
// epoch on disk.
class ArchiveWriter {
 public:
  ArchiveWriter(std::filesystem::path dir, const nlohmann::json& header);

  void append(const EpochRecord& record, const std::vector<llm::Exchange>& exchanges, double wall_ms);
  void finish(const StopReason& stop, const nlohmann::json& metrics);

  const std::filesystem::path& dir() const { return dir_; }

 private:
  void write(std::ofstream& out, std::string_view text);

  std::filesystem::path dir_;
  std::ofstream archive_;
  std::ofstream timing_;
  int last_epoch_ = 0;
};

// Four-key attack log record, keys in the order file, code, bug, payload.
std::string encode_attack_log(const AttackLogEntry& entry);
// Throws CodecError on missing or non-string fields.
AttackLogEntry decode_attack_log(std::string_view text);

}  // namespace rvb::archive
