#include "rvb/archive.hpp"

#include <sstream>

#include "rvb/errors.hpp"
#include "rvb/hash.hpp"

namespace rvb::archive {

namespace fs = std::filesystem;
using nlohmann::json;

namespace {

[[noreturn]] void io_error(const std::string& msg) { throw Error(ErrorKind::kArchiveIOError, msg); }

std::string epoch_label(int last_complete) {
  return "last complete epoch " + std::to_string(last_complete);
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_error("cannot open '" + path.string() + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string exchange_file(int epoch) {
  std::string n = std::to_string(epoch);
  return "epoch-" + std::string(n.size() < 3 ? 3 - n.size() : 0, '0') + n + ".jsonl";
}

}  // namespace

Domain RunArchive::domain() const { return domain_from_string(header.at("domain").get<std::string>()); }

json make_header(std::string_view name, Domain domain, std::uint64_t seed, const json& config) {
  return json{{"schema", std::string(kSchema)},
              {"name", std::string(name)},
              {"domain", std::string(to_string(domain))},
              {"seed", seed},
              {"config", config}};
}

void append_epoch(RunArchive& archive, EpochRecord record) {
  const int expected = archive.last_epoch() + 1;
  if (record.epoch != expected) {
    throw Error(ErrorKind::kArchiveOrderError, "expected epoch " + std::to_string(expected) + ", got " +
                                                   std::to_string(record.epoch));
  }
  archive.records.push_back(std::move(record));
}

std::string encode_line(std::string_view kind, const json& body) {
  const std::string text = body.dump();
  json line{{"kind", std::string(kind)}, {"body", body}, {"sha256", sha256_hex(text)}};
  return line.dump() + "\n";
}

std::string serialize(const RunArchive& archive) {
  std::string out = encode_line("header", archive.header);
  for (const auto& r : archive.records) out += encode_line("epoch", json(r));
  if (archive.stop) out += encode_line("stop", json(*archive.stop));
  if (!archive.metrics.is_null()) out += encode_line("metrics", archive.metrics);
  return out;
}

RunArchive parse(std::string_view text) {
  RunArchive run;
  bool have_header = false;
  std::size_t pos = 0;
  int index = 0;
  while (pos < text.size()) {
    const auto nl = text.find('\n', pos);
    if (nl == std::string_view::npos) {
      io_error("truncated archive: final line is incomplete (" + epoch_label(run.last_epoch()) + ")");
    }
    const auto raw = text.substr(pos, nl - pos);
    pos = nl + 1;
    json line;
    try {
      line = json::parse(raw);
    } catch (const json::exception&) {
      io_error("unreadable record " + std::to_string(index) + " (" + epoch_label(run.last_epoch()) + ")");
    }
    if (!line.is_object() || !line.contains("kind") || !line.contains("body") || !line.contains("sha256")) {
      io_error("malformed record " + std::to_string(index));
    }
    const auto& body = line["body"];
    const auto kind = line["kind"].get<std::string>();
    if (sha256_hex(body.dump()) != line["sha256"].get<std::string>()) {
      std::string where = "record " + std::to_string(index);
      if (kind == "epoch" && body.contains("epoch")) where += " (epoch " + body["epoch"].dump() + ")";
      io_error("checksum mismatch at " + where);
    }

    if (index == 0) {
      if (kind != "header") throw Error(ErrorKind::kSchemaError, "archive does not start with a header");
      if (body.value("schema", "") != kSchema) {
        throw Error(ErrorKind::kSchemaError, "unsupported archive schema '" + body.value("schema", "") + "'");
      }
      run.header = body;
      have_header = true;
    } else if (kind == "epoch") {
      try {
        append_epoch(run, body.get<EpochRecord>());
      } catch (const json::exception& e) {
        throw Error(ErrorKind::kSchemaError, "bad epoch record " + std::to_string(index) + ": " + e.what());
      }
    } else if (kind == "stop") {
      run.stop = body.get<StopReason>();
    } else if (kind == "metrics") {
      run.metrics = body;
    } else {
      throw Error(ErrorKind::kSchemaError, "unknown record kind '" + kind + "'");
    }
    ++index;
  }
  if (!have_header) io_error("empty archive");
  if (!run.stop || run.metrics.is_null()) {
    io_error("truncated archive: run never finished (" + epoch_label(run.last_epoch()) + ")");
  }
  return run;
}

fs::path archive_file(const fs::path& path) {
  return fs::is_directory(path) ? path / "archive.jsonl" : path;
}

void save_run(const fs::path& dir, const RunArchive& archive) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) io_error("cannot create '" + dir.string() + "': " + ec.message());
  {
    std::ofstream out(dir / "archive.jsonl", std::ios::binary | std::ios::trunc);
    out << serialize(archive);
    if (!out) io_error("write failed for '" + (dir / "archive.jsonl").string() + "'");
  }
  {
    std::ofstream out(dir / "timing.jsonl", std::ios::binary | std::ios::trunc);
    for (const auto& t : archive.timing) out << json{{"epoch", t.epoch}, {"wall_ms", t.wall_ms}}.dump() << "\n";
  }
  if (!archive.exchanges.empty()) {
    fs::create_directories(dir / "raw_llm", ec);
    std::ofstream out;
    int open_epoch = -1;
    for (const auto& x : archive.exchanges) {
      if (x.epoch != open_epoch) {
        out.close();
        out.open(dir / "raw_llm" / exchange_file(x.epoch), std::ios::binary | std::ios::app);
        open_epoch = x.epoch;
      }
      out << llm::exchange_to_json(x.exchange).dump() << "\n";
    }
  }
}

RunArchive load_run(const fs::path& path) {
  const auto file = archive_file(path);
  if (!fs::exists(file)) io_error("no archive at '" + file.string() + "'");
  auto run = parse(read_file(file));
  const auto timing = file.parent_path() / "timing.jsonl";
  if (fs::exists(timing)) {
    std::istringstream in(read_file(timing));
    for (std::string line; std::getline(in, line);) {
      if (line.empty()) continue;
      try {
        const auto j = json::parse(line);
        run.timing.push_back({j.at("epoch").get<int>(), j.at("wall_ms").get<double>()});
      } catch (const json::exception&) {
        break;  // side channel; a torn tail is not worth failing the load
      }
    }
  }
  return run;
}

ArchiveWriter::ArchiveWriter(fs::path dir, const json& header) : dir_(std::move(dir)) {
  std::error_code ec;
  fs::create_directories(dir_, ec);
  if (ec) io_error("cannot create '" + dir_.string() + "': " + ec.message());
  archive_.open(dir_ / "archive.jsonl", std::ios::binary | std::ios::trunc);
  timing_.open(dir_ / "timing.jsonl", std::ios::binary | std::ios::trunc);
  if (!archive_ || !timing_) io_error("cannot open archive files in '" + dir_.string() + "'");
  fs::remove_all(dir_ / "raw_llm", ec);
  write(archive_, encode_line("header", header));
}

void ArchiveWriter::write(std::ofstream& out, std::string_view text) {
  out.write(text.data(), static_cast<std::streamsize>(text.size()));
  out.flush();
  if (!out) io_error("write failed in '" + dir_.string() + "'");
}

void ArchiveWriter::append(const EpochRecord& record, const std::vector<llm::Exchange>& exchanges,
                           double wall_ms) {
  if (record.epoch != last_epoch_ + 1) {
    throw Error(ErrorKind::kArchiveOrderError, "expected epoch " + std::to_string(last_epoch_ + 1) +
                                                   ", got " + std::to_string(record.epoch));
  }
  write(archive_, encode_line("epoch", json(record)));
  write(timing_, json{{"epoch", record.epoch}, {"wall_ms", wall_ms}}.dump() + "\n");
  if (!exchanges.empty()) {
    std::error_code ec;
    fs::create_directories(dir_ / "raw_llm", ec);
    std::ofstream raw(dir_ / "raw_llm" / exchange_file(record.epoch), std::ios::binary | std::ios::app);
    for (const auto& x : exchanges) write(raw, llm::exchange_to_json(x).dump() + "\n");
  }
  last_epoch_ = record.epoch;
}

void ArchiveWriter::finish(const StopReason& stop, const json& metrics) {
  write(archive_, encode_line("stop", json(stop)));
  write(archive_, encode_line("metrics", metrics));
}

std::string encode_attack_log(const AttackLogEntry& entry) {
  nlohmann::ordered_json j;
  j["file"] = entry.file;
  j["code"] = entry.code;
  j["bug"] = entry.bug;
  j["payload"] = entry.payload;
  return j.dump();
}

AttackLogEntry decode_attack_log(std::string_view text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kCodecError, std::string("attack log is not JSON: ") + e.what());
  }
  if (!j.is_object()) throw Error(ErrorKind::kCodecError, "attack log must be an object");
  AttackLogEntry out;
  for (auto [key, field] : {std::pair{"file", &out.file}, std::pair{"code", &out.code},
                            std::pair{"bug", &out.bug}, std::pair{"payload", &out.payload}}) {
    const auto it = j.find(key);
    if (it == j.end()) throw Error(ErrorKind::kCodecError, std::string("attack log lacks '") + key + "'");
    if (!it->is_string()) throw Error(ErrorKind::kCodecError, std::string("'") + key + "' must be a string");
    *field = it->get<std::string>();
  }
  return out;
}

}  // namespace rvb::archive
