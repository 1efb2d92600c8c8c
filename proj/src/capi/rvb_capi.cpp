#include "rvb.h"

#include <cstdio>
#include <cstdlib>
#include <cstring>
#include <fstream>
#include <memory>
#include <sstream>
#include <string>

#include "rvb/archive.hpp"
#include "rvb/cost.hpp"
#include "rvb/errors.hpp"
#include "rvb/metrics.hpp"
#include "rvb/orchestrator.hpp"

struct rvb_config {
  rvb::orchestrator::RunConfig cfg;
};

struct rvb_run {
  rvb::archive::RunArchive run;
};

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

thread_local std::string g_error;
thread_local std::string g_error_kind;

rvb_status input_or_runtime(rvb::ErrorKind k) {
  using rvb::ErrorKind;
  switch (k) {
    case ErrorKind::kScenarioError:
    case ErrorKind::kConfigError:
    case ErrorKind::kSchemaError:
    case ErrorKind::kCodecError:
    case ErrorKind::kArchiveIOError:
    case ErrorKind::kUsageError:
    case ErrorKind::kMissingPrice:
    case ErrorKind::kInvalidSpace:
      return RVB_ERR_INPUT;
    default:
      return RVB_ERR_RUNTIME;
  }
}

template <typename F>
rvb_status guarded(F&& body, bool io_is_runtime = false) {
  g_error.clear();
  g_error_kind.clear();
  try {
    body();
    return RVB_OK;
  } catch (const rvb::Error& e) {
    g_error = e.what();
    g_error_kind = std::string(rvb::to_string(e.kind()));
    if (io_is_runtime && e.kind() == rvb::ErrorKind::kArchiveIOError) return RVB_ERR_RUNTIME;
    return input_or_runtime(e.kind());
  } catch (const std::exception& e) {
    g_error = e.what();
    g_error_kind = "InternalError";
    return RVB_ERR_RUNTIME;
  } catch (...) {
    g_error = "unknown failure";
    g_error_kind = "InternalError";
    return RVB_ERR_RUNTIME;
  }
}

char* dup(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

void require(const void* p, const char* what) {
  if (!p) throw rvb::Error(rvb::ErrorKind::kConfigError, std::string(what) + " must not be NULL");
}

rvb::metrics::AatScope scope_of(const char* s) {
  return s ? rvb::metrics::aat_scope_from_string(s) : rvb::metrics::AatScope::kTotal;
}

std::string num(std::optional<double> v) {
  if (!v) return "undefined";
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6f", *v);
  return buf;
}

void write_file(const fs::path& p, const std::string& text) {
  std::ofstream out(p, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) throw rvb::Error(rvb::ErrorKind::kArchiveIOError, "cannot write '" + p.string() + "'");
}

json read_json(const char* path, rvb::ErrorKind kind) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw rvb::Error(kind, std::string("cannot read '") + path + "'");
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw rvb::Error(kind, std::string("'") + path + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

extern "C" {

const char* rvb_last_error(void) { return g_error.c_str(); }
const char* rvb_last_error_kind(void) { return g_error_kind.c_str(); }
void rvb_string_free(char* s) { std::free(s); }

rvb_status rvb_config_load(const char* path, rvb_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto c = std::make_unique<rvb_config>();
    c->cfg = rvb::orchestrator::RunConfig::load_file(path);
    c->cfg.validate();
    *out = c.release();
  });
}

rvb_status rvb_config_set_seed(rvb_config* cfg, uint64_t seed) {
  return guarded([&] {
    require(cfg, "cfg");
    cfg->cfg.seed = seed;
  });
}

rvb_status rvb_config_set_max_epoch(rvb_config* cfg, int max_epoch) {
  return guarded([&] {
    require(cfg, "cfg");
    if (max_epoch < 1) throw rvb::Error(rvb::ErrorKind::kConfigError, "max_epoch must be >= 1");
    cfg->cfg.max_epoch = max_epoch;
  });
}

rvb_status rvb_config_set_count_delay(rvb_config* cfg, int count_delay) {
  return guarded([&] {
    require(cfg, "cfg");
    if (count_delay < 1) throw rvb::Error(rvb::ErrorKind::kConfigError, "count_delay must be >= 1");
    cfg->cfg.count_delay = count_delay;
  });
}

rvb_status rvb_config_name(const rvb_config* cfg, char** out) {
  return guarded([&] {
    require(cfg, "cfg");
    require(out, "out");
    *out = dup(cfg->cfg.name);
  });
}

void rvb_config_free(rvb_config* cfg) { delete cfg; }

rvb_status rvb_run_execute(const rvb_config* cfg, const char* out_dir, rvb_run** out) {
  return guarded(
      [&] {
        require(cfg, "cfg");
        require(out, "out");
        auto r = std::make_unique<rvb_run>();
        if (out_dir) {
          rvb::archive::ArchiveWriter writer(out_dir, rvb::archive::make_header(cfg->cfg.name, cfg->cfg.domain,
                                                                                cfg->cfg.seed, cfg->cfg.to_json()));
          r->run = rvb::orchestrator::run_game(cfg->cfg, &writer);
        } else {
          r->run = rvb::orchestrator::run_game(cfg->cfg);
        }
        *out = r.release();
      },
      true);
}

rvb_status rvb_run_load(const char* path, rvb_run** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto r = std::make_unique<rvb_run>();
    r->run = rvb::archive::load_run(path);
    *out = r.release();
  });
}

rvb_status rvb_run_save(const rvb_run* run, const char* out_dir) {
  return guarded(
      [&] {
        require(run, "run");
        require(out_dir, "out_dir");
        rvb::archive::save_run(out_dir, run->run);
      },
      true);
}

void rvb_run_free(rvb_run* run) { delete run; }

rvb_status rvb_run_stop_kind(const rvb_run* run, char** out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    *out = dup(run->run.stop ? std::string(rvb::to_string(run->run.stop->kind)) : "");
  });
}

rvb_status rvb_run_summary(const rvb_run* run, char** out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    const auto s = rvb::metrics::compute(run->run);
    std::ostringstream line;
    if (run->run.stop) {
      line << "stop=" << rvb::to_string(run->run.stop->kind) << " epoch=" << run->run.stop->epoch;
    } else {
      line << "stop=none epoch=" << run->run.last_epoch();
    }
    if (!s.rows.empty()) {
      const auto& r = s.rows.back();
      if (s.domain == rvb::Domain::kCyber) {
        line << " C=" << r.c_after << " tdsr=" << num(r.tdsr) << " fdsr=" << num(r.fdsr) << " sdr=" << num(r.sdr)
             << " asc=" << (r.asc ? std::to_string(*r.asc) : "undefined");
      } else {
        line << " dsr=" << num(r.dsr) << " aat=" << num(r.aat) << " fpr=" << num(r.fpr);
      }
    }
    *out = dup(line.str());
  });
}

rvb_status rvb_run_metrics(const rvb_run* run, const char* format, const char* aat_scope, char** out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    const std::string f = format ? format : "tabular";
    const auto s = rvb::metrics::compute(run->run, scope_of(aat_scope));
    if (f == "tabular") {
      *out = dup(rvb::metrics::export_tabular(s));
    } else if (f == "records") {
      *out = dup(rvb::metrics::export_records(s));
    } else {
      throw rvb::Error(rvb::ErrorKind::kConfigError, "format must be 'tabular' or 'records'");
    }
  });
}

rvb_status rvb_run_report(const rvb_run* run, const char* aat_scope, const char* prices_path, char** out) {
  return guarded([&] {
    require(run, "run");
    require(out, "out");
    const auto s = rvb::metrics::compute(run->run, scope_of(aat_scope));
    std::string text = rvb::metrics::report(run->run, s);
    if (prices_path) {
      const auto prices = rvb::cost::PriceTable::from_json(read_json(prices_path, rvb::ErrorKind::kConfigError));
      const auto ledger = rvb::cost::UsageLedger::from_archive(run->run);
      const auto est = rvb::cost::estimate_cost(ledger, prices);
      std::ostringstream extra;
      char buf[64];
      extra << "\n== estimated cost (" << est.currency << ") ==\n";
      for (const auto& [round, c] : est.per_round) {
        std::snprintf(buf, sizeof buf, "%.2f", c);
        extra << "epoch " << round << ": " << buf << '\n';
      }
      std::snprintf(buf, sizeof buf, "%.2f", est.total);
      extra << "total: " << buf << '\n';
      text += extra.str();
    }
    *out = dup(text);
  });
}

rvb_status rvb_run_export(const rvb_run* run, const char* out_dir, const char* aat_scope) {
  return guarded([&] {
    require(run, "run");
    require(out_dir, "out_dir");
    const fs::path dir(out_dir);
    std::error_code ec;
    fs::create_directories(dir, ec);
    if (ec) throw rvb::Error(rvb::ErrorKind::kArchiveIOError, "cannot create '" + dir.string() + "'");
    const auto s = rvb::metrics::compute(run->run, scope_of(aat_scope));
    write_file(dir / "metrics.jsonl", rvb::metrics::export_records(s));
    if (s.domain == rvb::Domain::kCyber) {
      write_file(dir / "metrics.csv", rvb::metrics::export_tabular(s));
      return;
    }
    std::ostringstream rows, cells;
    rows << "epoch,dsr,aat,fpr\n";
    for (const auto& r : s.rows) rows << r.epoch << ',' << num(r.dsr) << ',' << num(r.aat) << ',' << num(r.fpr) << '\n';
    cells << "i,j,value\n";
    for (const auto& c : s.crde) cells << c.guard_round << ',' << c.attack_round << ',' << num(c.value) << '\n';
    write_file(dir / "metrics.csv", rows.str());
    write_file(dir / "crde.csv", cells.str());
    write_file(dir / "attempts.csv", rvb::metrics::export_attempts(run->run));
  });
}

rvb_status rvb_replay(const char* path, int* pass, char** detail) {
  return guarded([&] {
    require(path, "path");
    require(pass, "pass");
    require(detail, "detail");
    const auto v = rvb::orchestrator::replay_archive(path);
    *pass = v.pass ? 1 : 0;
    *detail = dup(v.detail);
  });
}

rvb_status rvb_validate_scenario(const char* path, char** summary) {
  return guarded([&] {
    require(path, "path");
    require(summary, "summary");
    const auto doc = read_json(path, rvb::ErrorKind::kScenarioError);
    std::ostringstream out;
    if (doc.is_object() && doc.value("kind", "") == "content") {
      const auto s = rvb::orchestrator::ContentScenario::load(doc);
      out << "content scenario '" << s.name << "': " << s.tasks.size() << " tasks, " << s.transforms.size()
          << " transforms, " << s.initial_guard.rules().size() << " initial rules";
    } else {
      const auto env = rvb::cyber::Environment::load_scenario(doc);
      out << "cyber scenario '" << env.name() << "': " << env.endpoints().size() << " endpoints, "
          << env.vulnerability_count() << " vulnerabilities, " << env.test_cases().size() << " test cases";
    }
    *summary = dup(out.str());
  });
}

}  // extern "C"
