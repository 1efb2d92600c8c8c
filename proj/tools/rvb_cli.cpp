// rvb-cli: thin front end over the C API.

#include <cstdio>
#include <fstream>
#include <functional>
#include <iostream>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "rvb.h"

namespace {

constexpr int kExitInput = 2;
constexpr int kExitRuntime = 3;

struct Owned {
  char* p = nullptr;
  ~Owned() { rvb_string_free(p); }
  std::string str() const { return p ? p : ""; }
};

int fail(rvb_status st) {
  std::cerr << "error: " << rvb_last_error() << "\n";
  return st == RVB_ERR_INPUT ? kExitInput : kExitRuntime;
}

int emit(const std::string& text, const std::string& out_path) {
  if (out_path.empty()) {
    std::cout << text;
    return 0;
  }
  std::ofstream out(out_path, std::ios::binary | std::ios::trunc);
  out << text;
  if (!out) {
    std::cerr << "error: cannot write '" << out_path << "'\n";
    return kExitRuntime;
  }
  return 0;
}

class RunHandle {
 public:
  ~RunHandle() { rvb_run_free(run_); }
  rvb_run** out() { return &run_; }
  rvb_run* get() const { return run_; }

 private:
  rvb_run* run_ = nullptr;
};

int cmd_run(const std::string& config, std::optional<std::uint64_t> seed, std::optional<int> max_epoch,
            std::optional<int> count_delay, std::string out_dir) {
  rvb_config* cfg = nullptr;
  if (auto st = rvb_config_load(config.c_str(), &cfg); st != RVB_OK) return fail(st);
  struct Free {
    rvb_config* c;
    ~Free() { rvb_config_free(c); }
  } guard{cfg};

  if (seed) {
    if (auto st = rvb_config_set_seed(cfg, *seed); st != RVB_OK) return fail(st);
  }
  if (max_epoch) {
    if (auto st = rvb_config_set_max_epoch(cfg, *max_epoch); st != RVB_OK) return fail(st);
  }
  if (count_delay) {
    if (auto st = rvb_config_set_count_delay(cfg, *count_delay); st != RVB_OK) return fail(st);
  }
  if (out_dir.empty()) {
    Owned name;
    if (auto st = rvb_config_name(cfg, &name.p); st != RVB_OK) return fail(st);
    out_dir = "runs/" + name.str() + (seed ? "-seed" + std::to_string(*seed) : "");
  }

  RunHandle run;
  if (auto st = rvb_run_execute(cfg, out_dir.c_str(), run.out()); st != RVB_OK) return fail(st);
  Owned summary, kind;
  if (auto st = rvb_run_summary(run.get(), &summary.p); st != RVB_OK) return fail(st);
  if (auto st = rvb_run_stop_kind(run.get(), &kind.p); st != RVB_OK) return fail(st);
  std::cout << "archive=" << out_dir << "/archive.jsonl\n" << summary.str() << "\n";
  return kind.str() == "ExecutionFailure" ? kExitRuntime : 0;
}

int with_run(const std::string& path, const std::function<int(rvb_run*)>& body) {
  RunHandle run;
  if (auto st = rvb_run_load(path.c_str(), run.out()); st != RVB_OK) return fail(st);
  return body(run.get());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Red-vs-Blue adversarial hardening engine"};
  app.require_subcommand(1);

  std::string config, out, format = "tabular", aat_scope = "total", archive, prices, scenario;
  std::optional<std::uint64_t> seed;
  std::optional<int> max_epoch, count_delay;

  auto* run = app.add_subcommand("run", "run a game from a config file");
  run->add_option("--config", config, "run config (JSON)")->required();
  run->add_option("--seed", seed, "override the run seed");
  run->add_option("--max-epoch", max_epoch, "override max_epoch")->check(CLI::PositiveNumber);
  run->add_option("--count-delay", count_delay, "override count_delay")->check(CLI::PositiveNumber);
  run->add_option("--out", out, "run directory (default runs/<name>[-seed<seed>])");

  auto* replay = app.add_subcommand("replay", "re-execute an archive and compare");
  replay->add_option("archive", archive, "run directory or archive.jsonl")->required();

  auto* metrics = app.add_subcommand("metrics", "print metrics recomputed from an archive");
  metrics->add_option("archive", archive, "run directory or archive.jsonl")->required();
  metrics->add_option("--format", format, "tabular or records")
      ->check(CLI::IsMember({"tabular", "records"}));
  metrics->add_option("--aat-scope", aat_scope, "total or inner")->check(CLI::IsMember({"total", "inner"}));
  metrics->add_option("--out", out, "write to a file instead of stdout");

  auto* report = app.add_subcommand("report", "print metric tables for a run");
  report->add_option("archive", archive, "run directory or archive.jsonl")->required();
  report->add_option("--aat-scope", aat_scope, "total or inner")->check(CLI::IsMember({"total", "inner"}));
  report->add_option("--prices", prices, "price table for a cost estimate");
  report->add_option("--out", out, "write to a file instead of stdout");

  auto* exp = app.add_subcommand("export", "write metric files for plotting");
  exp->add_option("archive", archive, "run directory or archive.jsonl")->required();
  exp->add_option("--aat-scope", aat_scope, "total or inner")->check(CLI::IsMember({"total", "inner"}));
  exp->add_option("--out", out, "output directory")->required();

  auto* validate = app.add_subcommand("validate-scenario", "check a scenario document");
  validate->add_option("scenario", scenario, "scenario file")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitInput;
  }

  if (*run) return cmd_run(config, seed, max_epoch, count_delay, out);

  if (*replay) {
    int pass = 0;
    Owned detail;
    if (auto st = rvb_replay(archive.c_str(), &pass, &detail.p); st != RVB_OK) return fail(st);
    std::cout << detail.str() << "\n";
    return pass ? 0 : kExitRuntime;
  }

  if (*metrics) {
    return with_run(archive, [&](rvb_run* r) {
      Owned text;
      if (auto st = rvb_run_metrics(r, format.c_str(), aat_scope.c_str(), &text.p); st != RVB_OK) return fail(st);
      return emit(text.str(), out);
    });
  }

  if (*report) {
    return with_run(archive, [&](rvb_run* r) {
      Owned text;
      const char* p = prices.empty() ? nullptr : prices.c_str();
      if (auto st = rvb_run_report(r, aat_scope.c_str(), p, &text.p); st != RVB_OK) return fail(st);
      return emit(text.str(), out);
    });
  }

  if (*exp) {
    return with_run(archive, [&](rvb_run* r) {
      if (auto st = rvb_run_export(r, out.c_str(), aat_scope.c_str()); st != RVB_OK) return fail(st);
      std::cout << "exported to " << out << "\n";
      return 0;
    });
  }

  Owned summary;
  if (auto st = rvb_validate_scenario(scenario.c_str(), &summary.p); st != RVB_OK) return fail(st);
  std::cout << summary.str() << "\n";
  return 0;
}
