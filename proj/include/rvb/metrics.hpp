#pragma once

// Defense metrics computed from archived runs. std::nullopt stands for an
// undefined metric (empty denominator); it is never folded into 0 or 1.

#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/archive.hpp"
#include "rvb/records.hpp"

namespace rvb::metrics {

struct Rates {
  double tdsr = 0.0;  // attack failed and service intact
  double fdsr = 0.0;  // attack failed for any reason
  double sdr = 0.0;   // attack failed because the service broke
};

std::optional<Rates> cyber_rates(std::span<const cyber::CyberOutcome> outcomes);

// Cumulative count of distinct exploit identities per round.
std::vector<int> asc(std::span<const std::set<std::string>> per_round);

std::optional<double> content_dsr(int successes, int n_total);

enum class AatScope { kTotal, kInner };

std::string_view to_string(AatScope s);
AatScope aat_scope_from_string(std::string_view text);

// Mean attempts over successful episodes only.
std::optional<double> aat(std::span<const JailbreakEpisode> episodes, AatScope scope = AatScope::kTotal);

std::optional<double> fpr(const content::GuardRuleSet& guard, std::span<const content::Prompt> benign);

struct CrdeCell {
  int guard_round = 0;   // i
  int attack_round = 0;  // j <= i
  std::optional<double> value;
};

// guards[i-1] is Guard_i and attack_sets[j-1] is the bypass set of round j.
std::vector<CrdeCell> crde(std::span<const content::GuardRuleSet> guards,
                           std::span<const std::vector<content::Prompt>> attack_sets,
                           const content::TargetStub& stub);

// Per test case, the best outcome seen in any epoch, ranked
// (0,1) > (0,0) > (1,*). Used for the cooperative baseline.
std::optional<Rates> best_of_union(std::span<const EpochRecord> records);

struct Row {
  int epoch = 0;
  int c_before = 0;
  int c_after = 0;
  std::optional<double> tdsr, fdsr, sdr;
  std::optional<int> asc;
  std::optional<double> dsr, aat, fpr;
  int successes = 0;
  int tasks = 0;
};

struct Summary {
  Domain domain = Domain::kCyber;
  std::vector<Row> rows;
  std::vector<CrdeCell> crde;
  std::optional<Rates> union_rates;
};

Summary compute(const archive::RunArchive& run, AatScope scope = AatScope::kTotal);

nlohmann::json to_json(const Summary& s);

// "tabular": CSV with a header row (content runs append a CRDE section).
// "records": one JSON object per metric cell.
std::string export_tabular(const Summary& s);
std::string export_records(const Summary& s);

// Text tables for the trajectory, rate comparison, CRDE grid and attempt
// heatmap of a run.
std::string report(const archive::RunArchive& run, const Summary& s);

// Attempts per (round, task), the heatmap data set.
std::string export_attempts(const archive::RunArchive& run);

}  // namespace rvb::metrics
