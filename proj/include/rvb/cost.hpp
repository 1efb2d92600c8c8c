#pragma once

// Token accounting and price-table cost estimates. Prices are per 1e6 tokens.

#include <cstdint>
#include <map>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "rvb/archive.hpp"

namespace rvb::cost {

struct UsageEntry {
  int round = 0;
  std::string agent;
  std::string model;
  std::int64_t input_tokens = 0;
  std::int64_t output_tokens = 0;
};

struct TokenTotals {
  std::int64_t input = 0;
  std::int64_t output = 0;
  std::int64_t total() const { return input + output; }
};

class UsageLedger {
 public:
  // Throws UsageError on negative counts.
  void record_usage(UsageEntry entry);

  const std::vector<UsageEntry>& entries() const { return entries_; }
  TokenTotals totals() const;
  std::map<std::string, TokenTotals> by_agent() const;
  std::map<int, TokenTotals> by_round() const;

  // {"entries": [{"round", "agent", "model", "input_tokens", "output_tokens"}]}
  static UsageLedger from_json(const nlohmann::json& j);
  static UsageLedger from_archive(const archive::RunArchive& run);

 private:
  std::vector<UsageEntry> entries_;
};

struct Price {
  double input = 0.0;
  double output = 0.0;
};

class PriceTable {
 public:
  // {"currency": "USD", "models": {"name": {"input": p, "output": p}}}
  static PriceTable from_json(const nlohmann::json& j);

  void set(const std::string& model, Price price);
  const Price* find(const std::string& model) const;
  const std::string& currency() const { return currency_; }

 private:
  std::string currency_ = "USD";
  std::map<std::string, Price> prices_;
};

struct CostEstimate {
  std::string currency;
  std::map<int, double> per_round;
  double total = 0.0;
};

// Throws MissingPrice when a ledger model has no price.
CostEstimate estimate_cost(const UsageLedger& ledger, const PriceTable& prices);

// 1 - ours / baseline.
double reduction_ratio(double ours, double baseline);

}  // namespace rvb::cost
