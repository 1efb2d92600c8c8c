#include "rvb/cost.hpp"

#include "rvb/errors.hpp"

namespace rvb::cost {

using nlohmann::json;

void UsageLedger::record_usage(UsageEntry entry) {
  if (entry.input_tokens < 0 || entry.output_tokens < 0) {
    throw Error(ErrorKind::kUsageError, "negative token count for agent '" + entry.agent + "'");
  }
  entries_.push_back(std::move(entry));
}

TokenTotals UsageLedger::totals() const {
  TokenTotals t;
  for (const auto& e : entries_) {
    t.input += e.input_tokens;
    t.output += e.output_tokens;
  }
  return t;
}

std::map<std::string, TokenTotals> UsageLedger::by_agent() const {
  std::map<std::string, TokenTotals> out;
  for (const auto& e : entries_) {
    out[e.agent].input += e.input_tokens;
    out[e.agent].output += e.output_tokens;
  }
  return out;
}

std::map<int, TokenTotals> UsageLedger::by_round() const {
  std::map<int, TokenTotals> out;
  for (const auto& e : entries_) {
    out[e.round].input += e.input_tokens;
    out[e.round].output += e.output_tokens;
  }
  return out;
}

UsageLedger UsageLedger::from_json(const json& j) {
  UsageLedger ledger;
  try {
    for (const auto& e : j.at("entries")) {
      ledger.record_usage(UsageEntry{e.value("round", 0), e.value("agent", ""), e.at("model").get<std::string>(),
                                     e.at("input_tokens").get<std::int64_t>(),
                                     e.at("output_tokens").get<std::int64_t>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kUsageError, std::string("malformed ledger: ") + e.what());
  }
  return ledger;
}

UsageLedger UsageLedger::from_archive(const archive::RunArchive& run) {
  UsageLedger ledger;
  for (const auto& r : run.records) {
    for (const auto& u : r.token_usage) {
      ledger.record_usage(UsageEntry{r.epoch, u.agent, u.model, u.input_tokens, u.output_tokens});
    }
  }
  return ledger;
}

PriceTable PriceTable::from_json(const json& j) {
  PriceTable table;
  try {
    table.currency_ = j.value("currency", "USD");
    for (const auto& [model, p] : j.at("models").items()) {
      table.set(model, Price{p.at("input").get<double>(), p.at("output").get<double>()});
    }
  } catch (const json::exception& e) {
    throw Error(ErrorKind::kConfigError, std::string("malformed price table: ") + e.what());
  }
  return table;
}

void PriceTable::set(const std::string& model, Price price) {
  if (price.input < 0.0 || price.output < 0.0) {
    throw Error(ErrorKind::kConfigError, "negative price for '" + model + "'");
  }
  prices_[model] = price;
}

const Price* PriceTable::find(const std::string& model) const {
  auto it = prices_.find(model);
  return it == prices_.end() ? nullptr : &it->second;
}

CostEstimate estimate_cost(const UsageLedger& ledger, const PriceTable& prices) {
  CostEstimate est;
  est.currency = prices.currency();
  for (const auto& e : ledger.entries()) {
    const Price* p = prices.find(e.model);
    if (!p) throw Error(ErrorKind::kMissingPrice, "no price for model '" + e.model + "'");
    const double c = static_cast<double>(e.input_tokens) / 1e6 * p->input +
                     static_cast<double>(e.output_tokens) / 1e6 * p->output;
    est.per_round[e.round] += c;
    est.total += c;
  }
  return est;
}

double reduction_ratio(double ours, double baseline) {
  if (baseline <= 0.0) throw Error(ErrorKind::kUsageError, "baseline must be positive");
  return 1.0 - ours / baseline;
}

}  // namespace rvb::cost
