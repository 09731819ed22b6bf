#include <algorithm>
#include <fstream>
#include <limits>
#include <sstream>

#include "kdisc/core/error.hpp"
#include "kdisc/optimizer.hpp"

namespace kdisc::optimize {

using nlohmann::json;

json TrialRecord::to_json(bool include_time) const {
  json j = {{"index", index},     {"kind", kind},     {"payload", payload},
            {"fold_scores", fold_scores}, {"penalty", penalty}, {"loss", loss},
            {"failed", failed}};
  if (!error.empty()) j["error"] = error;
  if (include_time) j["wall_seconds"] = wall_seconds;
  return j;
}

TrialRecord TrialRecord::from_json(const json& j) {
  TrialRecord r;
  r.index = j.at("index").get<std::size_t>();
  r.kind = j.at("kind").get<std::string>();
  r.payload = j.value("payload", json::object());
  r.fold_scores = j.value("fold_scores", std::vector<double>{});
  r.penalty = j.value("penalty", 0.0);
  r.loss = j.at("loss").get<double>();
  r.failed = j.value("failed", false);
  r.error = j.value("error", std::string{});
  r.wall_seconds = j.value("wall_seconds", 0.0);
  return r;
}

TrialLedger::TrialLedger(std::string jsonl_path) : path_(std::move(jsonl_path)) {
  // Start a fresh file; the run owns it.
  std::ofstream(path_, std::ios::trunc);
}

void TrialLedger::append(const TrialRecord& r) {
  std::lock_guard<std::mutex> lock(mu_);
  trials_.push_back(r);
  if (!path_.empty()) {
    std::ofstream out(path_, std::ios::app);
    if (!out) throw DataError("cannot append to ledger " + path_);
    out << r.to_json().dump() << '\n';
  }
}

std::vector<double> TrialLedger::running_min() const {
  std::vector<double> out;
  double best = std::numeric_limits<double>::infinity();
  for (const auto& t : trials_) {
    best = std::min(best, t.loss);
    out.push_back(best);
  }
  return out;
}

std::string TrialLedger::to_jsonl(bool include_time) const {
  std::string s;
  for (const auto& t : trials_) {
    s += t.to_json(include_time).dump();
    s += '\n';
  }
  return s;
}

std::vector<TrialRecord> TrialLedger::read_jsonl(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot read ledger " + path);
  std::vector<TrialRecord> out;
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.empty()) continue;
    try {
      out.push_back(TrialRecord::from_json(json::parse(line)));
    } catch (const json::exception& e) {
      throw DataError(path + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

}  // namespace kdisc::optimize
