#include <json.hpp>

#include "kdisc/core/error.hpp"
#include "kdisc/core/io.hpp"
#include "kdisc/dataset.hpp"

namespace kdisc {

using nlohmann::json;

namespace {

json value_to_json(const Value& v) {
  if (std::holds_alternative<double>(v)) return std::get<double>(v);
  if (std::holds_alternative<std::string>(v)) return std::get<std::string>(v);
  return nullptr;
}

Value value_from_json(const json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  if (j.is_boolean()) return j.get<bool>() ? 1.0 : 0.0;
  throw DataError("unsupported field value: " + j.dump());
}

const char* outcome_name(KidneyOutcome k) {
  switch (k) {
    case KidneyOutcome::Transplanted: return "transplanted";
    case KidneyOutcome::Discarded: return "discarded";
    case KidneyOutcome::Unknown: return nullptr;
  }
  return nullptr;
}

KidneyOutcome outcome_from_json(const json& j) {
  if (j.is_null()) return KidneyOutcome::Unknown;
  const auto s = j.get<std::string>();
  if (s == "transplanted") return KidneyOutcome::Transplanted;
  if (s == "discarded") return KidneyOutcome::Discarded;
  if (s == "unknown") return KidneyOutcome::Unknown;
  throw DataError("unknown kidney outcome '" + s + "'");
}

json donor_to_json(const DonorRecord& r) {
  json j;
  j["donor_id"] = r.donor_id;
  json st = json::object();
  for (const auto& [k, v] : r.static_vars) st[k] = value_to_json(v);
  j["static"] = std::move(st);
  json ts = json::object();
  for (const auto& [k, series] : r.timeseries) {
    json arr = json::array();
    for (const auto& p : series) arr.push_back(json::array({p.t, value_to_json(p.value)}));
    ts[k] = std::move(arr);
  }
  j["timeseries"] = std::move(ts);
  j["medications"] = r.medications;
  json kid = json::array();
  for (auto k : r.kidneys) {
    const char* name = outcome_name(k);
    kid.push_back(name ? json(name) : json(nullptr));
  }
  j["kidneys"] = std::move(kid);
  return j;
}

}  // namespace

DonorRecord donor_from_json_line(const std::string& line) {
  const json j = json::parse(line);
  DonorRecord r;
  r.donor_id = j.at("donor_id").get<std::string>();
  if (j.contains("static"))
    for (const auto& [k, v] : j.at("static").items()) r.static_vars[k] = value_from_json(v);
  if (j.contains("timeseries")) {
    for (const auto& [k, arr] : j.at("timeseries").items()) {
      TimeSeries ts;
      for (const auto& p : arr) ts.push_back({p.at(0).get<double>(), value_from_json(p.at(1))});
      r.timeseries[k] = std::move(ts);
    }
  }
  if (j.contains("medications")) r.medications = j.at("medications").get<std::vector<std::string>>();
  const auto& kid = j.at("kidneys");
  if (!kid.is_array() || kid.size() != 2)
    throw DataError("donor " + r.donor_id + ": 'kidneys' must hold two outcomes");
  r.kidneys = {outcome_from_json(kid[0]), outcome_from_json(kid[1])};
  return r;
}

std::vector<DonorRecord> read_cohort_jsonl(const std::filesystem::path& path) {
  const std::string text = read_text(path);
  std::vector<DonorRecord> out;
  std::size_t pos = 0;
  std::size_t line_no = 0;
  while (pos < text.size()) {
    std::size_t end = text.find('\n', pos);
    if (end == std::string::npos) end = text.size();
    std::string line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    try {
      out.push_back(donor_from_json_line(line));
    } catch (const json::exception& e) {
      throw DataError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return out;
}

std::string cohort_to_jsonl(const std::vector<DonorRecord>& records) {
  std::string out;
  for (const auto& r : records) {
    out += donor_to_json(r).dump();
    out += '\n';
  }
  return out;
}

void write_cohort_jsonl(const std::filesystem::path& path, const std::vector<DonorRecord>& records) {
  write_text(path, cohort_to_jsonl(records));
}

void write_feature_matrix(const std::filesystem::path& csv, const FeatureMatrix& m) {
  std::vector<std::string> header{"donor_id", "label"};
  header.insert(header.end(), m.feature_names.begin(), m.feature_names.end());
  CsvWriter w(header);
  for (std::size_t r = 0; r < m.rows(); ++r) {
    std::vector<std::string> cells;
    cells.reserve(header.size());
    cells.push_back(m.donor_ids.empty() ? std::to_string(r) : m.donor_ids[r]);
    cells.push_back(m.labels.empty() ? "" : std::to_string(m.labels[r]));
    for (std::size_t c = 0; c < m.cols(); ++c) cells.push_back(format_double(m.values(r, c)));
    w.row(cells);
  }
  w.save(csv);

  json schema;
  schema["label"] = {{"column", "label"}, {"positive", "transplanted"}, {"encoding", "1=transplanted,0=discarded"}};
  json feats = json::array();
  for (std::size_t c = 0; c < m.cols(); ++c)
    feats.push_back({{"name", m.feature_names[c]}, {"type", to_string(m.feature_types[c])}});
  schema["features"] = std::move(feats);
  auto side = csv;
  side += ".schema.json";
  write_text(side, schema.dump(2) + "\n");
}

FeatureMatrix read_feature_matrix(const std::filesystem::path& csv) {
  auto table = read_csv(csv);
  auto side = csv;
  side += ".schema.json";
  const json schema = json::parse(read_text(side));
  FeatureMatrix m;
  for (const auto& f : schema.at("features")) {
    m.feature_names.push_back(f.at("name").get<std::string>());
    m.feature_types.push_back(feature_type_from_string(f.at("type").get<std::string>()));
  }
  if (table.header.size() != m.feature_names.size() + 2)
    throw DataError(csv.string() + ": header does not match schema sidecar");
  m.values = Matrix(table.rows.size(), m.feature_names.size());
  for (std::size_t r = 0; r < table.rows.size(); ++r) {
    const auto& row = table.rows[r];
    if (row.size() != table.header.size()) throw DataError(csv.string() + ": ragged row");
    m.donor_ids.push_back(row[0]);
    m.labels.push_back(row[1].empty() ? -1 : std::stoi(row[1]));
    for (std::size_t c = 0; c < m.feature_names.size(); ++c) m.values(r, c) = parse_double(row[c + 2]);
  }
  return m;
}

}  // namespace kdisc
