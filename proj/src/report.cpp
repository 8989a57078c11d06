#include "faultbench/report.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <map>
#include <sstream>

#include <json.hpp>

#include "faultbench/dataset_io.hpp"
#include "faultbench/error.hpp"

namespace faultbench::report {

namespace {

using nlohmann::ordered_json;

ordered_json number(double v) {
  if (!std::isfinite(v)) return nullptr;
  return v;
}

double number_from(const ordered_json& j, const char* key) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return kNaN;
  if (!it->is_number()) throw ParseError(std::string("report: '") + key + "' must be a number or null");
  return it->get<double>();
}

ordered_json stat_json(const Stat& s) { return {{"median", number(s.median)}, {"mean", number(s.mean)}}; }

ordered_json record_json(const RunRecord& r) {
  ordered_json j;
  j["experiment"] = r.experiment;
  j["seed"] = r.seed;
  j["status"] = to_string(r.status);
  j["abort_time_s"] = r.abort_time_s ? number(*r.abort_time_s) : ordered_json(nullptr);
  j["message"] = r.message;
  j["dataset"] = r.dataset;
  j["config_hash"] = r.config_hash;
  j["reference"] = r.reference;
  j["poses"] = r.poses;
  j["fixes_accepted"] = r.fixes_accepted;
  j["fixes_rejected"] = r.fixes_rejected;
  j["fault_events"] = r.fault_events;
  j["ate"] = {{"mean_m", number(r.ate_mean_m)},
              {"rmse_m", number(r.ate_rmse_m)},
              {"final_m", number(r.ate_final_m)},
              {"rot_mean_rad", number(r.ate_rot_mean_rad)}};
  j["rpe"] = {{"mean_m", number(r.rpe_mean_m)},
              {"rot_mean_rad", number(r.rpe_rot_mean_rad)},
              {"delta_steps", r.rpe_delta_steps}};
  j["growth"] = {{"mean_mps", number(r.growth_mean_mps)},
                 {"peak_mps", number(r.growth_peak_mps)},
                 {"accel_mps2", number(r.growth_accel_mps2)}};
  j["fault_log"] = {{"path", r.fault_log_path}, {"digest", r.fault_log_digest}};
  return j;
}

template <typename T>
T value_or(const ordered_json& j, const char* key, T fallback) {
  const auto it = j.find(key);
  if (it == j.end() || it->is_null()) return fallback;
  return it->get<T>();
}

RunRecord record_from(const ordered_json& j) {
  if (!j.is_object()) throw ParseError("report: record must be an object");
  RunRecord r;
  r.experiment = j.at("experiment").get<std::string>();
  r.seed = j.at("seed").get<std::uint64_t>();
  r.status = parse_run_status(j.at("status").get<std::string>());
  if (const auto it = j.find("abort_time_s"); it != j.end() && !it->is_null()) r.abort_time_s = it->get<double>();
  r.message = value_or<std::string>(j, "message", "");
  r.dataset = value_or<std::string>(j, "dataset", "");
  r.config_hash = value_or<std::string>(j, "config_hash", "");
  r.reference = value_or<std::string>(j, "reference", "");
  r.poses = value_or<std::size_t>(j, "poses", 0);
  r.fixes_accepted = value_or<std::size_t>(j, "fixes_accepted", 0);
  r.fixes_rejected = value_or<std::size_t>(j, "fixes_rejected", 0);
  r.fault_events = value_or<std::size_t>(j, "fault_events", 0);
  if (const auto it = j.find("ate"); it != j.end()) {
    r.ate_mean_m = number_from(*it, "mean_m");
    r.ate_rmse_m = number_from(*it, "rmse_m");
    r.ate_final_m = number_from(*it, "final_m");
    r.ate_rot_mean_rad = number_from(*it, "rot_mean_rad");
  }
  if (const auto it = j.find("rpe"); it != j.end()) {
    r.rpe_mean_m = number_from(*it, "mean_m");
    r.rpe_rot_mean_rad = number_from(*it, "rot_mean_rad");
    r.rpe_delta_steps = value_or<std::int64_t>(*it, "delta_steps", 0);
  }
  if (const auto it = j.find("growth"); it != j.end()) {
    r.growth_mean_mps = number_from(*it, "mean_mps");
    r.growth_peak_mps = number_from(*it, "peak_mps");
    r.growth_accel_mps2 = number_from(*it, "accel_mps2");
  }
  if (const auto it = j.find("fault_log"); it != j.end()) {
    r.fault_log_path = value_or<std::string>(*it, "path", "");
    r.fault_log_digest = value_or<std::string>(*it, "digest", "");
  }
  return r;
}

std::string csv_number(double v) { return std::isfinite(v) ? io::format_double(v) : "nan"; }

// Experiment names may contain commas or quotes.
std::string csv_field(const std::string& s) {
  if (s.find_first_of(",\"\n") == std::string::npos) return s;
  std::string out = "\"";
  for (char c : s) {
    if (c == '"') out += '"';
    out += c;
  }
  return out + '"';
}

void write_text(const std::filesystem::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << text;
  if (!out) throw IoError("write failed: " + path.string());
}

}  // namespace

std::string_view to_string(RunStatus s) {
  switch (s) {
    case RunStatus::ok:
      return "ok";
    case RunStatus::aborted:
      return "aborted";
    case RunStatus::failed:
      return "failed";
  }
  return "unknown";
}

RunStatus parse_run_status(std::string_view s) {
  if (s == "ok") return RunStatus::ok;
  if (s == "aborted") return RunStatus::aborted;
  if (s == "failed") return RunStatus::failed;
  throw ParseError("report: unknown run status '" + std::string(s) + "'");
}

std::string_view to_string(TrendStatus s) {
  switch (s) {
    case TrendStatus::pass:
      return "pass";
    case TrendStatus::fail:
      return "fail";
    case TrendStatus::skipped:
      return "skipped";
  }
  return "unknown";
}

Stat summarize(std::vector<double> values) {
  std::erase_if(values, [](double v) { return !std::isfinite(v); });
  Stat s;
  if (values.empty()) return s;
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  s.median = n % 2 ? values[n / 2] : 0.5 * (values[n / 2 - 1] + values[n / 2]);
  double sum = 0.0;
  for (double v : values) sum += v;
  s.mean = sum / static_cast<double>(n);
  return s;
}

std::vector<Aggregate> aggregate(const std::vector<RunRecord>& records) {
  std::map<std::string, std::vector<const RunRecord*>> groups;
  for (const auto& r : records) groups[r.experiment].push_back(&r);

  std::vector<Aggregate> out;
  out.reserve(groups.size());
  for (const auto& [name, rs] : groups) {
    Aggregate a;
    a.experiment = name;
    a.dataset = rs.front()->dataset;
    a.config_hash = rs.front()->config_hash;
    a.runs = rs.size();
    std::vector<double> ate, rpe, growth, accel;
    for (const RunRecord* r : rs) {
      switch (r->status) {
        case RunStatus::ok:
          ++a.ok;
          break;
        case RunStatus::aborted:
          ++a.aborted;
          break;
        case RunStatus::failed:
          ++a.failed;
          break;
      }
      ate.push_back(r->ate_mean_m);
      rpe.push_back(r->rpe_mean_m);
      growth.push_back(r->growth_mean_mps);
      accel.push_back(r->growth_accel_mps2);
    }
    a.ate_mean_m = summarize(std::move(ate));
    a.rpe_mean_m = summarize(std::move(rpe));
    a.growth_mean_mps = summarize(std::move(growth));
    a.growth_accel_mps2 = summarize(std::move(accel));
    out.push_back(std::move(a));
  }
  return out;
}

void Report::finalize() {
  std::stable_sort(records.begin(), records.end(), [](const RunRecord& a, const RunRecord& b) {
    return a.experiment != b.experiment ? a.experiment < b.experiment : a.seed < b.seed;
  });
  std::stable_sort(failures.begin(), failures.end(),
                   [](const Failure& a, const Failure& b) { return a.experiment < b.experiment; });
  aggregates = aggregate(records);
  std::sort(provenance.datasets.begin(), provenance.datasets.end());
  provenance.datasets.erase(std::unique(provenance.datasets.begin(), provenance.datasets.end()),
                            provenance.datasets.end());
}

std::string to_json(const Report& report) {
  ordered_json j;
  j["provenance"] = {{"tool", "faultbench"},
                     {"version", report.provenance.tool_version},
                     {"statistic", report.provenance.statistic},
                     {"datasets", report.provenance.datasets}};
  j["aggregates"] = ordered_json::array();
  for (const auto& a : report.aggregates) {
    j["aggregates"].push_back({{"experiment", a.experiment},
                               {"dataset", a.dataset},
                               {"config_hash", a.config_hash},
                               {"runs", a.runs},
                               {"ok", a.ok},
                               {"aborted", a.aborted},
                               {"failed", a.failed},
                               {"ate_mean_m", stat_json(a.ate_mean_m)},
                               {"rpe_mean_m", stat_json(a.rpe_mean_m)},
                               {"growth_mean_mps", stat_json(a.growth_mean_mps)},
                               {"growth_accel_mps2", stat_json(a.growth_accel_mps2)}});
  }
  j["failures"] = ordered_json::array();
  for (const auto& f : report.failures) {
    j["failures"].push_back({{"experiment", f.experiment}, {"error", f.error}, {"message", f.message}});
  }
  j["trends"] = ordered_json::array();
  for (const auto& t : report.trends) {
    j["trends"].push_back({{"name", t.name}, {"status", to_string(t.status)}, {"detail", t.detail}});
  }
  j["records"] = ordered_json::array();
  for (const auto& r : report.records) j["records"].push_back(record_json(r));
  return j.dump(2) + "\n";
}

std::string to_csv(const Report& report) {
  std::ostringstream out;
  out << kCsvHeader << '\n';
  for (const auto& r : report.records) {
    out << csv_field(r.experiment) << ',' << r.seed << ',' << csv_number(r.ate_mean_m) << ','
        << csv_number(r.ate_rmse_m) << ',' << csv_number(r.rpe_mean_m) << ',' << csv_number(r.growth_mean_mps)
        << ',' << csv_number(r.growth_peak_mps) << ',' << to_string(r.status) << '\n';
  }
  return out.str();
}

Report parse_json(std::string_view text) {
  ordered_json j;
  try {
    j = ordered_json::parse(text);
  } catch (const nlohmann::json::parse_error& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  Report report;
  try {
    const ordered_json* records = &j;
    if (j.is_object()) {
      records = &j.at("records");
      if (const auto p = j.find("provenance"); p != j.end()) {
        report.provenance.tool_version = value_or<std::string>(*p, "version", "");
        report.provenance.statistic = value_or<std::string>(*p, "statistic", "median");
        if (const auto d = p->find("datasets"); d != p->end()) {
          report.provenance.datasets = d->get<std::vector<std::string>>();
        }
      }
      if (const auto f = j.find("failures"); f != j.end()) {
        for (const auto& e : *f) {
          report.failures.push_back({e.at("experiment").get<std::string>(), e.at("error").get<std::string>(),
                                     e.at("message").get<std::string>()});
        }
      }
      if (const auto t = j.find("trends"); t != j.end()) {
        for (const auto& e : *t) {
          const auto s = e.at("status").get<std::string>();
          TrendFlag flag{e.at("name").get<std::string>(), TrendStatus::skipped, e.at("detail").get<std::string>()};
          if (s == "pass") flag.status = TrendStatus::pass;
          if (s == "fail") flag.status = TrendStatus::fail;
          report.trends.push_back(std::move(flag));
        }
      }
    }
    if (!records->is_array()) throw ParseError("report: records must be an array");
    for (const auto& r : *records) report.records.push_back(record_from(r));
  } catch (const nlohmann::json::exception& e) {
    throw ParseError(std::string("report: ") + e.what());
  }
  for (const auto& r : report.records) {
    if (!r.dataset.empty()) report.provenance.datasets.push_back(r.dataset);
  }
  report.finalize();
  return report;
}

void write(const std::filesystem::path& dir, const Report& report, bool json, bool csv) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  if (json) write_text(dir / "report.json", to_json(report));
  if (csv) write_text(dir / "report.csv", to_csv(report));
}

}  // namespace faultbench::report
