#include "citadel/report.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>

#include "citadel/config.hpp"
#include "citadel/errors.hpp"
#include "citadel/hash.hpp"

namespace citadel {
namespace {

using nlohmann::json;

json percent_or_null(const std::optional<double>& v) {
  return v ? json(to_percent_1dp(*v)) : json(nullptr);
}

std::string percent_cell(const std::optional<double>& v) {
  if (!v) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", to_percent_1dp(*v));
  return buf;
}

std::string cell(const json& v) {
  if (v.is_null()) return {};
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.1f", v.get<double>());
  return buf;
}

std::string number(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

json mean_std(const MeanStd& s) {
  if (!s.defined()) return {{"mean", nullptr}, {"std", nullptr}, {"n", 0}};
  return {{"mean", to_percent_1dp(s.mean)}, {"std", to_percent_1dp(s.std)}, {"n", s.n}};
}

std::ofstream open_out(const std::filesystem::path& path) {
  if (path.has_parent_path()) std::filesystem::create_directories(path.parent_path());
  std::ofstream out(path, std::ios::binary);
  if (!out) throw DataError("cannot write " + path.string());
  return out;
}

std::vector<std::string> split_csv(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

std::optional<double> parse_rate(const std::string& s, const std::string& where) {
  if (s.empty()) return std::nullopt;
  try {
    std::size_t used = 0;
    const double v = std::stod(s, &used);
    if (used != s.size()) throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad number '" + s + "'");
  }
}

std::uint64_t parse_count(const std::string& s, const std::string& where) {
  try {
    std::size_t used = 0;
    const unsigned long long v = std::stoull(s, &used);
    if (used != s.size() || s.empty() || s[0] == '-') throw std::invalid_argument(s);
    return v;
  } catch (const std::exception&) {
    throw DataError(where + ": bad count '" + s + "'");
  }
}

const char* kMetricsHeader = "seed,month,tp,fp,tn,fn,f1,fnr,fpr";

void write_rows(std::ofstream& out, const std::vector<MetricsRow>& rows) {
  out << kMetricsHeader << '\n';
  for (const auto& r : rows) {
    out << r.seed << ',' << r.month << ',' << r.tp << ',' << r.fp << ',' << r.tn << ',' << r.fn << ','
        << (r.f1 ? cell(*r.f1) : "") << ',' << (r.fnr ? cell(*r.fnr) : "") << ','
        << (r.fpr ? cell(*r.fpr) : "") << '\n';
  }
}

}  // namespace

json to_json(const MonthlyMetrics& m) {
  return {{"month", m.month}, {"tp", m.tp}, {"fp", m.fp}, {"tn", m.tn}, {"fn", m.fn},
          {"f1", percent_or_null(m.f1)}, {"fnr", percent_or_null(m.fnr)}, {"fpr", percent_or_null(m.fpr)}};
}

json to_json(const MetricSummary& s) {
  return {{"f1", mean_std(s.f1)}, {"fnr", mean_std(s.fnr)}, {"fpr", mean_std(s.fpr)}};
}

json to_json(const StreamResult& r) {
  json runs = json::array();
  json seeds = json::array();
  for (const auto& run : r.runs) {
    seeds.push_back(run.seed);
    json months = json::array();
    for (std::size_t i = 0; i < run.months.size(); ++i) {
      json m = to_json(run.months[i]);
      if (i < run.labeled_sizes.size()) m["labeled_size"] = run.labeled_sizes[i];
      if (i < run.unlabeled_sizes.size()) m["unlabeled_size"] = run.unlabeled_sizes[i];
      if (i < run.selected_ids.size()) m["selected"] = run.selected_ids[i].size();
      months.push_back(std::move(m));
    }
    runs.push_back({{"seed", run.seed},
                    {"months", std::move(months)},
                    {"invariant_checks", run.invariants.checks},
                    {"invariant_violations", run.invariants.violations}});
  }
  json per_month = json::array();
  for (std::size_t i = 0; i < r.per_month.size(); ++i) {
    json m = to_json(r.per_month[i]);
    if (!r.runs.empty() && i < r.runs.front().months.size()) m["month"] = r.runs.front().months[i].month;
    per_month.push_back(std::move(m));
  }
  return {{"schema_version", kReportSchemaVersion},
          {"config_hash", r.config_hash},
          {"seeds", std::move(seeds)},
          {"aggregate", to_json(r.aggregate)},
          {"per_month", std::move(per_month)},
          {"runs", std::move(runs)}};
}

json to_json(const TrainReport& r) {
  json epochs = json::array();
  for (std::size_t e = 0; e < r.epoch_losses.size(); ++e) {
    const LossBreakdown& l = r.epoch_losses[e];
    epochs.push_back({{"epoch", e + 1},
                      {"sup", l.sup},
                      {"unsup", l.unsup},
                      {"con", l.con},
                      {"total", l.total},
                      {"confident_fraction", e < r.confident_fraction.size() ? r.confident_fraction[e] : 0.0}});
  }
  return {{"schema_version", kReportSchemaVersion},
          {"seed", r.seed},
          {"steps", r.steps},
          {"seconds", r.seconds},
          {"epochs", std::move(epochs)}};
}

void write_json(const std::filesystem::path& path, const json& j) {
  std::ofstream out = open_out(path);
  out << j.dump(2) << '\n';
  if (!out) throw DataError("failed writing " + path.string());
}

json read_json(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  try {
    return json::parse(in);
  } catch (const json::exception& e) {
    throw DataError(path.string() + " is not valid JSON: " + e.what());
  }
}

std::vector<MetricsRow> metrics_rows(const json& report) {
  std::vector<MetricsRow> rows;
  try {
    for (const auto& run : report.at("runs")) {
      for (const auto& m : run.at("months")) {
        MetricsRow r;
        r.seed = run.at("seed").get<std::uint64_t>();
        r.month = m.at("month").get<std::string>();
        r.tp = m.at("tp").get<std::size_t>();
        r.fp = m.at("fp").get<std::size_t>();
        r.tn = m.at("tn").get<std::size_t>();
        r.fn = m.at("fn").get<std::size_t>();
        auto rate = [&](const char* k) -> std::optional<double> {
          const json& v = m.at(k);
          return v.is_null() ? std::nullopt : std::optional<double>(v.get<double>());
        };
        r.f1 = rate("f1");
        r.fnr = rate("fnr");
        r.fpr = rate("fpr");
        rows.push_back(std::move(r));
      }
    }
  } catch (const json::exception& e) {
    throw DataError(std::string("malformed report: ") + e.what());
  }
  return rows;
}

void json_report_to_csv(const json& report, const std::filesystem::path& path) {
  const std::vector<MetricsRow> rows = metrics_rows(report);
  std::ofstream out = open_out(path);
  write_rows(out, rows);
}

void write_metrics_csv(const std::filesystem::path& path, const StreamResult& r) {
  json_report_to_csv(to_json(r), path);
}

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::string line;
  if (!std::getline(in, line) || split_csv(line) != split_csv(kMetricsHeader)) {
    throw DataError(path.string() + ": unexpected header");
  }
  std::vector<MetricsRow> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    const auto f = split_csv(line);
    const std::string where = path.string() + ":" + std::to_string(lineno);
    if (f.size() != 9) throw DataError(where + ": expected 9 columns");
    MetricsRow r;
    r.seed = parse_count(f[0], where);
    r.month = f[1];
    r.tp = parse_count(f[2], where);
    r.fp = parse_count(f[3], where);
    r.tn = parse_count(f[4], where);
    r.fn = parse_count(f[5], where);
    r.f1 = parse_rate(f[6], where);
    r.fnr = parse_rate(f[7], where);
    r.fpr = parse_rate(f[8], where);
    rows.push_back(std::move(r));
  }
  return rows;
}

void write_audit_csv(const std::filesystem::path& path, const StreamResult& r) {
  std::ofstream out = open_out(path);
  out << "seed,month,id,margin,lp_distance,confidence,hybrid\n";
  for (const auto& run : r.runs) {
    for (const auto& s : run.audit) {
      out << run.seed << ',' << s.month << ',' << s.id << ',' << number(s.score.margin) << ','
          << number(s.score.lp_distance) << ',' << number(s.score.confidence) << ',' << number(s.score.hybrid)
          << '\n';
    }
  }
}

void emit_report(const std::filesystem::path& path, const StreamResult& r, ReportFormat format) {
  if (format == ReportFormat::kJson) {
    write_json(path, to_json(r));
  } else {
    write_metrics_csv(path, r);
  }
}

void write_summary_csv(const std::filesystem::path& path, const std::vector<std::string>& key_columns,
                       const std::vector<SummaryRow>& rows) {
  std::ofstream out = open_out(path);
  for (const auto& k : key_columns) out << k << ',';
  out << "runs,f1_mean,f1_std,fnr_mean,fnr_std,fpr_mean,fpr_std\n";
  auto pair = [](const MeanStd& s) {
    if (!s.defined()) return std::string(",");
    return percent_cell(s.mean) + ',' + percent_cell(s.std);
  };
  for (const auto& row : rows) {
    if (row.keys.size() != key_columns.size()) throw ShapeError("summary row has the wrong number of keys");
    for (const auto& k : row.keys) out << k << ',';
    out << row.runs << ',' << pair(row.summary.f1) << ',' << pair(row.summary.fnr) << ','
        << pair(row.summary.fpr) << '\n';
  }
}

void write_run_manifest(const std::filesystem::path& dir, const std::string& command, const json& config,
                        const std::vector<std::uint64_t>& seeds,
                        const std::vector<std::filesystem::path>& artifacts) {
  json files = json::object();
  for (const auto& a : artifacts) {
    const std::filesystem::path rel = a.is_absolute() ? a.lexically_relative(dir) : a;
    files[rel.generic_string()] = sha256_file(dir / rel);
  }
  write_json(dir / "run.json", {{"schema_version", kReportSchemaVersion},
                                {"command", command},
                                {"config", config},
                                {"config_hash", config_hash(config)},
                                {"seeds", seeds},
                                {"artifacts", std::move(files)}});
}

}  // namespace citadel
