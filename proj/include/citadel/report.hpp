#pragma once

// Result files. Rates are written as percentages rounded to one decimal;
// undefined rates are JSON null / an empty CSV cell.
//
// metrics CSV columns: seed,month,tp,fp,tn,fn,f1,fnr,fpr
// summary CSV columns: <key columns>,runs,f1_mean,f1_std,fnr_mean,fnr_std,fpr_mean,fpr_std
// audit CSV columns:   seed,month,id,margin,lp_distance,confidence,hybrid

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "citadel/stream.hpp"
#include "citadel/trainer.hpp"

namespace citadel {

inline constexpr int kReportSchemaVersion = 1;

enum class ReportFormat { kJson, kCsv };

nlohmann::json to_json(const MonthlyMetrics& m);
nlohmann::json to_json(const MetricSummary& s);
nlohmann::json to_json(const StreamResult& r);
nlohmann::json to_json(const TrainReport& r);

void write_json(const std::filesystem::path& path, const nlohmann::json& j);
nlohmann::json read_json(const std::filesystem::path& path);

void write_metrics_csv(const std::filesystem::path& path, const StreamResult& r);
void write_audit_csv(const std::filesystem::path& path, const StreamResult& r);
void emit_report(const std::filesystem::path& path, const StreamResult& r, ReportFormat format);

struct MetricsRow {
  std::uint64_t seed = 0;
  std::string month;
  std::size_t tp = 0;
  std::size_t fp = 0;
  std::size_t tn = 0;
  std::size_t fn = 0;
  std::optional<double> f1;
  std::optional<double> fnr;
  std::optional<double> fpr;

  bool operator==(const MetricsRow&) const = default;
};

std::vector<MetricsRow> read_metrics_csv(const std::filesystem::path& path);
// Rows of a JSON report as written by emit_report.
std::vector<MetricsRow> metrics_rows(const nlohmann::json& report);
// Metrics CSV from a JSON report.
void json_report_to_csv(const nlohmann::json& report, const std::filesystem::path& path);

struct SummaryRow {
  std::vector<std::string> keys;
  std::size_t runs = 0;
  MetricSummary summary;
};

void write_summary_csv(const std::filesystem::path& path, const std::vector<std::string>& key_columns,
                       const std::vector<SummaryRow>& rows);

// Provenance record written by every CLI command: the resolved config, its
// hash, the seeds, and SHA-256 of each produced artifact.
void write_run_manifest(const std::filesystem::path& dir, const std::string& command, const nlohmann::json& config,
                        const std::vector<std::uint64_t>& seeds,
                        const std::vector<std::filesystem::path>& artifacts);

}  // namespace citadel
