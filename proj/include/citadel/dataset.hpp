#pragma once

// Month-tagged binary feature records, on-disk layout, and the splits used
// by the experiments (temporal periods, labeled/unlabeled ratio, label noise).
//
// A dataset directory holds `manifest.json` plus one shard per month. Shards
// are either CSV (header `id,label[,family],f0..f{d-1}`) or the packed binary
// layout below, all integers little-endian:
//
//   magic    8 bytes  "CTDLSHRD"
//   version  u32      1
//   dim      u32      feature dimension d
//   rows     u32      record count
//   rows x { u8 label, u16 id_len, id bytes, u16 family_len, family bytes,
//            ceil(d/8) bytes of features, bit i of byte i/8 = feature i }

#include <compare>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include "citadel/random.hpp"
#include "citadel/trainer.hpp"
#include "citadel/types.hpp"

namespace citadel {

struct YearMonth {
  int year = 1970;
  int month = 1;  // 1..12

  static YearMonth parse(const std::string& text);  // "YYYY-MM"
  std::string str() const;
  YearMonth next() const;
  int ordinal() const { return year * 12 + (month - 1); }

  auto operator<=>(const YearMonth&) const = default;
};

// Inclusive month range, written "YYYY-MM..YYYY-MM" (or a single "YYYY-MM").
struct Period {
  YearMonth first;
  YearMonth last;

  static Period parse(const std::string& text);
  bool contains(YearMonth m) const { return first <= m && m <= last; }
  bool overlaps(const Period& o) const { return !(last < o.first || o.last < first); }
  std::string str() const;
};

struct FeatureRecord {
  std::string id;
  YearMonth month;
  int label = 0;  // 0 benign, 1 malware
  FeatureVector features;
  std::string family;  // optional, unused by the pipeline

  bool operator==(const FeatureRecord&) const = default;
};

enum class ShardFormat { kBinary, kCsv };

struct MonthEntry {
  YearMonth month;
  std::size_t benign = 0;
  std::size_t malware = 0;
  std::string shard;   // file name relative to the dataset directory
  ShardFormat format = ShardFormat::kBinary;
  std::string sha256;
};

inline constexpr int kDatasetFormatVersion = 1;

struct DatasetManifest {
  std::string name;
  std::size_t feature_dim = 0;
  int version = kDatasetFormatVersion;
  std::vector<MonthEntry> months;
};

struct Dataset {
  std::string name;
  std::size_t feature_dim = 0;
  std::vector<FeatureRecord> records;  // chronological by month

  std::vector<YearMonth> months() const;
  std::vector<FeatureRecord> month(YearMonth m) const;
  std::size_t count_label(int label) const;
};

// Writes shards and manifest into `dir` (created if needed). Returns the
// manifest that was written.
DatasetManifest save_dataset(const std::filesystem::path& dir, const Dataset& ds,
                             ShardFormat format = ShardFormat::kBinary);

struct LoadedDataset {
  DatasetManifest manifest;
  Dataset dataset;
};

// Verifies checksums, dimensions, month tags and per-month counts. Errors are
// DataError and name the offending shard.
LoadedDataset load_dataset(const std::filesystem::path& dir);

void write_shard(const std::filesystem::path& path, std::span<const FeatureRecord> rows,
                 std::size_t dim, ShardFormat format);
std::vector<FeatureRecord> read_shard(const std::filesystem::path& path, YearMonth month,
                                      std::size_t dim, ShardFormat format);

struct TemporalSplit {
  std::vector<FeatureRecord> train;
  std::vector<FeatureRecord> validation;
  std::vector<FeatureRecord> test;
};

// Assigns each record to the period containing its month; records outside
// all periods are dropped. Overlapping periods are a ConfigError.
TemporalSplit temporal_split(const Dataset& ds, const Period& train, const std::optional<Period>& validation,
                             const Period& test);

struct LabelSplit {
  std::vector<FeatureRecord> labeled;
  std::vector<FeatureRecord> unlabeled;
};

// |labeled| = round(ratio * N), allocated per class by largest remainder and
// nudged so that both classes are present whenever that is possible.
LabelSplit label_ratio_split(const std::vector<FeatureRecord>& train, double ratio,
                             std::uint64_t seed);

// Flips exactly round(rate * N) labels chosen uniformly without replacement.
std::vector<FeatureRecord> inject_label_noise(const std::vector<FeatureRecord>& labeled,
                                              double rate, std::uint64_t seed);

LabeledSet to_labeled_set(std::span<const FeatureRecord> records);
std::vector<FeatureVector> to_features(std::span<const FeatureRecord> records);

// Groups records by month in chronological order.
std::vector<std::pair<YearMonth, std::vector<FeatureRecord>>> group_by_month(
    std::span<const FeatureRecord> records);

}  // namespace citadel
