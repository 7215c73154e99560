#include "citadel/dataset.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <cstring>
#include <fstream>
#include <json.hpp>
#include <map>
#include <sstream>

#include "citadel/errors.hpp"
#include "citadel/hash.hpp"

namespace citadel {
namespace {

using nlohmann::json;

constexpr std::array<char, 8> kShardMagic = {'C', 'T', 'D', 'L', 'S', 'H', 'R', 'D'};
constexpr std::uint32_t kShardVersion = 1;

void put_u16(std::string& out, std::uint16_t v) {
  out.push_back(static_cast<char>(v & 0xFF));
  out.push_back(static_cast<char>((v >> 8) & 0xFF));
}

void put_u32(std::string& out, std::uint32_t v) {
  for (int s = 0; s < 32; s += 8) out.push_back(static_cast<char>((v >> s) & 0xFF));
}

class ByteReader {
 public:
  ByteReader(const std::string& buf, std::string shard) : buf_(buf), shard_(std::move(shard)) {}

  const unsigned char* take(std::size_t n) {
    if (pos_ + n > buf_.size()) throw DataError("shard " + shard_ + " is truncated");
    const auto* p = reinterpret_cast<const unsigned char*>(buf_.data() + pos_);
    pos_ += n;
    return p;
  }
  std::uint16_t u16() {
    const auto* p = take(2);
    return static_cast<std::uint16_t>(p[0] | (p[1] << 8));
  }
  std::uint32_t u32() {
    const auto* p = take(4);
    return static_cast<std::uint32_t>(p[0]) | (static_cast<std::uint32_t>(p[1]) << 8) |
           (static_cast<std::uint32_t>(p[2]) << 16) | (static_cast<std::uint32_t>(p[3]) << 24);
  }
  bool done() const { return pos_ == buf_.size(); }

 private:
  const std::string& buf_;
  std::string shard_;
  std::size_t pos_ = 0;
};

std::string read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw DataError("cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

const char* format_name(ShardFormat f) { return f == ShardFormat::kBinary ? "binary" : "csv"; }

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(cur);
  return out;
}

}  // namespace

YearMonth YearMonth::parse(const std::string& text) {
  int y = 0;
  int m = 0;
  char dash = 0;
  std::istringstream is(text);
  if (text.size() != 7 || !(is >> y >> dash >> m) || dash != '-' || m < 1 || m > 12) {
    throw ConfigError("invalid month '" + text + "' (expected YYYY-MM)");
  }
  return {y, m};
}

std::string YearMonth::str() const {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%04d-%02d", year, month);
  return buf;
}

YearMonth YearMonth::next() const { return month == 12 ? YearMonth{year + 1, 1} : YearMonth{year, month + 1}; }

Period Period::parse(const std::string& text) {
  const auto pos = text.find("..");
  Period p;
  if (pos == std::string::npos) {
    p.first = p.last = YearMonth::parse(text);
  } else {
    p.first = YearMonth::parse(text.substr(0, pos));
    p.last = YearMonth::parse(text.substr(pos + 2));
  }
  if (p.last < p.first) throw ConfigError("period '" + text + "' ends before it starts");
  return p;
}

std::string Period::str() const { return first.str() + ".." + last.str(); }

std::vector<YearMonth> Dataset::months() const {
  std::vector<YearMonth> out;
  for (const auto& r : records) {
    if (out.empty() || out.back() != r.month) out.push_back(r.month);
  }
  return out;
}

std::vector<FeatureRecord> Dataset::month(YearMonth m) const {
  std::vector<FeatureRecord> out;
  for (const auto& r : records) {
    if (r.month == m) out.push_back(r);
  }
  return out;
}

std::size_t Dataset::count_label(int label) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [&](const FeatureRecord& r) { return r.label == label; }));
}

void write_shard(const std::filesystem::path& path, std::span<const FeatureRecord> rows,
                 std::size_t dim, ShardFormat format) {
  std::string out;
  if (format == ShardFormat::kBinary) {
    out.append(kShardMagic.data(), kShardMagic.size());
    put_u32(out, kShardVersion);
    put_u32(out, static_cast<std::uint32_t>(dim));
    put_u32(out, static_cast<std::uint32_t>(rows.size()));
    const std::size_t packed = (dim + 7) / 8;
    for (const auto& r : rows) {
      if (r.features.size() != dim) throw DataError("record " + r.id + " has wrong dimension");
      if (r.id.size() > 0xFFFF || r.family.size() > 0xFFFF) throw DataError("record " + r.id + " id too long");
      out.push_back(static_cast<char>(r.label));
      put_u16(out, static_cast<std::uint16_t>(r.id.size()));
      out += r.id;
      put_u16(out, static_cast<std::uint16_t>(r.family.size()));
      out += r.family;
      std::string bits(packed, '\0');
      for (std::size_t i = 0; i < dim; ++i) {
        if (r.features[i]) bits[i / 8] = static_cast<char>(bits[i / 8] | (1 << (i % 8)));
      }
      out += bits;
    }
  } else {
    const bool with_family =
        std::any_of(rows.begin(), rows.end(), [](const FeatureRecord& r) { return !r.family.empty(); });
    out += with_family ? "id,label,family" : "id,label";
    for (std::size_t i = 0; i < dim; ++i) out += ",f" + std::to_string(i);
    out += '\n';
    for (const auto& r : rows) {
      if (r.features.size() != dim) throw DataError("record " + r.id + " has wrong dimension");
      out += r.id + ',' + std::to_string(r.label);
      if (with_family) out += ',' + r.family;
      for (auto b : r.features) {
        out += ',';
        out += b ? '1' : '0';
      }
      out += '\n';
    }
  }
  std::ofstream f(path, std::ios::binary);
  if (!f) throw DataError("cannot write shard " + path.string());
  f.write(out.data(), static_cast<std::streamsize>(out.size()));
  if (!f) throw DataError("failed writing shard " + path.string());
}

std::vector<FeatureRecord> read_shard(const std::filesystem::path& path, YearMonth month,
                                      std::size_t dim, ShardFormat format) {
  const std::string name = path.filename().string();
  const std::string buf = read_file(path);
  std::vector<FeatureRecord> rows;
  auto check_label = [&](int label, const std::string& id) {
    if (label != 0 && label != 1) throw DataError("shard " + name + ": record " + id + " has label " + std::to_string(label));
  };
  if (format == ShardFormat::kBinary) {
    ByteReader rd(buf, name);
    if (std::memcmp(rd.take(kShardMagic.size()), kShardMagic.data(), kShardMagic.size()) != 0) {
      throw DataError("shard " + name + ": bad magic bytes");
    }
    if (rd.u32() != kShardVersion) throw DataError("shard " + name + ": unsupported version");
    const std::uint32_t d = rd.u32();
    if (d != dim) {
      throw DataError("shard " + name + ": dimension " + std::to_string(d) + ", expected " + std::to_string(dim));
    }
    const std::uint32_t n = rd.u32();
    const std::size_t packed = (dim + 7) / 8;
    rows.reserve(n);
    for (std::uint32_t r = 0; r < n; ++r) {
      FeatureRecord rec;
      rec.month = month;
      rec.label = *rd.take(1);
      const std::uint16_t id_len = rd.u16();
      const auto* id = rd.take(id_len);
      rec.id.assign(reinterpret_cast<const char*>(id), id_len);
      const std::uint16_t fam_len = rd.u16();
      const auto* fam = rd.take(fam_len);
      rec.family.assign(reinterpret_cast<const char*>(fam), fam_len);
      check_label(rec.label, rec.id);
      const auto* bits = rd.take(packed);
      rec.features.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) rec.features[i] = (bits[i / 8] >> (i % 8)) & 1;
      rows.push_back(std::move(rec));
    }
    if (!rd.done()) throw DataError("shard " + name + ": trailing bytes after " + std::to_string(n) + " rows");
  } else {
    std::istringstream in(buf);
    std::string line;
    if (!std::getline(in, line)) throw DataError("shard " + name + ": missing header");
    const auto header = split_csv_line(line);
    if (header.size() < 2 || header[0] != "id" || header[1] != "label") {
      throw DataError("shard " + name + ": header must start with id,label");
    }
    const bool with_family = header.size() > 2 && header[2] == "family";
    const std::size_t offset = with_family ? 3 : 2;
    if (header.size() - offset != dim) {
      throw DataError("shard " + name + ": dimension " + std::to_string(header.size() - offset) +
                      ", expected " + std::to_string(dim));
    }
    for (std::size_t i = 0; i < dim; ++i) {
      if (header[offset + i] != "f" + std::to_string(i)) throw DataError("shard " + name + ": bad column " + header[offset + i]);
    }
    std::size_t lineno = 1;
    while (std::getline(in, line)) {
      ++lineno;
      if (line.empty() || line == "\r") continue;
      const auto cells = split_csv_line(line);
      if (cells.size() != header.size()) {
        throw DataError("shard " + name + ": line " + std::to_string(lineno) + " has " +
                        std::to_string(cells.size() - std::min(cells.size(), offset)) +
                        " features, expected " + std::to_string(dim));
      }
      FeatureRecord rec;
      rec.month = month;
      rec.id = cells[0];
      if (cells[1] != "0" && cells[1] != "1") throw DataError("shard " + name + ": bad label on line " + std::to_string(lineno));
      rec.label = cells[1][0] - '0';
      if (with_family) rec.family = cells[2];
      rec.features.resize(dim);
      for (std::size_t i = 0; i < dim; ++i) {
        const auto& c = cells[offset + i];
        if (c != "0" && c != "1") throw DataError("shard " + name + ": non-binary feature on line " + std::to_string(lineno));
        rec.features[i] = static_cast<std::uint8_t>(c[0] - '0');
      }
      rows.push_back(std::move(rec));
    }
  }
  return rows;
}

DatasetManifest save_dataset(const std::filesystem::path& dir, const Dataset& ds, ShardFormat format) {
  std::filesystem::create_directories(dir);
  DatasetManifest man;
  man.name = ds.name;
  man.feature_dim = ds.feature_dim;
  for (const auto& [month, rows] : group_by_month(ds.records)) {
    MonthEntry e;
    e.month = month;
    e.format = format;
    e.shard = month.str() + (format == ShardFormat::kBinary ? ".bin" : ".csv");
    for (const auto& r : rows) (r.label == kMalware ? e.malware : e.benign)++;
    write_shard(dir / e.shard, rows, ds.feature_dim, format);
    e.sha256 = sha256_file(dir / e.shard);
    man.months.push_back(std::move(e));
  }
  json months = json::array();
  for (const auto& e : man.months) {
    months.push_back({{"month", e.month.str()},
                      {"benign", e.benign},
                      {"malware", e.malware},
                      {"shard", e.shard},
                      {"format", format_name(e.format)},
                      {"sha256", e.sha256}});
  }
  const json j = {{"format", "citadel-dataset"},
                  {"version", man.version},
                  {"name", man.name},
                  {"feature_dim", man.feature_dim},
                  {"months", months}};
  std::ofstream out(dir / "manifest.json");
  if (!out) throw DataError("cannot write manifest in " + dir.string());
  out << j.dump(2) << '\n';
  return man;
}

LoadedDataset load_dataset(const std::filesystem::path& dir) {
  const auto manifest_path = dir / "manifest.json";
  if (!std::filesystem::exists(manifest_path)) {
    throw DataError("dataset manifest not found: " + manifest_path.string());
  }
  json j;
  try {
    std::ifstream in(manifest_path);
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("manifest " + manifest_path.string() + " is not valid JSON: " + e.what());
  }
  LoadedDataset out;
  auto& man = out.manifest;
  try {
    if (j.at("format") != "citadel-dataset") throw DataError("manifest format is not citadel-dataset");
    man.version = j.at("version").get<int>();
    if (man.version != kDatasetFormatVersion) throw DataError("unsupported dataset version " + std::to_string(man.version));
    man.name = j.value("name", std::string{});
    man.feature_dim = j.at("feature_dim").get<std::size_t>();
    if (man.feature_dim == 0) throw DataError("manifest feature_dim must be positive");
    for (const auto& m : j.at("months")) {
      MonthEntry e;
      try {
        e.month = YearMonth::parse(m.at("month").get<std::string>());
      } catch (const ConfigError& err) {
        throw DataError(std::string("manifest: unknown month: ") + err.what());
      }
      e.benign = m.at("benign").get<std::size_t>();
      e.malware = m.at("malware").get<std::size_t>();
      e.shard = m.at("shard").get<std::string>();
      const std::string fmt = m.value("format", std::string("binary"));
      if (fmt != "binary" && fmt != "csv") throw DataError("shard " + e.shard + ": unknown format " + fmt);
      e.format = fmt == "binary" ? ShardFormat::kBinary : ShardFormat::kCsv;
      e.sha256 = m.value("sha256", std::string{});
      man.months.push_back(std::move(e));
    }
  } catch (const json::exception& e) {
    throw DataError("malformed manifest " + manifest_path.string() + ": " + e.what());
  }
  for (std::size_t i = 1; i < man.months.size(); ++i) {
    if (!(man.months[i - 1].month < man.months[i].month)) {
      throw DataError("manifest months are not strictly chronological at " + man.months[i].month.str());
    }
  }

  out.dataset.name = man.name;
  out.dataset.feature_dim = man.feature_dim;
  for (const auto& e : man.months) {
    const auto path = dir / e.shard;
    if (!std::filesystem::exists(path)) throw DataError("shard " + e.shard + " is missing");
    if (!e.sha256.empty() && sha256_file(path) != e.sha256) {
      throw DataError("shard " + e.shard + " failed checksum verification");
    }
    auto rows = read_shard(path, e.month, man.feature_dim, e.format);
    std::size_t benign = 0;
    std::size_t malware = 0;
    for (const auto& r : rows) (r.label == kMalware ? malware : benign)++;
    if (benign != e.benign || malware != e.malware) {
      throw DataError("shard " + e.shard + ": counts (" + std::to_string(benign) + " benign, " +
                      std::to_string(malware) + " malware) disagree with manifest");
    }
    for (auto& r : rows) out.dataset.records.push_back(std::move(r));
  }
  return out;
}

TemporalSplit temporal_split(const Dataset& ds, const Period& train, const std::optional<Period>& validation,
                             const Period& test) {
  const bool val_overlap = validation && (train.overlaps(*validation) || validation->overlaps(test));
  if (train.overlaps(test) || val_overlap) {
    throw ConfigError("split periods overlap: train " + train.str() + ", validation " +
                      (validation ? validation->str() : "none") + ", test " + test.str());
  }
  TemporalSplit s;
  for (const auto& r : ds.records) {
    if (train.contains(r.month)) {
      s.train.push_back(r);
    } else if (validation && validation->contains(r.month)) {
      s.validation.push_back(r);
    } else if (test.contains(r.month)) {
      s.test.push_back(r);
    }
  }
  return s;
}

LabelSplit label_ratio_split(const std::vector<FeatureRecord>& train, double ratio, std::uint64_t seed) {
  if (!(ratio >= 0.0 && ratio <= 1.0)) throw ConfigError("label ratio must be in [0,1]");
  const std::size_t n = train.size();
  const auto target = static_cast<std::size_t>(std::llround(ratio * static_cast<double>(n)));

  std::array<std::vector<std::size_t>, 2> by_class;
  for (std::size_t i = 0; i < n; ++i) by_class[static_cast<std::size_t>(train[i].label)].push_back(i);

  // Largest-remainder allocation of `target` across classes.
  std::array<std::size_t, 2> quota{};
  std::array<double, 2> remainder{};
  std::size_t assigned = 0;
  for (std::size_t c = 0; c < 2; ++c) {
    const double exact = ratio * static_cast<double>(by_class[c].size());
    quota[c] = std::min(by_class[c].size(), static_cast<std::size_t>(std::floor(exact)));
    remainder[c] = exact - std::floor(exact);
    assigned += quota[c];
  }
  while (assigned < target) {
    std::size_t c = remainder[1] > remainder[0] ? 1 : 0;
    if (quota[c] >= by_class[c].size()) c = 1 - c;
    ++quota[c];
    remainder[c] = -1.0;
    ++assigned;
  }
  while (assigned > target) {
    const std::size_t c = quota[1] > quota[0] ? 1 : 0;
    --quota[c];
    --assigned;
  }
  if (target >= 2) {
    for (std::size_t c = 0; c < 2; ++c) {
      if (quota[c] == 0 && !by_class[c].empty() && quota[1 - c] > 1) {
        ++quota[c];
        --quota[1 - c];
      }
    }
  }

  RandomSource rng(seed);
  std::vector<char> is_labeled(n, 0);
  for (std::size_t c = 0; c < 2; ++c) {
    rng.shuffle(by_class[c]);
    for (std::size_t k = 0; k < quota[c]; ++k) is_labeled[by_class[c][k]] = 1;
  }
  LabelSplit s;
  for (std::size_t i = 0; i < n; ++i) (is_labeled[i] ? s.labeled : s.unlabeled).push_back(train[i]);
  return s;
}

std::vector<FeatureRecord> inject_label_noise(const std::vector<FeatureRecord>& labeled, double rate,
                                              std::uint64_t seed) {
  if (!(rate >= 0.0 && rate <= 1.0)) throw ConfigError("noise rate must be in [0,1]");
  std::vector<FeatureRecord> out = labeled;
  const auto flips = static_cast<std::size_t>(std::llround(rate * static_cast<double>(out.size())));
  std::vector<std::size_t> idx = iota_indices(out.size());
  RandomSource rng(seed);
  for (std::size_t i = 0; i < flips; ++i) {
    const std::size_t j = i + rng.below(idx.size() - i);
    std::swap(idx[i], idx[j]);
    out[idx[i]].label = 1 - out[idx[i]].label;
  }
  return out;
}

LabeledSet to_labeled_set(std::span<const FeatureRecord> records) {
  LabeledSet s;
  s.features.reserve(records.size());
  s.labels.reserve(records.size());
  for (const auto& r : records) {
    s.features.push_back(r.features);
    s.labels.push_back(r.label);
  }
  return s;
}

std::vector<FeatureVector> to_features(std::span<const FeatureRecord> records) {
  std::vector<FeatureVector> out;
  out.reserve(records.size());
  for (const auto& r : records) out.push_back(r.features);
  return out;
}

std::vector<std::pair<YearMonth, std::vector<FeatureRecord>>> group_by_month(
    std::span<const FeatureRecord> records) {
  std::map<YearMonth, std::vector<FeatureRecord>> grouped;
  for (const auto& r : records) grouped[r.month].push_back(r);
  return {grouped.begin(), grouped.end()};
}

}  // namespace citadel
