#include <doctest.h>

#include <fstream>
#include <set>
#include <sstream>

#include <json.hpp>

#include "citadel/dataset.hpp"
#include "citadel/errors.hpp"
#include "support.hpp"

using namespace citadel;
using namespace testing;

namespace {

Dataset small_dataset(std::size_t per_month, std::size_t months, std::size_t dim, std::uint64_t seed,
                      YearMonth start = {2012, 1}) {
  RandomSource rng(seed);
  Dataset ds;
  ds.name = "toy";
  ds.feature_dim = dim;
  YearMonth m = start;
  for (std::size_t t = 0; t < months; ++t, m = m.next()) {
    for (std::size_t i = 0; i < per_month; ++i) {
      FeatureRecord r;
      r.id = m.str() + "-" + std::to_string(i);
      r.month = m;
      r.label = static_cast<int>(rng.below(2));
      r.family = r.label ? "fam" + std::to_string(i % 3) : "";
      r.features = random_bits(1, dim, rng, 0.3)[0];
      ds.records.push_back(std::move(r));
    }
  }
  return ds;
}

std::vector<FeatureRecord> with_labels(std::size_t benign, std::size_t malware) {
  std::vector<FeatureRecord> out;
  for (std::size_t i = 0; i < benign + malware; ++i) {
    FeatureRecord r;
    r.id = std::to_string(i);
    r.label = i < benign ? 0 : 1;
    r.features = FeatureVector(4, static_cast<std::uint8_t>(i % 2));
    out.push_back(std::move(r));
  }
  return out;
}

void rewrite_manifest(const std::filesystem::path& dir, const std::function<void(nlohmann::json&)>& edit) {
  nlohmann::json j;
  {
    std::ifstream in(dir / "manifest.json");
    in >> j;
  }
  edit(j);
  std::ofstream(dir / "manifest.json") << j.dump();
}

std::string load_error(const std::filesystem::path& dir) {
  try {
    load_dataset(dir);
  } catch (const DataError& e) {
    return e.what();
  }
  return "";
}

}  // namespace

TEST_CASE("month and period parsing") {
  CHECK(YearMonth::parse("2013-07") == YearMonth{2013, 7});
  CHECK(YearMonth{2012, 12}.next() == YearMonth{2013, 1});
  CHECK(Period::parse("2013-01..2013-06").contains(YearMonth{2013, 6}));
  CHECK_FALSE(Period::parse("2013-01..2013-06").contains(YearMonth{2013, 7}));
  CHECK(Period::parse("2014-02").str() == "2014-02..2014-02");
  CHECK_THROWS_AS(YearMonth::parse("2013-13"), ConfigError);
  CHECK_THROWS_AS(YearMonth::parse("13-01"), ConfigError);
  CHECK_THROWS_AS(Period::parse("2014-02..2013-01"), ConfigError);
}

TEST_CASE("round trip through both shard formats") {
  const Dataset ds = small_dataset(25, 4, 19, 1);
  for (auto fmt : {ShardFormat::kBinary, ShardFormat::kCsv}) {
    ScratchDir dir("dataset-rt");
    const DatasetManifest written = save_dataset(dir.path(), ds, fmt);
    const LoadedDataset back = load_dataset(dir.path());
    CHECK(back.dataset.records == ds.records);
    CHECK(back.dataset.feature_dim == 19);
    CHECK(back.manifest.months.size() == 4);
    // Recount each month straight from the records.
    for (const auto& e : written.months) {
      std::size_t benign = 0, malware = 0;
      for (const auto& r : ds.month(e.month)) (r.label ? malware : benign)++;
      CHECK(e.benign == benign);
      CHECK(e.malware == malware);
    }
  }
}

TEST_CASE("loader rejects damaged datasets and names the shard") {
  const Dataset ds = small_dataset(10, 2, 8, 2);

  SUBCASE("dimension mismatch") {
    ScratchDir dir("dataset-dim");
    save_dataset(dir.path(), ds);
    rewrite_manifest(dir.path(), [](nlohmann::json& j) { j["feature_dim"] = 9; });
    const std::string msg = load_error(dir.path());
    CHECK(msg.find("2012-01.bin") != std::string::npos);
    CHECK(msg.find("expected 9") != std::string::npos);
  }
  SUBCASE("checksum failure") {
    ScratchDir dir("dataset-sum");
    save_dataset(dir.path(), ds);
    std::fstream f(dir.path() / "2012-02.bin", std::ios::in | std::ios::out | std::ios::binary);
    f.seekp(-1, std::ios::end);
    f.put('\x7f');
    f.close();
    const std::string msg = load_error(dir.path());
    CHECK(msg.find("2012-02.bin") != std::string::npos);
    CHECK(msg.find("checksum") != std::string::npos);
  }
  SUBCASE("count mismatch") {
    ScratchDir dir("dataset-count");
    save_dataset(dir.path(), ds, ShardFormat::kCsv);
    rewrite_manifest(dir.path(), [](nlohmann::json& j) {
      j["months"][0]["benign"] = j["months"][0]["benign"].get<int>() + 1;
    });
    CHECK(load_error(dir.path()).find("2012-01.csv") != std::string::npos);
  }
  SUBCASE("unknown month") {
    ScratchDir dir("dataset-month");
    save_dataset(dir.path(), ds);
    rewrite_manifest(dir.path(), [](nlohmann::json& j) { j["months"][1]["month"] = "2012-99"; });
    CHECK(load_error(dir.path()).find("month") != std::string::npos);
  }
  SUBCASE("missing shard and manifest") {
    ScratchDir dir("dataset-missing");
    CHECK(load_error(dir.path()).find("manifest") != std::string::npos);
    save_dataset(dir.path(), ds);
    std::filesystem::remove(dir.path() / "2012-01.bin");
    CHECK(load_error(dir.path()).find("2012-01.bin") != std::string::npos);
  }
  SUBCASE("bad csv cell") {
    ScratchDir dir("dataset-csv");
    const std::vector<FeatureRecord> one(ds.records.begin(), ds.records.begin() + 1);
    write_shard(dir.path() / "x.csv", one, 8, ShardFormat::kCsv);
    std::ifstream in(dir.path() / "x.csv");
    std::stringstream ss;
    ss << in.rdbuf();
    std::string text = ss.str();
    text[text.size() - 2] = '2';
    std::ofstream(dir.path() / "x.csv") << text;
    CHECK_THROWS_AS(read_shard(dir.path() / "x.csv", YearMonth{2012, 1}, 8, ShardFormat::kCsv), DataError);
  }
}

TEST_CASE("temporal split") {
  const Dataset ds = small_dataset(5, 24, 6, 3, {2012, 1});

  SUBCASE("covering periods partition the dataset") {
    const auto s = temporal_split(ds, Period::parse("2012-01..2012-12"), Period::parse("2013-01..2013-06"),
                                  Period::parse("2013-07..2013-12"));
    CHECK(s.train.size() + s.validation.size() + s.test.size() == ds.records.size());
    std::set<std::string> ids;
    for (const auto* part : {&s.train, &s.validation, &s.test}) {
      for (const auto& r : *part) ids.insert(r.id);
    }
    CHECK(ids.size() == ds.records.size());
  }
  SUBCASE("membership follows the periods") {
    const Period train = Period::parse("2012-01..2012-12"), val = Period::parse("2013-01..2013-06"),
                 test = Period::parse("2013-07..2013-09");
    const auto s = temporal_split(ds, train, val, test);
    for (const auto& r : s.train) CHECK(train.contains(r.month));
    for (const auto& r : s.validation) CHECK(val.contains(r.month));
    for (const auto& r : s.test) CHECK(test.contains(r.month));
    CHECK(s.train.size() == 60);
    CHECK(s.validation.size() == 30);
    CHECK(s.test.size() == 15);
  }
  SUBCASE("no validation period") {
    const auto s = temporal_split(ds, Period::parse("2012-01"), std::nullopt, Period::parse("2012-02..2012-03"));
    CHECK(s.validation.empty());
    CHECK(s.test.size() == 10);
  }
  SUBCASE("overlap is a configuration error") {
    CHECK_THROWS_AS(temporal_split(ds, Period::parse("2012-01..2012-06"), std::nullopt,
                                   Period::parse("2012-06..2012-12")),
                    ConfigError);
    CHECK_THROWS_AS(temporal_split(ds, Period::parse("2012-01"), Period::parse("2012-02..2012-05"),
                                   Period::parse("2012-05..2012-12")),
                    ConfigError);
  }
}

TEST_CASE("label ratio split") {
  SUBCASE("ratio one leaves nothing unlabeled") {
    const auto s = label_ratio_split(with_labels(30, 20), 1.0, 1);
    CHECK(s.labeled.size() == 50);
    CHECK(s.unlabeled.empty());
  }
  SUBCASE("arithmetic") {
    CHECK(label_ratio_split(with_labels(60, 40), 0.4, 1).labeled.size() == 40);
    CHECK(label_ratio_split(with_labels(60, 40), 0.0, 1).labeled.empty());
  }
  SUBCASE("stratified within one sample and disjoint") {
    RandomSource rng(5);
    for (int t = 0; t < 50; ++t) {
      const std::size_t b = 1 + rng.below(80), m = 1 + rng.below(80);
      const double ratio = rng.uniform(0.05, 0.95);
      const auto train = with_labels(b, m);
      const auto s = label_ratio_split(train, ratio, static_cast<std::uint64_t>(t));
      CHECK(s.labeled.size() == static_cast<std::size_t>(std::llround(ratio * static_cast<double>(b + m))));
      CHECK(s.labeled.size() + s.unlabeled.size() == b + m);
      std::size_t lm = 0;
      for (const auto& r : s.labeled) lm += r.label;
      const double expect = static_cast<double>(s.labeled.size()) * static_cast<double>(m) / static_cast<double>(b + m);
      CHECK(std::abs(static_cast<double>(lm) - expect) <= 1.0 + 1e-9);
      if (s.labeled.size() >= 2) {
        CHECK(lm >= 1);
        CHECK(lm < s.labeled.size());
      }
      std::set<std::string> ids;
      for (const auto& r : s.labeled) ids.insert(r.id);
      for (const auto& r : s.unlabeled) CHECK_FALSE(ids.contains(r.id));
    }
  }
  SUBCASE("tiny ratio still yields both classes") {
    const auto s = label_ratio_split(with_labels(98, 2), 0.02, 3);
    REQUIRE(s.labeled.size() == 2);
    CHECK(s.labeled[0].label != s.labeled[1].label);
  }
  SUBCASE("seeded") {
    const auto train = with_labels(40, 40);
    CHECK(label_ratio_split(train, 0.3, 9).labeled == label_ratio_split(train, 0.3, 9).labeled);
    CHECK(label_ratio_split(train, 0.3, 9).labeled != label_ratio_split(train, 0.3, 10).labeled);
  }
  CHECK_THROWS_AS(label_ratio_split(with_labels(2, 2), 1.5, 0), ConfigError);
}

TEST_CASE("label noise injection") {
  const auto base = with_labels(25, 25);
  auto flipped = [&](const std::vector<FeatureRecord>& out) {
    std::set<std::size_t> idx;
    for (std::size_t i = 0; i < out.size(); ++i) {
      if (out[i].label != base[i].label) idx.insert(i);
    }
    return idx;
  };
  CHECK(inject_label_noise(base, 0.0, 1) == base);
  CHECK(flipped(inject_label_noise(base, 1.0, 1)).size() == 50);
  const auto a = flipped(inject_label_noise(base, 0.2, 1));
  const auto b = flipped(inject_label_noise(base, 0.2, 2));
  CHECK(a.size() == 10);
  CHECK(b.size() == 10);
  CHECK(a != b);
  CHECK(flipped(inject_label_noise(base, 0.2, 1)) == a);
  for (std::size_t i = 0; i < base.size(); ++i) CHECK(inject_label_noise(base, 0.3, 4)[i].features == base[i].features);
  CHECK_THROWS_AS(inject_label_noise(base, -0.1, 0), ConfigError);
}

TEST_CASE("grouping by month is chronological") {
  const Dataset ds = small_dataset(3, 5, 4, 6, {2012, 11});
  const auto groups = group_by_month(ds.records);
  REQUIRE(groups.size() == 5);
  for (std::size_t i = 1; i < groups.size(); ++i) CHECK(groups[i - 1].first < groups[i].first);
  CHECK(groups[2].first == YearMonth{2013, 1});
  for (const auto& [m, rows] : groups) {
    CHECK(rows.size() == 3);
    for (const auto& r : rows) CHECK(r.month == m);
  }
  const LabeledSet l = to_labeled_set(ds.records);
  CHECK(l.size() == 15);
  CHECK(to_features(ds.records).size() == 15);
}
