#include "citadel/config.hpp"

#include <fstream>
#include <set>

#include "citadel/errors.hpp"
#include "citadel/hash.hpp"

namespace citadel {
namespace {

using nlohmann::json;

// Walks one JSON object, remembering which keys were read so leftovers can
// be reported as unknown.
class ObjectReader {
 public:
  ObjectReader(const json& j, std::string path) : j_(j), path_(std::move(path)) {
    if (!j_.is_object()) throw ConfigError(where() + " must be an object");
  }

  std::string at(const std::string& key) const { return path_.empty() ? key : path_ + "." + key; }

  bool has(const std::string& key) {
    seen_.insert(key);
    return j_.contains(key) && !j_[key].is_null();
  }

  const json& raw(const std::string& key) {
    seen_.insert(key);
    return j_.at(key);
  }

  template <typename T>
  void read(const std::string& key, T& target) {
    if (!has(key)) return;
    try {
      target = j_[key].get<T>();
    } catch (const json::exception&) {
      throw ConfigError(at(key) + " has the wrong type");
    }
  }

  void read_unsigned(const std::string& key, std::size_t& target) {
    if (!has(key)) return;
    if (!j_[key].is_number_integer() || j_[key].get<long long>() < 0) {
      throw ConfigError(at(key) + " must be a non-negative integer");
    }
    target = j_[key].get<std::size_t>();
  }

  void read_seed(const std::string& key, std::uint64_t& target) {
    if (!has(key)) return;
    if (!j_[key].is_number_unsigned() && !(j_[key].is_number_integer() && j_[key].get<long long>() >= 0)) {
      throw ConfigError(at(key) + " must be a non-negative integer");
    }
    target = j_[key].get<std::uint64_t>();
  }

  void finish() const {
    for (auto it = j_.begin(); it != j_.end(); ++it) {
      if (!seen_.contains(it.key())) throw ConfigError("unknown config field " + at(it.key()));
    }
  }

 private:
  std::string where() const { return path_.empty() ? "config" : path_; }

  const json& j_;
  std::string path_;
  std::set<std::string> seen_;
};

// Runs `fn`, prefixing any ConfigError with `path`.
template <typename F>
void validated(const std::string& path, F fn) {
  try {
    fn();
  } catch (const ConfigError& e) {
    const std::string msg = e.what();
    if (msg.rfind(path, 0) == 0) throw;
    throw ConfigError(path + ": " + msg);
  }
}

AugmentMode augment_mode_from(const std::string& s, const std::string& path) {
  if (s == "bernoulli_flip") return AugmentMode::kBernoulliBitFlip;
  if (s == "bernoulli_mask") return AugmentMode::kBernoulliMask;
  if (s == "flip_mask") return AugmentMode::kFlipPlusMask;
  if (s == "uniform_flip") return AugmentMode::kUniformBitFlip;
  throw ConfigError(path + " must be one of bernoulli_flip, bernoulli_mask, flip_mask, uniform_flip");
}

std::string augment_mode_name(AugmentMode m) {
  switch (m) {
    case AugmentMode::kBernoulliBitFlip: return "bernoulli_flip";
    case AugmentMode::kBernoulliMask: return "bernoulli_mask";
    case AugmentMode::kFlipPlusMask: return "flip_mask";
    case AugmentMode::kUniformBitFlip: return "uniform_flip";
  }
  return "unknown";
}

void parse_loss(const json& j, const std::string& path, LossConfig& c) {
  ObjectReader r(j, path);
  r.read("confidence_threshold", c.confidence_threshold);
  r.read("lambda_u", c.lambda_u);
  r.read("lambda_con", c.lambda_con);
  r.read("contrastive_temperature", c.contrastive_temperature);
  r.read("normalize_embeddings", c.normalize_embeddings);
  r.finish();
  if (!(c.confidence_threshold > 0.0 && c.confidence_threshold <= 1.0)) {
    throw ConfigError(r.at("confidence_threshold") + " must be in (0,1]");
  }
  validated(path, [&] { c.validate(); });
}

void parse_augment(const json& j, const std::string& path, AugmentConfig& c) {
  ObjectReader r(j, path);
  if (r.has("mode")) {
    std::string mode;
    r.read("mode", mode);
    c.mode = augment_mode_from(mode, r.at("mode"));
  }
  r.read("weak_prob", c.weak_prob);
  r.read("strong_prob", c.strong_prob);
  if (r.has("weak_mask_prob")) {
    double v = 0;
    r.read("weak_mask_prob", v);
    c.weak_mask_prob = v;
  }
  if (r.has("strong_mask_prob")) {
    double v = 0;
    r.read("strong_mask_prob", v);
    c.strong_mask_prob = v;
  }
  r.finish();
  validated(path, [&] { c.validate(); });
}

void parse_optimizer(const json& j, const std::string& path, OptimizerSettings& c) {
  ObjectReader r(j, path);
  if (r.has("kind")) {
    std::string kind;
    r.read("kind", kind);
    if (kind == "adam") c.kind = OptimizerKind::kAdam;
    else if (kind == "sgd") c.kind = OptimizerKind::kSGD;
    else throw ConfigError(r.at("kind") + " must be adam or sgd");
  }
  r.read("learning_rate", c.learning_rate);
  r.read("beta1", c.beta1);
  r.read("beta2", c.beta2);
  r.read("epsilon", c.epsilon);
  r.finish();
  validated(path, [&] { c.validate(); });
}

void parse_train(const json& j, const std::string& path, TrainConfig& c) {
  ObjectReader r(j, path);
  r.read_unsigned("epochs", c.epochs);
  r.read_unsigned("labeled_batch", c.labeled_batch);
  r.read_unsigned("unlabeled_batch", c.unlabeled_batch);
  r.read_seed("seed", c.seed);
  if (r.has("schedule")) {
    std::string s;
    r.read("schedule", s);
    if (s == "constant") c.schedule = LrSchedule::kConstant;
    else if (s == "cosine") c.schedule = LrSchedule::kCosine;
    else throw ConfigError(r.at("schedule") + " must be constant or cosine");
  }
  if (r.has("epoch_basis")) {
    std::string s;
    r.read("epoch_basis", s);
    if (s == "labeled") c.epoch_basis = EpochBasis::kLabeled;
    else if (s == "unlabeled") c.epoch_basis = EpochBasis::kUnlabeled;
    else throw ConfigError(r.at("epoch_basis") + " must be labeled or unlabeled");
  }
  if (r.has("loss")) parse_loss(r.raw("loss"), r.at("loss"), c.loss);
  if (r.has("augment")) parse_augment(r.raw("augment"), r.at("augment"), c.augment);
  if (r.has("optimizer")) parse_optimizer(r.raw("optimizer"), r.at("optimizer"), c.optimizer);
  r.finish();
  if (c.epochs < 1) throw ConfigError(r.at("epochs") + " must be >= 1");
  if (c.labeled_batch < 1) throw ConfigError(r.at("labeled_batch") + " must be >= 1");
  if (c.unlabeled_batch < 1) throw ConfigError(r.at("unlabeled_batch") + " must be >= 1");
}

void parse_selector(const json& j, const std::string& path, SelectorConfig& c) {
  ObjectReader r(j, path);
  if (r.has("kind")) {
    std::string kind;
    r.read("kind", kind);
    validated(r.at("kind"), [&] { c.kind = selector_from_string(kind); });
  }
  r.read("alpha", c.alpha);
  r.read("beta", c.beta);
  r.read("gamma", c.gamma);
  r.read("p_norm", c.p_norm);
  r.read("low_confidence_cutoff", c.low_confidence_cutoff);
  if (r.has("intersection_quantile")) {
    double q = 0;
    r.read("intersection_quantile", q);
    c.intersection_quantile = q;
  }
  r.finish();
  if (!(c.p_norm >= 1.0)) throw ConfigError(r.at("p_norm") + " must be >= 1");
  validated(path, [&] { c.validate(); });
}

std::vector<std::uint64_t> parse_seeds(const json& j, const std::string& path) {
  if (!j.is_array() || j.empty()) throw ConfigError(path + " must be a nonempty array of integers");
  std::vector<std::uint64_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 0) {
      throw ConfigError(path + "[" + std::to_string(i) + "] must be a non-negative integer");
    }
    out.push_back(j[i].get<std::uint64_t>());
  }
  return out;
}

std::vector<std::size_t> parse_sizes(const json& j, const std::string& path) {
  if (!j.is_array()) throw ConfigError(path + " must be an array of integers");
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_number_integer() || j[i].get<long long>() < 0) {
      throw ConfigError(path + "[" + std::to_string(i) + "] must be a non-negative integer");
    }
    out.push_back(j[i].get<std::size_t>());
  }
  return out;
}

void parse_stream(const json& j, const std::string& path, StreamConfig& c) {
  ObjectReader r(j, path);
  r.read_unsigned("budget", c.budget);
  if (r.has("selector")) parse_selector(r.raw("selector"), r.at("selector"), c.selector);
  if (r.has("retrain")) parse_train(r.raw("retrain"), r.at("retrain"), c.retrain);
  r.read("warm_start", c.warm_start);
  r.read("retrain_without_new_labels", c.retrain_without_new_labels);
  if (r.has("pool_window")) {
    std::size_t w = 0;
    r.read_unsigned("pool_window", w);
    if (w == 0) throw ConfigError(r.at("pool_window") + " must be positive");
    c.pool_window = w;
  }
  if (r.has("seeds")) c.seeds = parse_seeds(r.raw("seeds"), r.at("seeds"));
  r.finish();
}

void parse_generator(const json& j, const std::string& path, DriftGeneratorConfig& c) {
  ObjectReader r(j, path);
  r.read("name", c.name);
  r.read_unsigned("dim", c.dim);
  r.read_unsigned("months", c.months);
  r.read_unsigned("samples_per_class", c.samples_per_class);
  if (r.has("malware_per_month")) {
    std::size_t m = 0;
    r.read_unsigned("malware_per_month", m);
    c.malware_per_month = m;
  }
  r.read("drift_rate", c.drift_rate);
  r.read("overlap", c.overlap);
  if (r.has("start")) {
    std::string s;
    r.read("start", s);
    validated(r.at("start"), [&] { c.start = YearMonth::parse(s); });
  }
  r.read_seed("seed", c.seed);
  r.read("active_low", c.active_low);
  r.read("active_high", c.active_high);
  r.read("background_high", c.background_high);
  r.read("shared_high", c.shared_high);
  r.read_unsigned("families", c.families);
  r.read("family_weight_spread", c.family_weight_spread);
  r.read("ambiguous_fraction", c.ambiguous_fraction);
  if (r.has("initial_probabilities")) {
    const json& p = r.raw("initial_probabilities");
    if (!p.is_array() || p.size() != 2) throw ConfigError(r.at("initial_probabilities") + " must hold two arrays");
    try {
      c.initial_probabilities = {p[0].get<std::vector<double>>(), p[1].get<std::vector<double>>()};
    } catch (const json::exception&) {
      throw ConfigError(r.at("initial_probabilities") + " must hold two arrays of numbers");
    }
  }
  r.finish();
  validated(path, [&] { c.validate(); });
}

void parse_bench(const json& j, const std::string& path, ExperimentConfig& e) {
  ObjectReader r(j, path);
  BenchConfig& c = e.bench;
  r.read_unsigned("dim", c.dim);
  if (r.has("hidden")) c.hidden = parse_sizes(r.raw("hidden"), r.at("hidden"));
  r.read_unsigned("labeled_size", c.labeled_size);
  r.read_unsigned("budget", c.budget);
  if (r.has("selector")) parse_selector(r.raw("selector"), r.at("selector"), c.selector);
  if (r.has("train")) parse_train(r.raw("train"), r.at("train"), c.train);
  r.read_seed("seed", c.seed);
  if (r.has("sizes")) e.bench_sizes = parse_sizes(r.raw("sizes"), r.at("sizes"));
  r.finish();
  validated(path, [&] { c.validate(); });
}

}  // namespace

void ExperimentConfig::validate() const {
  if (dataset_path.has_value() == generator.has_value()) {
    throw ConfigError("exactly one of dataset / generator must be given");
  }
  if (generator) validated("generator", [&] { generator->validate(); });
  if (split.validation && (split.train.overlaps(*split.validation) || split.validation->overlaps(split.test))) {
    throw ConfigError("split: periods overlap");
  }
  if (split.train.overlaps(split.test)) throw ConfigError("split: train and test periods overlap");
  pipeline.validate();
  for (double r : noise_rates) {
    if (!(r >= 0.0 && r <= 1.0)) throw ConfigError("noise.rates entries must be in [0,1]");
  }
  bench.validate();
}

ExperimentData load_experiment_data(const ExperimentConfig& cfg) {
  cfg.validate();
  Dataset ds;
  if (cfg.dataset_path) {
    ds = load_dataset(*cfg.dataset_path).dataset;
  } else {
    ds = synth_drift_generate(*cfg.generator);
  }
  TemporalSplit split = temporal_split(ds, cfg.split.train, cfg.split.validation, cfg.split.test);
  if (split.train.empty()) throw DataError("training period " + cfg.split.train.str() + " contains no samples");
  if (split.test.empty()) throw DataError("test period " + cfg.split.test.str() + " contains no samples");
  ExperimentData data;
  data.feature_dim = ds.feature_dim;
  data.train = std::move(split.train);
  data.stream = group_by_month(split.test);
  return data;
}

ExperimentConfig parse_experiment_config(const json& j) {
  ExperimentConfig c;
  ObjectReader r(j, "");
  if (r.has("dataset")) {
    std::string p;
    r.read("dataset", p);
    c.dataset_path = p;
  }
  if (r.has("generator")) {
    DriftGeneratorConfig g;
    parse_generator(r.raw("generator"), "generator", g);
    c.generator = g;
  }
  if (r.has("split")) {
    ObjectReader s(r.raw("split"), "split");
    auto period = [&](const char* key) -> std::optional<Period> {
      if (!s.has(key)) return std::nullopt;
      std::string text;
      s.read(key, text);
      Period p;
      validated(s.at(key), [&] { p = Period::parse(text); });
      return p;
    };
    if (auto p = period("train")) c.split.train = *p;
    c.split.validation = period("validation");
    if (auto p = period("test")) c.split.test = *p;
    s.finish();
  }
  r.read("label_ratio", c.pipeline.label_ratio);
  if (!(c.pipeline.label_ratio > 0.0 && c.pipeline.label_ratio <= 1.0)) {
    throw ConfigError("label_ratio must be in (0,1]");
  }
  r.read("noise_rate", c.pipeline.noise_rate);
  if (!(c.pipeline.noise_rate >= 0.0 && c.pipeline.noise_rate <= 1.0)) {
    throw ConfigError("noise_rate must be in [0,1]");
  }
  if (r.has("model")) {
    ObjectReader m(r.raw("model"), "model");
    if (m.has("hidden")) c.pipeline.hidden = parse_sizes(m.raw("hidden"), "model.hidden");
    m.finish();
    for (std::size_t h : c.pipeline.hidden) {
      if (h == 0) throw ConfigError("model.hidden sizes must be positive");
    }
  }
  if (r.has("train")) parse_train(r.raw("train"), "train", c.pipeline.initial_train);
  if (r.has("stream")) parse_stream(r.raw("stream"), "stream", c.pipeline.stream);
  if (r.has("ablate")) {
    ObjectReader a(r.raw("ablate"), "ablate");
    if (a.has("selectors")) {
      const json& s = a.raw("selectors");
      if (!s.is_array()) throw ConfigError("ablate.selectors must be an array of names");
      c.ablate_selectors.clear();
      for (std::size_t i = 0; i < s.size(); ++i) {
        if (!s[i].is_string()) throw ConfigError("ablate.selectors[" + std::to_string(i) + "] must be a string");
        validated("ablate.selectors[" + std::to_string(i) + "]",
                  [&] { c.ablate_selectors.push_back(selector_from_string(s[i].get<std::string>())); });
      }
    }
    if (a.has("budgets")) c.ablate_budgets = parse_sizes(a.raw("budgets"), "ablate.budgets");
    a.finish();
  }
  if (r.has("noise")) {
    ObjectReader n(r.raw("noise"), "noise");
    if (n.has("rates")) {
      const json& rates = n.raw("rates");
      if (!rates.is_array()) throw ConfigError("noise.rates must be an array of numbers");
      c.noise_rates.clear();
      for (std::size_t i = 0; i < rates.size(); ++i) {
        if (!rates[i].is_number() || !(rates[i].get<double>() >= 0.0 && rates[i].get<double>() <= 1.0)) {
          throw ConfigError("noise.rates[" + std::to_string(i) + "] must be a number in [0,1]");
        }
        c.noise_rates.push_back(rates[i].get<double>());
      }
    }
    n.finish();
  }
  if (r.has("bench")) parse_bench(r.raw("bench"), "bench", c);
  r.read("out", c.out_dir);
  r.finish();
  c.validate();
  return c;
}

ExperimentConfig load_experiment_config(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file " + path.string());
  json j;
  try {
    j = json::parse(in, nullptr, true, /*ignore_comments=*/true);
  } catch (const json::exception& e) {
    throw ConfigError("config file " + path.string() + " is not valid JSON: " + e.what());
  }
  return parse_experiment_config(j);
}

json to_json(const TrainConfig& c) {
  json aug = {{"mode", augment_mode_name(c.augment.mode)},
              {"weak_prob", c.augment.weak_prob},
              {"strong_prob", c.augment.strong_prob}};
  if (c.augment.weak_mask_prob) aug["weak_mask_prob"] = *c.augment.weak_mask_prob;
  if (c.augment.strong_mask_prob) aug["strong_mask_prob"] = *c.augment.strong_mask_prob;
  return {{"epochs", c.epochs},
          {"labeled_batch", c.labeled_batch},
          {"unlabeled_batch", c.unlabeled_batch},
          {"seed", c.seed},
          {"schedule", c.schedule == LrSchedule::kCosine ? "cosine" : "constant"},
          {"epoch_basis", c.epoch_basis == EpochBasis::kUnlabeled ? "unlabeled" : "labeled"},
          {"loss",
           {{"confidence_threshold", c.loss.confidence_threshold},
            {"lambda_u", c.loss.lambda_u},
            {"lambda_con", c.loss.lambda_con},
            {"contrastive_temperature", c.loss.contrastive_temperature},
            {"normalize_embeddings", c.loss.normalize_embeddings}}},
          {"augment", aug},
          {"optimizer",
           {{"kind", c.optimizer.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
            {"learning_rate", c.optimizer.learning_rate},
            {"beta1", c.optimizer.beta1},
            {"beta2", c.optimizer.beta2},
            {"epsilon", c.optimizer.epsilon}}}};
}

json to_json(const SelectorConfig& c) {
  json j = {{"kind", to_string(c.kind)},
            {"alpha", c.alpha},
            {"beta", c.beta},
            {"gamma", c.gamma},
            {"p_norm", c.p_norm},
            {"low_confidence_cutoff", c.low_confidence_cutoff}};
  if (c.intersection_quantile) j["intersection_quantile"] = *c.intersection_quantile;
  return j;
}

json to_json(const StreamConfig& c) {
  json j = {{"budget", c.budget},
            {"selector", to_json(c.selector)},
            {"retrain", to_json(c.retrain)},
            {"warm_start", c.warm_start},
            {"retrain_without_new_labels", c.retrain_without_new_labels},
            {"seeds", c.seeds}};
  if (c.pool_window) j["pool_window"] = *c.pool_window;
  return j;
}

json to_json(const PipelineConfig& c) {
  return {{"label_ratio", c.label_ratio},
          {"noise_rate", c.noise_rate},
          {"model", {{"hidden", c.hidden}}},
          {"train", to_json(c.initial_train)},
          {"stream", to_json(c.stream)}};
}

json to_json(const DriftGeneratorConfig& c) {
  json j = {{"name", c.name},
            {"dim", c.dim},
            {"months", c.months},
            {"samples_per_class", c.samples_per_class},
            {"drift_rate", c.drift_rate},
            {"overlap", c.overlap},
            {"start", c.start.str()},
            {"seed", c.seed},
            {"active_low", c.active_low},
            {"active_high", c.active_high},
            {"background_high", c.background_high},
            {"shared_high", c.shared_high},
            {"families", c.families},
            {"family_weight_spread", c.family_weight_spread},
            {"ambiguous_fraction", c.ambiguous_fraction}};
  if (c.malware_per_month) j["malware_per_month"] = *c.malware_per_month;
  if (!c.initial_probabilities[0].empty()) {
    j["initial_probabilities"] = {c.initial_probabilities[0], c.initial_probabilities[1]};
  }
  return j;
}

json to_json(const BenchConfig& c) {
  return {{"dim", c.dim},
          {"hidden", c.hidden},
          {"labeled_size", c.labeled_size},
          {"budget", c.budget},
          {"selector", to_json(c.selector)},
          {"train", to_json(c.train)},
          {"seed", c.seed}};
}

json to_json(const ExperimentConfig& c) {
  json j = to_json(c.pipeline);
  if (c.dataset_path) j["dataset"] = *c.dataset_path;
  if (c.generator) j["generator"] = to_json(*c.generator);
  json split = {{"train", c.split.train.str()}, {"test", c.split.test.str()}};
  if (c.split.validation) split["validation"] = c.split.validation->str();
  j["split"] = split;
  json sel = json::array();
  for (auto k : c.ablate_selectors) sel.push_back(to_string(k));
  j["ablate"] = {{"selectors", sel}, {"budgets", c.ablate_budgets}};
  j["noise"] = {{"rates", c.noise_rates}};
  json bench = to_json(c.bench);
  bench["sizes"] = c.bench_sizes;
  j["bench"] = bench;
  j["out"] = c.out_dir;
  return j;
}

std::string config_hash(const json& j) { return sha256_hex(j.dump()); }

}  // namespace citadel
