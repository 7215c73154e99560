#include "citadel/checkpoint.hpp"

#include <fstream>
#include <json.hpp>

#include "citadel/errors.hpp"

namespace citadel {
namespace {

using nlohmann::json;

json matrix_to_json(const Matrix& m) {
  json rows = json::array();
  for (Eigen::Index r = 0; r < m.rows(); ++r) {
    json row = json::array();
    for (Eigen::Index c = 0; c < m.cols(); ++c) row.push_back(m(r, c));
    rows.push_back(std::move(row));
  }
  return rows;
}

json vector_to_json(const Vector& v) {
  json out = json::array();
  for (Eigen::Index i = 0; i < v.size(); ++i) out.push_back(v[i]);
  return out;
}

Matrix matrix_from_json(const json& j, std::size_t rows, std::size_t cols, const std::string& where) {
  if (!j.is_array() || j.size() != rows) throw DataError(where + ": expected " + std::to_string(rows) + " rows");
  Matrix m(static_cast<Eigen::Index>(rows), static_cast<Eigen::Index>(cols));
  for (std::size_t r = 0; r < rows; ++r) {
    if (!j[r].is_array() || j[r].size() != cols) {
      throw DataError(where + ": row " + std::to_string(r) + " expected " + std::to_string(cols) + " columns");
    }
    for (std::size_t c = 0; c < cols; ++c) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(c)) = j[r][c].get<double>();
    }
  }
  return m;
}

Vector vector_from_json(const json& j, std::size_t n, const std::string& where) {
  if (!j.is_array() || j.size() != n) throw DataError(where + ": expected " + std::to_string(n) + " values");
  Vector v(static_cast<Eigen::Index>(n));
  for (std::size_t i = 0; i < n; ++i) v[static_cast<Eigen::Index>(i)] = j[i].get<double>();
  return v;
}

json params_to_json(const ParameterSet& ps) {
  json out = json::array();
  for (const auto& l : ps) out.push_back({{"weight", matrix_to_json(l.weight)}, {"bias", vector_to_json(l.bias)}});
  return out;
}

ParameterSet params_from_json(const json& j, const std::vector<LayerSpec>& arch, const std::string& where) {
  if (!j.is_array() || j.size() != arch.size()) throw DataError(where + ": layer count mismatch");
  ParameterSet ps;
  for (std::size_t i = 0; i < arch.size(); ++i) {
    const std::string w = where + "[" + std::to_string(i) + "]";
    ps.push_back({matrix_from_json(j[i].at("weight"), arch[i].output_dim, arch[i].input_dim, w + ".weight"),
                  vector_from_json(j[i].at("bias"), arch[i].output_dim, w + ".bias")});
  }
  return ps;
}

}  // namespace

void save_checkpoint(const std::filesystem::path& path, const Checkpoint& ckpt) {
  json arch = json::array();
  for (const auto& s : ckpt.model.architecture()) {
    arch.push_back({{"input_dim", s.input_dim},
                    {"output_dim", s.output_dim},
                    {"activation", s.activation == Activation::kReLU ? "relu" : "identity"}});
  }
  json j = {{"format", "citadel-checkpoint"},
            {"version", kCheckpointVersion},
            {"seed", ckpt.seed},
            {"architecture", arch},
            {"layers", params_to_json(ckpt.model.layers())}};
  if (ckpt.optimizer) {
    const auto& o = *ckpt.optimizer;
    json opt = {{"kind", o.settings.kind == OptimizerKind::kAdam ? "adam" : "sgd"},
                {"learning_rate", o.settings.learning_rate},
                {"beta1", o.settings.beta1},
                {"beta2", o.settings.beta2},
                {"epsilon", o.settings.epsilon},
                {"step_count", o.step_count}};
    if (o.settings.kind == OptimizerKind::kAdam) {
      opt["first_moment"] = params_to_json(o.first_moment);
      opt["second_moment"] = params_to_json(o.second_moment);
    }
    j["optimizer"] = std::move(opt);
  }
  std::ofstream out(path);
  if (!out) throw DataError("cannot write checkpoint " + path.string());
  out << j.dump();
  if (!out) throw DataError("failed writing checkpoint " + path.string());
}

Checkpoint load_checkpoint(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw DataError("cannot open checkpoint " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::exception& e) {
    throw DataError("checkpoint " + path.string() + " is not valid JSON: " + e.what());
  }
  try {
    if (j.at("format") != "citadel-checkpoint") throw DataError("not a citadel checkpoint: " + path.string());
    if (j.at("version").get<int>() != kCheckpointVersion) {
      throw DataError("unsupported checkpoint version in " + path.string());
    }
    std::vector<LayerSpec> arch;
    for (const auto& s : j.at("architecture")) {
      const std::string act = s.at("activation").get<std::string>();
      if (act != "relu" && act != "identity") throw DataError("unknown activation '" + act + "'");
      arch.push_back({s.at("input_dim").get<std::size_t>(), s.at("output_dim").get<std::size_t>(),
                      act == "relu" ? Activation::kReLU : Activation::kIdentity});
    }
    validate_architecture(arch);
    Checkpoint ckpt;
    ckpt.seed = j.at("seed").get<std::uint64_t>();
    ParameterSet layers = params_from_json(j.at("layers"), arch, "layers");
    ckpt.model = Classifier(arch, std::move(layers));
    if (j.contains("optimizer")) {
      const auto& o = j["optimizer"];
      OptimizerState st;
      st.settings.kind = o.at("kind") == "adam" ? OptimizerKind::kAdam : OptimizerKind::kSGD;
      st.settings.learning_rate = o.at("learning_rate").get<double>();
      st.settings.beta1 = o.at("beta1").get<double>();
      st.settings.beta2 = o.at("beta2").get<double>();
      st.settings.epsilon = o.at("epsilon").get<double>();
      st.step_count = o.at("step_count").get<std::uint64_t>();
      if (st.settings.kind == OptimizerKind::kAdam) {
        st.first_moment = params_from_json(o.at("first_moment"), arch, "optimizer.first_moment");
        st.second_moment = params_from_json(o.at("second_moment"), arch, "optimizer.second_moment");
      }
      ckpt.optimizer = std::move(st);
    }
    return ckpt;
  } catch (const json::exception& e) {
    throw DataError("malformed checkpoint " + path.string() + ": " + e.what());
  } catch (const ConfigError& e) {
    throw DataError("checkpoint " + path.string() + ": " + e.what());
  }
}

}  // namespace citadel
