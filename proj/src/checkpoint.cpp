#include "clvsa/checkpoint.hpp"

#include <cstdio>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include <json.hpp>

namespace clvsa::train {

using nlohmann::ordered_json;

std::string model_config_to_json(const model::ModelConfig& cfg) {
  ordered_json j;
  j["kind"] = model::model_kind_name(cfg.kind);
  j["rows"] = cfg.rows;
  j["cols"] = cfg.cols;
  j["layers"] = cfg.layers;
  j["channels"] = cfg.channels;
  j["kernel_width"] = cfg.kernel_width;
  j["z_dim"] = cfg.z_dim;
  j["prior_hidden"] = cfg.prior_hidden;
  j["posterior_hidden"] = cfg.posterior_hidden;
  j["clf_hidden1"] = cfg.clf_hidden1;
  j["clf_hidden2"] = cfg.clf_hidden2;
  j["dropout"] = cfg.dropout;
  j["variational"] = cfg.variational;
  j["attention"] = cfg.attention;
  j["convolutional"] = cfg.convolutional;
  j["use_encoder"] = cfg.use_encoder;
  j["backward_inter_attention"] = cfg.backward_inter_attention;
  return j.dump();
}

model::ModelConfig model_config_from_json(const std::string& json) {
  const ordered_json j = ordered_json::parse(json);
  model::ModelConfig cfg;
  cfg.kind = model::parse_model_kind(j.at("kind").get<std::string>());
  cfg.rows = j.at("rows").get<int>();
  cfg.cols = j.at("cols").get<int>();
  cfg.layers = j.at("layers").get<int>();
  cfg.channels = j.at("channels").get<int>();
  cfg.kernel_width = j.at("kernel_width").get<int>();
  cfg.z_dim = j.at("z_dim").get<int>();
  cfg.prior_hidden = j.at("prior_hidden").get<int>();
  cfg.posterior_hidden = j.at("posterior_hidden").get<int>();
  cfg.clf_hidden1 = j.at("clf_hidden1").get<int>();
  cfg.clf_hidden2 = j.at("clf_hidden2").get<int>();
  cfg.dropout = j.at("dropout").get<double>();
  cfg.variational = j.at("variational").get<bool>();
  cfg.attention = j.at("attention").get<bool>();
  cfg.convolutional = j.at("convolutional").get<bool>();
  cfg.use_encoder = j.at("use_encoder").get<bool>();
  cfg.backward_inter_attention =
      j.at("backward_inter_attention").get<bool>();
  cfg.validate();
  return cfg;
}

void save_checkpoint(std::ostream& out, const model::ModelConfig& cfg,
                     const model::ParamStore& params) {
  out << "clvsa-checkpoint v1\n";
  out << "config " << model_config_to_json(cfg) << "\n";
  out << "tensors " << params.count() << "\n";
  char buf[40];
  for (int i = 0; i < params.count(); ++i) {
    const diff::Tensor& t = params.tensor(i);
    out << params.name(i) << " " << t.rank();
    for (int d = 0; d < t.rank(); ++d) out << " " << t.dim(d);
    out << "\n";
    for (std::int64_t k = 0; k < t.size(); ++k) {
      std::snprintf(buf, sizeof buf, "%a", t[k]);
      out << buf << (k + 1 == t.size() ? "" : " ");
    }
    out << "\n";
  }
}

void save_checkpoint_file(const std::string& path,
                          const model::ModelConfig& cfg,
                          const model::ParamStore& params) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write " + path);
  save_checkpoint(out, cfg, params);
}

Checkpoint load_checkpoint(std::istream& in, const std::string& name) {
  auto fail = [&](const std::string& what) -> std::runtime_error {
    return std::runtime_error(name + ": " + what);
  };
  std::string line;
  if (!std::getline(in, line) || line != "clvsa-checkpoint v1")
    throw fail("not a clvsa-checkpoint v1 file");
  if (!std::getline(in, line) || line.rfind("config ", 0) != 0)
    throw fail("missing config line");
  Checkpoint ckpt;
  ckpt.config = model_config_from_json(line.substr(7));
  if (!std::getline(in, line) || line.rfind("tensors ", 0) != 0)
    throw fail("missing tensor count");
  const int count = std::stoi(line.substr(8));
  for (int i = 0; i < count; ++i) {
    if (!std::getline(in, line)) throw fail("truncated tensor header");
    std::istringstream hdr(line);
    std::string tname;
    int rank = 0;
    if (!(hdr >> tname >> rank)) throw fail("bad tensor header: " + line);
    std::vector<int> shape(static_cast<std::size_t>(rank));
    for (int d = 0; d < rank; ++d)
      if (!(hdr >> shape[static_cast<std::size_t>(d)]))
        throw fail("bad shape for " + tname);
    const std::int64_t n = diff::shape_product(shape);
    if (!std::getline(in, line)) throw fail("truncated values for " + tname);
    std::istringstream vals(line);
    std::vector<double> v(static_cast<std::size_t>(n));
    for (std::int64_t k = 0; k < n; ++k) {
      std::string tok;
      if (!(vals >> tok)) throw fail("missing values for " + tname);
      v[static_cast<std::size_t>(k)] = std::strtod(tok.c_str(), nullptr);
    }
    ckpt.params.add(tname, diff::Tensor(std::move(shape), std::move(v)));
  }
  return ckpt;
}

Checkpoint load_checkpoint_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path);
  return load_checkpoint(in, path);
}

}  // namespace clvsa::train
