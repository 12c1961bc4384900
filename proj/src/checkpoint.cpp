#include "otnfm/checkpoint.hpp"

#include <cstdio>
#include <cstdlib>
#include <fstream>

#include <json.hpp>

#include "otnfm/errors.hpp"

namespace otnfm {

namespace {

using nlohmann::json;

std::string encode_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

double decode_double(const std::string& s) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end != s.c_str() + s.size())
    throw ConfigError("checkpoint: malformed number '" + s + "'");
  return v;
}

json encode_array(const std::vector<double>& xs) {
  json a = json::array();
  for (double x : xs) a.push_back(encode_double(x));
  return a;
}

std::vector<double> decode_array(const json& a) {
  std::vector<double> xs;
  xs.reserve(a.size());
  for (const auto& s : a) xs.push_back(decode_double(s.get<std::string>()));
  return xs;
}

std::vector<std::pair<std::string, Tensor*>> named_params(FlowModel& m) {
  std::vector<std::pair<std::string, Tensor*>> out;
  out.emplace_back("in_proj", &m.net->in_proj);
  out.emplace_back("in_bias", &m.net->in_bias);
  for (std::size_t b = 0; b < m.net->blocks.size(); ++b) {
    const std::string p = "block" + std::to_string(b) + ".";
    out.emplace_back(p + "w1", &m.net->blocks[b].w1);
    out.emplace_back(p + "b1", &m.net->blocks[b].b1);
    out.emplace_back(p + "w2", &m.net->blocks[b].w2);
    out.emplace_back(p + "b2", &m.net->blocks[b].b2);
  }
  out.emplace_back("out_proj", &m.net->out_proj);
  out.emplace_back("out_bias", &m.net->out_bias);
  return out;
}

}  // namespace

Checkpoint Checkpoint::capture(const FlowModel& m, const RunConfig& cfg,
                               const Coupling* coup) {
  Checkpoint ck;
  ck.config = cfg;
  if (coup) ck.coupling = *coup;
  auto named = named_params(const_cast<FlowModel&>(m));
  for (auto& [name, t] : named)
    ck.params.emplace_back(name, std::vector<double>(t->values().begin(), t->values().end()));
  return ck;
}

void Checkpoint::save(const std::string& path) const {
  json doc;
  doc["format_version"] = format_version;
  doc["config"] = config.to_text();
  json ps;  // object: keys sorted, deterministic dump
  for (const auto& [name, values] : params) ps[name] = encode_array(values);
  doc["params"] = ps;
  if (coupling) {
    json c;
    c["strategy"] = strategy_name(coupling->strategy);
    c["sigma"] = coupling->sigma;
    c["total_cost"] = encode_double(coupling->total_cost);
    doc["coupling"] = c;
  }

  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write checkpoint '" + path + "'");
  out << doc.dump(2) << "\n";
}

Checkpoint Checkpoint::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw ConfigError("cannot open checkpoint '" + path + "'");
  json doc;
  try {
    in >> doc;
  } catch (const std::exception& e) {
    throw ConfigError("checkpoint parse error in '" + path + "': " + e.what());
  }

  Checkpoint ck;
  ck.format_version = doc.at("format_version").get<int>();
  if (ck.format_version != 1)
    throw ConfigError("unsupported checkpoint format_version " +
                      std::to_string(ck.format_version));
  ck.config = RunConfig::from_ini(
      IniFile::parse_text(doc.at("config").get<std::string>(), path + "#config"));
  for (const auto& [name, arr] : doc.at("params").items())
    ck.params.emplace_back(name, decode_array(arr));
  if (doc.contains("coupling")) {
    Coupling c;
    c.strategy = parse_strategy(doc["coupling"].at("strategy").get<std::string>());
    c.sigma = doc["coupling"].at("sigma").get<std::vector<int>>();
    c.total_cost = decode_double(doc["coupling"].at("total_cost").get<std::string>());
    ck.coupling = c;
  }
  return ck;
}

FlowModel Checkpoint::restore() const {
  Rng init_rng(config.seed, streams::kParamInit);
  FlowModel m(config.net, config.method, config.phi, init_rng);

  auto named = named_params(m);
  for (const auto& [name, values] : params) {
    Tensor* target = nullptr;
    for (auto& [n, t] : named)
      if (n == name) target = t;
    if (!target)
      throw ConfigError("checkpoint: parameter '" + name +
                        "' does not exist in the configured architecture");
    if (target->size() != values.size())
      throw ConfigError("checkpoint: parameter '" + name + "' has " +
                        std::to_string(values.size()) + " values, architecture expects " +
                        std::to_string(target->size()));
    std::copy(values.begin(), values.end(), target->values_mut().begin());
  }
  if (params.size() != named.size())
    throw ConfigError("checkpoint: parameter count mismatch against architecture");
  return m;
}

}  // namespace otnfm
