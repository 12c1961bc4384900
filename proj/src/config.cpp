#include "otnfm/config.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <sstream>

#include "otnfm/errors.hpp"

namespace otnfm {

namespace {

std::string trim(const std::string& s) {
  const auto a = s.find_first_not_of(" \t\r");
  if (a == std::string::npos) return "";
  const auto b = s.find_last_not_of(" \t\r");
  return s.substr(a, b - a + 1);
}

std::vector<std::string> split_list(const std::string& s) {
  std::vector<std::string> out;
  std::string item;
  std::istringstream is(s);
  while (std::getline(is, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

std::string fmt_double(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

}  // namespace

IniFile IniFile::parse_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_text(ss.str(), path);
}

IniFile IniFile::parse_text(const std::string& text, const std::string& origin) {
  IniFile ini;
  ini.origin_ = origin;
  std::istringstream is(text);
  std::string line, section;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const std::string t = trim(line);
    if (t.empty() || t[0] == '#') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(origin + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trim(t.substr(1, t.size() - 2));
      continue;
    }
    const auto eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trim(t.substr(0, eq));
    const std::string value = trim(t.substr(eq + 1));
    if (key.empty())
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": empty key");
    auto [it, inserted] = ini.sections_[section].insert({key, Entry{value, lineno, false}});
    if (!inserted)
      throw ConfigError(origin + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return ini;
}

std::optional<std::string> IniFile::get(const std::string& section, const std::string& key) const {
  const auto s = sections_.find(section);
  if (s == sections_.end()) return std::nullopt;
  const auto k = s->second.find(key);
  if (k == s->second.end()) return std::nullopt;
  k->second.consumed = true;
  return k->second.value;
}

std::string IniFile::get_or(const std::string& section, const std::string& key,
                            const std::string& fallback) const {
  return get(section, key).value_or(fallback);
}

double IniFile::get_double(const std::string& section, const std::string& key,
                           double fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const double d = std::stod(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return d;
  } catch (...) {
    throw ConfigError(origin_ + ": [" + section + "] " + key + ": not a number: '" + *v + "'");
  }
}

long IniFile::get_long(const std::string& section, const std::string& key, long fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  try {
    std::size_t pos = 0;
    const long l = std::stol(*v, &pos);
    if (pos != v->size()) throw std::invalid_argument("");
    return l;
  } catch (...) {
    throw ConfigError(origin_ + ": [" + section + "] " + key + ": not an integer: '" + *v + "'");
  }
}

bool IniFile::get_bool(const std::string& section, const std::string& key, bool fallback) const {
  const auto v = get(section, key);
  if (!v) return fallback;
  if (*v == "true" || *v == "1" || *v == "yes") return true;
  if (*v == "false" || *v == "0" || *v == "no") return false;
  throw ConfigError(origin_ + ": [" + section + "] " + key + ": not a boolean: '" + *v + "'");
}

void IniFile::set(const std::string& section, const std::string& key, const std::string& value) {
  sections_[section][key] = Entry{value, 0, false};
}

std::vector<std::string> IniFile::unconsumed() const {
  std::vector<std::string> out;
  for (const auto& [sec, keys] : sections_)
    for (const auto& [key, entry] : keys)
      if (!entry.consumed) out.push_back("[" + sec + "] " + key);
  return out;
}

// --- RunConfig ----------------------------------------------------------------

RunConfig RunConfig::defaults() { return RunConfig{}; }

RunConfig RunConfig::from_ini(const IniFile& ini) {
  RunConfig cfg;
  cfg.seed = static_cast<std::uint64_t>(ini.get_long("run", "seed", 0));
  cfg.out_dir = ini.get_or("run", "out", cfg.out_dir);
  cfg.method = parse_mode(ini.get_or("run", "method", "nfm"));

  cfg.p0 = DistributionSpec::parse(ini.get_or("data", "source", "gaussian"));
  cfg.p1 = DistributionSpec::parse(ini.get_or("data", "target", "moons"));
  cfg.n_train = static_cast<int>(ini.get_long("data", "n_train", cfg.n_train));
  if (cfg.n_train < 1) throw ConfigError("[data] n_train must be >= 1");

  cfg.train.steps = ini.get_long("train", "steps", cfg.train.steps);
  cfg.train.batch = static_cast<int>(ini.get_long("train", "batch", cfg.train.batch));
  cfg.train.base_lr = ini.get_double("train", "lr", cfg.train.base_lr);
  cfg.train.schedule = Schedule::parse(ini.get_or("train", "schedule", "linear"));
  cfg.train.coupling = parse_strategy(ini.get_or("train", "coupling", "global"));
  cfg.train.coupling_chunk =
      static_cast<int>(ini.get_long("train", "coupling_chunk", cfg.train.coupling_chunk));
  cfg.train.coupling_sweeps =
      static_cast<int>(ini.get_long("train", "coupling_sweeps", cfg.train.coupling_sweeps));
  cfg.train.per_row_t = ini.get_bool("train", "per_row_t", cfg.train.per_row_t);
  cfg.train.eval_every = ini.get_long("train", "eval_every", cfg.train.eval_every);
  cfg.train.seed = cfg.seed;

  cfg.net.hidden = static_cast<int>(ini.get_long("net", "hidden", cfg.net.hidden));
  cfg.net.blocks = static_cast<int>(ini.get_long("net", "blocks", cfg.net.blocks));
  cfg.net.time_feat_k =
      static_cast<int>(ini.get_long("net", "time_features", cfg.net.time_feat_k));
  cfg.net.lipschitz_c = ini.get_double("net", "lipschitz", cfg.net.lipschitz_c);
  cfg.net.normalize = ini.get_bool("net", "normalize", cfg.net.normalize);
  cfg.phi = parse_phi(ini.get_or("net", "phi", "t"));

  cfg.sample_n = static_cast<int>(ini.get_long("sample", "n", cfg.sample_n));
  cfg.nfe = static_cast<int>(ini.get_long("sample", "nfe", cfg.nfe));
  if (cfg.nfe < 1) throw ConfigError("[sample] nfe must be >= 1");

  const auto leftovers = ini.unconsumed();
  if (!leftovers.empty())
    throw ConfigError("unknown config keys: " + leftovers.front() +
                      (leftovers.size() > 1 ? " (+" + std::to_string(leftovers.size() - 1) + " more)"
                                            : ""));
  return cfg;
}

std::string RunConfig::to_text() const {
  std::ostringstream os;
  os << "[run]\n"
     << "seed = " << seed << "\n"
     << "out = " << out_dir << "\n"
     << "method = " << mode_name(method) << "\n\n"
     << "[data]\n"
     << "source = " << p0.name() << "\n"
     << "target = " << p1.name() << "\n"
     << "n_train = " << n_train << "\n\n"
     << "[train]\n"
     << "steps = " << train.steps << "\n"
     << "batch = " << train.batch << "\n"
     << "lr = " << fmt_double(train.base_lr) << "\n"
     << "schedule = " << train.schedule.name() << "\n"
     << "coupling = " << strategy_name(train.coupling) << "\n"
     << "coupling_chunk = " << train.coupling_chunk << "\n"
     << "coupling_sweeps = " << train.coupling_sweeps << "\n"
     << "per_row_t = " << (train.per_row_t ? "true" : "false") << "\n"
     << "eval_every = " << train.eval_every << "\n\n"
     << "[net]\n"
     << "hidden = " << net.hidden << "\n"
     << "blocks = " << net.blocks << "\n"
     << "time_features = " << net.time_feat_k << "\n"
     << "lipschitz = " << fmt_double(net.lipschitz_c) << "\n"
     << "normalize = " << (net.normalize ? "true" : "false") << "\n"
     << "phi = " << phi_name(phi) << "\n\n"
     << "[sample]\n"
     << "n = " << sample_n << "\n"
     << "nfe = " << nfe << "\n";
  return os.str();
}

void CliOverrides::apply(RunConfig& cfg) const {
  if (seed) {
    cfg.seed = *seed;
    cfg.train.seed = *seed;
  }
  if (out) cfg.out_dir = *out;
  if (steps) cfg.train.steps = *steps;
  if (coupling) cfg.train.coupling = parse_strategy(*coupling);
  if (schedule) cfg.train.schedule = Schedule::parse(*schedule);
  if (nfe) {
    if (*nfe < 1) throw ConfigError("--nfe must be >= 1");
    cfg.nfe = *nfe;
  }
}

// --- SuiteConfig ---------------------------------------------------------------

BenchmarkTask parse_task(const std::string& name) {
  const auto dash = name.find('-');
  if (dash == std::string::npos)
    throw ConfigError("task '" + name + "' should look like source-target, e.g. gauss-moons");
  return {name, DistributionSpec::parse(name.substr(0, dash)),
          DistributionSpec::parse(name.substr(dash + 1))};
}

MethodSpec method_from_name(const std::string& name, int nfe_velocity) {
  MethodSpec m;
  m.name = name;
  m.schedule = Schedule{};  // linear
  if (name == "ot-nfm") {
    m.mode = FlowMode::NeuralFlow;
    m.coupling = CouplingStrategy::Global;
    m.nfe = 1;
  } else if (name == "ot-nfm-minibatch") {
    m.mode = FlowMode::NeuralFlow;
    m.coupling = CouplingStrategy::Minibatch;
    m.nfe = 1;
  } else if (name == "ot-nfm-loom") {
    m.mode = FlowMode::NeuralFlow;
    m.coupling = CouplingStrategy::Loom;
    m.nfe = 1;
  } else if (name == "ot-nfm-perbatch") {
    m.mode = FlowMode::NeuralFlow;
    m.coupling = CouplingStrategy::PerBatch;
    m.nfe = 1;
  } else if (name == "nfm-naive") {
    m.mode = FlowMode::NeuralFlow;
    m.coupling = CouplingStrategy::Independent;
    m.nfe = 1;
  } else if (name == "icfm") {
    m.mode = FlowMode::VelocityField;
    m.coupling = CouplingStrategy::Independent;
    m.nfe = nfe_velocity;
  } else if (name == "ot-cfm") {
    m.mode = FlowMode::VelocityField;
    m.coupling = CouplingStrategy::Global;
    m.nfe = nfe_velocity;
  } else {
    throw ConfigError("unknown method '" + name + "'");
  }
  return m;
}

SuiteConfig SuiteConfig::defaults() {
  SuiteConfig s;
  s.tasks = {parse_task("gauss-moons"), parse_task("8gmm-moons")};
  s.methods = {method_from_name("icfm", 100), method_from_name("ot-cfm", 100),
               method_from_name("ot-nfm", 100), method_from_name("nfm-naive", 100)};
  s.seeds = {0, 1, 2, 3, 4};
  return s;
}

SuiteConfig SuiteConfig::from_ini(const IniFile& ini) {
  SuiteConfig s;
  const int nfe = static_cast<int>(ini.get_long("suite", "nfe", 100));
  for (const auto& t : split_list(ini.get_or("suite", "tasks", "gauss-moons,8gmm-moons")))
    s.tasks.push_back(parse_task(t));
  for (const auto& m :
       split_list(ini.get_or("suite", "methods", "icfm,ot-cfm,ot-nfm,nfm-naive")))
    s.methods.push_back(method_from_name(m, nfe));
  for (const auto& sd : split_list(ini.get_or("suite", "seeds", "0,1,2,3,4")))
    s.seeds.push_back(std::stoull(sd));
  if (s.tasks.empty() || s.methods.empty() || s.seeds.empty())
    throw ConfigError("suite needs at least one task, method and seed");

  s.settings.steps = ini.get_long("train", "steps", s.settings.steps);
  s.settings.batch = static_cast<int>(ini.get_long("train", "batch", s.settings.batch));
  s.settings.base_lr = ini.get_double("train", "lr", s.settings.base_lr);
  s.settings.n_train = static_cast<int>(ini.get_long("train", "n_train", s.settings.n_train));
  s.settings.coupling_chunk =
      static_cast<int>(ini.get_long("train", "coupling_chunk", s.settings.coupling_chunk));
  s.settings.coupling_sweeps =
      static_cast<int>(ini.get_long("train", "coupling_sweeps", s.settings.coupling_sweeps));
  s.settings.n_eval = static_cast<int>(ini.get_long("suite", "n_eval", s.settings.n_eval));
  s.settings.threads = static_cast<int>(ini.get_long("suite", "threads", s.settings.threads));
  s.settings.net.hidden = static_cast<int>(ini.get_long("net", "hidden", s.settings.net.hidden));
  s.settings.net.blocks = static_cast<int>(ini.get_long("net", "blocks", s.settings.net.blocks));
  s.settings.net.time_feat_k =
      static_cast<int>(ini.get_long("net", "time_features", s.settings.net.time_feat_k));
  s.settings.net.lipschitz_c = ini.get_double("net", "lipschitz", s.settings.net.lipschitz_c);
  s.settings.net.normalize = ini.get_bool("net", "normalize", s.settings.net.normalize);

  const auto leftovers = ini.unconsumed();
  if (!leftovers.empty())
    throw ConfigError("unknown config keys: " + leftovers.front() +
                      (leftovers.size() > 1 ? " (+" + std::to_string(leftovers.size() - 1) + " more)"
                                            : ""));
  return s;
}

std::string SuiteConfig::to_text() const {
  std::ostringstream os;
  os << "[suite]\ntasks = ";
  for (std::size_t i = 0; i < tasks.size(); ++i) os << (i ? "," : "") << tasks[i].name;
  os << "\nmethods = ";
  for (std::size_t i = 0; i < methods.size(); ++i) os << (i ? "," : "") << methods[i].name;
  os << "\nseeds = ";
  for (std::size_t i = 0; i < seeds.size(); ++i) os << (i ? "," : "") << seeds[i];
  int nfe = 100;
  for (const auto& m : methods)
    if (m.mode == FlowMode::VelocityField) nfe = m.nfe;
  os << "\nnfe = " << nfe << "\nn_eval = " << settings.n_eval
     << "\nthreads = " << settings.threads << "\n\n[train]\nsteps = " << settings.steps
     << "\nbatch = " << settings.batch << "\nlr = " << fmt_double(settings.base_lr)
     << "\nn_train = " << settings.n_train
     << "\ncoupling_chunk = " << settings.coupling_chunk
     << "\ncoupling_sweeps = " << settings.coupling_sweeps << "\n\n[net]\nhidden = "
     << settings.net.hidden << "\nblocks = " << settings.net.blocks
     << "\ntime_features = " << settings.net.time_feat_k
     << "\nlipschitz = " << fmt_double(settings.net.lipschitz_c)
     << "\nnormalize = " << (settings.net.normalize ? "true" : "false") << "\n";
  return os.str();
}

}  // namespace otnfm
