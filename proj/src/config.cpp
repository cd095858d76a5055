#include "stoplab/config.hpp"

#include <cstdlib>
#include <fstream>
#include <functional>
#include <map>
#include <sstream>

namespace stoplab {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split_list(const std::string& text) {
  std::vector<std::string> out;
  std::stringstream ss(text);
  std::string item;
  while (std::getline(ss, item, ',')) {
    item = trim(item);
    if (!item.empty()) out.push_back(item);
  }
  return out;
}

struct Entry {
  std::string value;
  int line = 0;
};

using Section = std::map<std::string, Entry>;

[[noreturn]] void fail(const Entry& e, const std::string& key, const std::string& why) {
  throw ConfigError("line " + std::to_string(e.line) + ": " + key + ": " + why);
}

double to_double(const Entry& e, const std::string& key) {
  std::size_t used = 0;
  double v = 0.0;
  try {
    v = std::stod(e.value, &used);
  } catch (const std::logic_error&) {
    fail(e, key, "expected a number, got '" + e.value + "'");
  }
  if (used != e.value.size()) fail(e, key, "trailing characters in '" + e.value + "'");
  return v;
}

long long to_integer(const Entry& e, const std::string& key) {
  std::size_t used = 0;
  long long v = 0;
  try {
    v = std::stoll(e.value, &used);
  } catch (const std::logic_error&) {
    fail(e, key, "expected an integer, got '" + e.value + "'");
  }
  if (used != e.value.size()) fail(e, key, "trailing characters in '" + e.value + "'");
  return v;
}

bool to_bool(const Entry& e, const std::string& key) {
  if (e.value == "true" || e.value == "1" || e.value == "yes" || e.value == "on") return true;
  if (e.value == "false" || e.value == "0" || e.value == "no" || e.value == "off") return false;
  fail(e, key, "expected true/false, got '" + e.value + "'");
}

std::vector<int> to_int_list(const Entry& e, const std::string& key) {
  std::vector<int> out;
  for (const auto& item : split_list(e.value)) {
    out.push_back(static_cast<int>(to_integer(Entry{item, e.line}, key)));
  }
  return out;
}

// Applies each known key; anything left over is an error.
class Binder {
 public:
  Binder(const std::string& name, Section sec) : name_(name), sec_(std::move(sec)) {}

  template <class F>
  void on(const std::string& key, F&& apply) {
    const auto it = sec_.find(key);
    if (it == sec_.end()) return;
    apply(it->second, name_ + "." + key);
    sec_.erase(it);
  }
  void finish() const {
    if (!sec_.empty()) {
      const auto& [k, e] = *sec_.begin();
      throw ConfigError("line " + std::to_string(e.line) + ": unknown key '" + k + "' in [" + name_ + "]");
    }
  }

 private:
  std::string name_;
  Section sec_;
};

std::string fmt(double v) {
  std::ostringstream os;
  os.precision(17);
  os << v;
  return os.str();
}

template <class T>
std::string join(const std::vector<T>& v) {
  std::ostringstream os;
  for (std::size_t i = 0; i < v.size(); ++i) os << (i ? "," : "") << v[i];
  return os.str();
}

RunConfig parse_impl(std::istream& is, const std::filesystem::path& base) {
  std::map<std::string, Section> sections;
  std::string current;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    line = trim(line);
    if (line.empty()) continue;
    if (line.front() == '[') {
      if (line.back() != ']') throw ConfigError("line " + std::to_string(lineno) + ": malformed section header");
      current = trim(line.substr(1, line.size() - 2));
      if (current.empty()) throw ConfigError("line " + std::to_string(lineno) + ": empty section name");
      sections[current];
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string::npos) throw ConfigError("line " + std::to_string(lineno) + ": expected key = value");
    if (current.empty()) throw ConfigError("line " + std::to_string(lineno) + ": key outside any section");
    const std::string key = trim(line.substr(0, eq));
    auto& sec = sections[current];
    if (sec.count(key)) throw ConfigError("line " + std::to_string(lineno) + ": duplicate key '" + key + "'");
    sec[key] = Entry{trim(line.substr(eq + 1)), lineno};
  }

  RunConfig cfg;
  auto take = [&](const std::string& name) {
    Section s;
    const auto it = sections.find(name);
    if (it != sections.end()) {
      s = std::move(it->second);
      sections.erase(it);
    }
    return Binder(name, std::move(s));
  };

  auto env = take("env");
  env.on("kind", [&](const Entry& e, const std::string& k) {
    try {
      cfg.env = EnvSpec::defaults(parse_env_kind(e.value));
    } catch (const std::invalid_argument& ex) {
      fail(e, k, ex.what());
    }
  });
  env.on("horizon", [&](const Entry& e, const std::string& k) { cfg.env.horizon = static_cast<int>(to_integer(e, k)); });
  env.on("dt", [&](const Entry& e, const std::string& k) { cfg.env.dt = to_double(e, k); });
  env.on("time_feature", [&](const Entry& e, const std::string& k) { cfg.env.include_time_in_state = to_bool(e, k); });
  env.on("n_angles", [&](const Entry& e, const std::string& k) { cfg.env.n_angles = static_cast<int>(to_integer(e, k)); });
  env.on("radius0", [&](const Entry& e, const std::string& k) { cfg.env.radius0 = to_double(e, k); });
  env.on("radius_slope", [&](const Entry& e, const std::string& k) { cfg.env.radius_slope = to_double(e, k); });
  env.on("inner_ratio", [&](const Entry& e, const std::string& k) { cfg.env.inner_ratio = to_double(e, k); });
  auto& cp = cfg.env.cp;
  const std::vector<std::pair<std::string, double*>> cp_keys{
      {"cp.omega", &cp.omega},           {"cp.mu_before", &cp.mu_before},   {"cp.mu_after", &cp.mu_after},
      {"cp.sigma_before", &cp.sigma_before}, {"cp.sigma_after", &cp.sigma_after}, {"cp.ar1_before", &cp.ar1_before},
      {"cp.ar2_before", &cp.ar2_before}, {"cp.ar1_after", &cp.ar1_after},   {"cp.ar2_after", &cp.ar2_after},
      {"cp.change_lo", &cp.change_lo},   {"cp.change_hi", &cp.change_hi},   {"cp.start_hi", &cp.start_hi}};
  for (const auto& [key, ptr] : cp_keys) {
    double* p = ptr;
    env.on(key, [&](const Entry& e, const std::string& k) { *p = to_double(e, k); });
  }
  env.on("cp.raw_length", [&](const Entry& e, const std::string& k) { cp.raw_length = static_cast<int>(to_integer(e, k)); });
  env.finish();

  auto expert = take("expert");
  expert.on("gamma", [&](const Entry& e, const std::string& k) { cfg.expert.gamma = to_double(e, k); });
  expert.on("knn_k", [&](const Entry& e, const std::string& k) { cfg.expert.knn_k = static_cast<int>(to_integer(e, k)); });
  expert.finish();

  auto data = take("data");
  data.on("train_paths", [&](const Entry& e, const std::string& k) { cfg.data.train_paths = static_cast<int>(to_integer(e, k)); });
  data.on("test_paths", [&](const Entry& e, const std::string& k) { cfg.data.test_paths = static_cast<int>(to_integer(e, k)); });
  data.on("val_frac", [&](const Entry& e, const std::string& k) { cfg.data.val_frac = to_double(e, k); });
  data.on("seed", [&](const Entry& e, const std::string& k) { cfg.data.seed = static_cast<std::uint64_t>(to_integer(e, k)); });
  data.finish();

  if (sections.count("ingest")) {
    IngestConfig ic;
    auto ing = take("ingest");
    auto path_of = [&](const std::string& v) {
      std::filesystem::path p(v);
      return p.is_relative() ? base / p : p;
    };
    ing.on("train", [&](const Entry& e, const std::string&) { ic.train_csv = path_of(e.value); });
    ing.on("test", [&](const Entry& e, const std::string&) { ic.test_csv = path_of(e.value); });
    ing.on("path_column", [&](const Entry& e, const std::string&) { ic.schema.path_column = e.value; });
    ing.on("time_column", [&](const Entry& e, const std::string&) { ic.schema.time_column = e.value; });
    ing.on("event_column", [&](const Entry& e, const std::string&) { ic.schema.event_column = e.value; });
    ing.on("features", [&](const Entry& e, const std::string&) { ic.schema.feature_columns = split_list(e.value); });
    ing.on("downsample", [&](const Entry& e, const std::string& k) { ic.downsample = static_cast<int>(to_integer(e, k)); });
    ing.on("standardize", [&](const Entry& e, const std::string& k) { ic.standardize = to_bool(e, k); });
    ing.finish();
    cfg.ingest = std::move(ic);
  }

  auto& tc = cfg.train;
  auto tr = take("train");
  tr.on("algorithms", [&](const Entry& e, const std::string& k) {
    cfg.algorithms.clear();
    for (const auto& a : split_list(e.value)) {
      if (a == "all") {
        cfg.algorithms = all_algorithms();
        break;
      }
      try {
        cfg.algorithms.push_back(parse_algorithm(a));
      } catch (const std::invalid_argument& ex) {
        fail(e, k, ex.what());
      }
    }
  });
  tr.on("seeds", [&](const Entry& e, const std::string& k) {
    try {
      cfg.seeds = parse_seed_list(e.value);
    } catch (const std::invalid_argument& ex) {
      fail(e, k, ex.what());
    }
  });
  tr.on("epochs", [&](const Entry& e, const std::string& k) { tc.epochs = static_cast<int>(to_integer(e, k)); });
  tr.on("batch_size", [&](const Entry& e, const std::string& k) {
    const auto b = to_integer(e, k);
    if (b <= 0) fail(e, k, "must be positive");
    tc.batch_size = static_cast<std::size_t>(b);
  });
  tr.on("gamma", [&](const Entry& e, const std::string& k) { tc.gamma = to_double(e, k); });
  tr.on("eps0", [&](const Entry& e, const std::string& k) { tc.eps0 = to_double(e, k); });
  tr.on("eps_decay", [&](const Entry& e, const std::string& k) { tc.eps_decay = to_double(e, k); });
  tr.on("lr0", [&](const Entry& e, const std::string& k) { tc.lr0 = to_double(e, k); });
  tr.on("lr_decay", [&](const Entry& e, const std::string& k) { tc.lr_decay = to_double(e, k); });
  tr.on("c_reg", [&](const Entry& e, const std::string& k) { tc.c_reg = to_double(e, k); });
  tr.on("trunk", [&](const Entry& e, const std::string& k) { tc.trunk = to_int_list(e, k); });
  tr.on("g_hidden", [&](const Entry& e, const std::string& k) { tc.g_hidden = to_int_list(e, k); });
  tr.on("freeze_trunk_in_dyn_step", [&](const Entry& e, const std::string& k) { tc.freeze_trunk_in_dyn_step = to_bool(e, k); });
  tr.on("share_trunk", [&](const Entry& e, const std::string& k) { tc.share_trunk = to_bool(e, k); });
  tr.on("successor", [&](const Entry& e, const std::string& k) {
    if (e.value == "predicted") {
      tc.successor = SuccessorSource::Predicted;
    } else if (e.value == "observed") {
      tc.successor = SuccessorSource::Observed;
    } else {
      fail(e, k, "expected predicted or observed");
    }
  });
  tr.on("dynamics_step", [&](const Entry& e, const std::string& k) { tc.dynamics_step = to_bool(e, k); });
  tr.on("train_g", [&](const Entry& e, const std::string& k) { tc.train_g = to_bool(e, k); });
  tr.on("zero_g", [&](const Entry& e, const std::string& k) { tc.zero_g = to_bool(e, k); });
  tr.finish();

  auto sm = take("smote");
  sm.on("k", [&](const Entry& e, const std::string& k) { tc.smote.k_neighbors = static_cast<int>(to_integer(e, k)); });
  sm.on("n_synthetic", [&](const Entry& e, const std::string& k) {
    if (e.value == "balance") {
      tc.smote.n_synthetic.reset();
    } else {
      const auto n = to_integer(e, k);
      if (n < 0) fail(e, k, "must be >= 0 or 'balance'");
      tc.smote.n_synthetic = static_cast<std::size_t>(n);
    }
  });
  sm.on("alpha0", [&](const Entry& e, const std::string& k) { tc.smote.alpha0 = to_double(e, k); });
  sm.on("alpha_decay", [&](const Entry& e, const std::string& k) { tc.smote.alpha_decay = to_double(e, k); });
  sm.finish();

  auto hm = take("heatmap");
  hm.on("times", [&](const Entry& e, const std::string& k) { cfg.heatmap.times = to_int_list(e, k); });
  hm.on("resolution", [&](const Entry& e, const std::string& k) { cfg.heatmap.resolution = static_cast<int>(to_integer(e, k)); });
  hm.on("extent", [&](const Entry& e, const std::string& k) { cfg.heatmap.extent = to_double(e, k); });
  hm.on("normalize", [&](const Entry& e, const std::string& k) { cfg.heatmap.normalize = to_bool(e, k); });
  hm.finish();

  auto run = take("run");
  run.on("out_dir", [&](const Entry& e, const std::string&) { cfg.out_dir = e.value; });
  run.on("jobs", [&](const Entry& e, const std::string& k) { cfg.jobs = static_cast<int>(to_integer(e, k)); });
  run.finish();

  if (!sections.empty()) throw ConfigError("unknown section [" + sections.begin()->first + "]");
  cfg.validate();
  return cfg;
}

}  // namespace

void RunConfig::validate() const {
  try {
    env.validate();
    train.validate();
  } catch (const ConfigError&) {
    throw;
  } catch (const std::invalid_argument& e) {
    throw ConfigError(e.what());
  }
  if (seeds.empty()) throw ConfigError("seed list is empty");
  if (algorithms.empty()) throw ConfigError("algorithm list is empty");
  if (!(data.val_frac >= 0.0 && data.val_frac < 1.0)) throw ConfigError("val_frac must lie in [0,1)");
  if (data.train_paths < 1 || data.test_paths < 0) throw ConfigError("path counts must be positive");
  if (expert.knn_k < 1) throw ConfigError("knn_k must be >= 1");
  if (!(expert.gamma > 0.0 && expert.gamma <= 1.0)) throw ConfigError("expert gamma must lie in (0,1]");
  if (jobs < 0) throw ConfigError("jobs must be >= 0");
  if (heatmap.resolution < 2) throw ConfigError("heatmap resolution must be >= 2");
  if (ingest) {
    if (ingest->schema.feature_columns.empty()) throw ConfigError("[ingest] needs a features list");
    if (ingest->downsample < 1) throw ConfigError("[ingest] downsample must be >= 1");
    for (const auto& p : {ingest->train_csv, ingest->test_csv}) {
      if (p.empty()) throw ConfigError("[ingest] needs both train and test files");
      if (!std::filesystem::exists(p)) throw ConfigError("missing input file " + p.string());
    }
  }
}

RunConfig parse_config(std::istream& is) { return parse_impl(is, std::filesystem::current_path()); }

RunConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ConfigError("cannot open config " + file.string());
  auto base = file.parent_path();
  if (base.empty()) base = std::filesystem::current_path();
  return parse_impl(in, base);
}

void apply_env_overrides(RunConfig& cfg) {
  if (const char* out = std::getenv("STOPLAB_OUT_DIR"); out && *out) cfg.out_dir = out;
  if (const char* jobs = std::getenv("STOPLAB_JOBS"); jobs && *jobs) {
    try {
      cfg.jobs = std::stoi(jobs);
    } catch (const std::logic_error&) {
      throw ConfigError(std::string("STOPLAB_JOBS is not an integer: ") + jobs);
    }
    if (cfg.jobs < 0) throw ConfigError("STOPLAB_JOBS must be >= 0");
  }
}

std::vector<std::uint64_t> parse_seed_list(const std::string& text) {
  std::vector<std::uint64_t> out;
  for (const auto& item : split_list(text)) {
    // a-b expands to an inclusive range
    const auto dash = item.find('-', 1);
    try {
      std::size_t used = 0;
      if (dash == std::string::npos) {
        const auto v = std::stoull(item, &used);
        if (used != item.size()) throw std::invalid_argument(item);
        out.push_back(v);
      } else {
        const auto lo = std::stoull(item.substr(0, dash));
        const auto hi = std::stoull(item.substr(dash + 1));
        if (hi < lo) throw std::invalid_argument(item);
        for (auto v = lo; v <= hi; ++v) out.push_back(v);
      }
    } catch (const std::logic_error&) {
      throw std::invalid_argument("bad seed '" + item + "'");
    }
  }
  if (out.empty()) throw std::invalid_argument("empty seed list");
  return out;
}

void write_config(std::ostream& os, const RunConfig& c) {
  const auto& e = c.env;
  os << "[env]\n"
     << "kind = " << env_name(e.kind) << "\n"
     << "horizon = " << e.horizon << "\n"
     << "dt = " << fmt(e.dt) << "\n"
     << "time_feature = " << (e.include_time_in_state ? "true" : "false") << "\n";
  if (is_region(e.kind)) {
    os << "n_angles = " << e.n_angles << "\n"
       << "radius0 = " << fmt(e.radius0) << "\n"
       << "radius_slope = " << fmt(e.radius_slope) << "\n"
       << "inner_ratio = " << fmt(e.inner_ratio) << "\n";
  }
  if (is_cp(e.kind)) {
    const auto& cp = e.cp;
    os << "cp.omega = " << fmt(cp.omega) << "\ncp.mu_before = " << fmt(cp.mu_before)
       << "\ncp.mu_after = " << fmt(cp.mu_after) << "\ncp.sigma_before = " << fmt(cp.sigma_before)
       << "\ncp.sigma_after = " << fmt(cp.sigma_after) << "\ncp.ar1_before = " << fmt(cp.ar1_before)
       << "\ncp.ar2_before = " << fmt(cp.ar2_before) << "\ncp.ar1_after = " << fmt(cp.ar1_after)
       << "\ncp.ar2_after = " << fmt(cp.ar2_after) << "\ncp.raw_length = " << cp.raw_length
       << "\ncp.change_lo = " << fmt(cp.change_lo) << "\ncp.change_hi = " << fmt(cp.change_hi)
       << "\ncp.start_hi = " << fmt(cp.start_hi) << "\n";
  }
  os << "\n[expert]\ngamma = " << fmt(c.expert.gamma) << "\nknn_k = " << c.expert.knn_k << "\n";
  os << "\n[data]\ntrain_paths = " << c.data.train_paths << "\ntest_paths = " << c.data.test_paths
     << "\nval_frac = " << fmt(c.data.val_frac) << "\nseed = " << c.data.seed << "\n";
  if (c.ingest) {
    const auto& i = *c.ingest;
    os << "\n[ingest]\ntrain = " << i.train_csv.string() << "\ntest = " << i.test_csv.string()
       << "\npath_column = " << i.schema.path_column << "\ntime_column = " << i.schema.time_column
       << "\nevent_column = " << i.schema.event_column << "\nfeatures = " << join(i.schema.feature_columns)
       << "\ndownsample = " << i.downsample << "\nstandardize = " << (i.standardize ? "true" : "false") << "\n";
  }
  const auto& t = c.train;
  std::vector<std::string> algos;
  for (auto a : c.algorithms) algos.emplace_back(algorithm_name(a));
  os << "\n[train]\nalgorithms = " << join(algos) << "\nseeds = " << join(c.seeds) << "\nepochs = " << t.epochs
     << "\nbatch_size = " << t.batch_size << "\ngamma = " << fmt(t.gamma) << "\neps0 = " << fmt(t.eps0)
     << "\neps_decay = " << fmt(t.eps_decay) << "\nlr0 = " << fmt(t.lr0) << "\nlr_decay = " << fmt(t.lr_decay)
     << "\nc_reg = " << fmt(t.c_reg) << "\ntrunk = " << join(t.trunk) << "\ng_hidden = " << join(t.g_hidden)
     << "\nfreeze_trunk_in_dyn_step = " << (t.freeze_trunk_in_dyn_step ? "true" : "false")
     << "\nshare_trunk = " << (t.share_trunk ? "true" : "false")
     << "\nsuccessor = " << (t.successor == SuccessorSource::Predicted ? "predicted" : "observed")
     << "\ndynamics_step = " << (t.dynamics_step ? "true" : "false") << "\ntrain_g = " << (t.train_g ? "true" : "false")
     << "\nzero_g = " << (t.zero_g ? "true" : "false") << "\n";
  os << "\n[smote]\nk = " << t.smote.k_neighbors << "\nn_synthetic = "
     << (t.smote.n_synthetic ? std::to_string(*t.smote.n_synthetic) : std::string("balance"))
     << "\nalpha0 = " << fmt(t.smote.alpha0) << "\nalpha_decay = " << fmt(t.smote.alpha_decay) << "\n";
  os << "\n[heatmap]\ntimes = " << join(c.heatmap.times) << "\nresolution = " << c.heatmap.resolution
     << "\nextent = " << fmt(c.heatmap.extent) << "\nnormalize = " << (c.heatmap.normalize ? "true" : "false") << "\n";
  os << "\n[run]\nout_dir = " << c.out_dir.string() << "\njobs = " << c.jobs << "\n";
}

}  // namespace stoplab
