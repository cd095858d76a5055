#include "stoplab/data.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <istream>
#include <map>
#include <numeric>
#include <ostream>
#include <sstream>
#include <stdexcept>

namespace stoplab {

std::size_t TrajectorySet::path_of(std::size_t record) const {
  auto it = std::upper_bound(offsets.begin(), offsets.end(), record);
  return static_cast<std::size_t>(std::distance(offsets.begin(), it)) - 1;
}

std::size_t TrajectorySet::count_action(Action a) const {
  return static_cast<std::size_t>(
      std::count_if(records.begin(), records.end(), [a](const TransitionRecord& r) { return r.a == a; }));
}

std::vector<double> FeatureMap::operator()(const StatePoint& s, int t) const {
  std::vector<double> f = s.coords;
  if (include_time) f.push_back(static_cast<double>(t) / static_cast<double>(horizon));
  return f;
}

TrajectorySet preprocess(const std::vector<RawPath>& paths, const std::vector<ExpertLabeling>& labels,
                         const FeatureMap& features, int first_path_id) {
  if (paths.size() != labels.size()) throw std::invalid_argument("preprocess: one labelling per path required");
  TrajectorySet ts;
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& path = paths[p];
    const auto& lab = labels[p];
    if (lab.n_labeled > path.length() || lab.n_labeled < 0) {
      throw std::invalid_argument("preprocess: path " + std::to_string(p) + " has more labels than states");
    }
    if (lab.tau && (*lab.tau < 0 || *lab.tau + 1 != lab.n_labeled)) {
      throw std::invalid_argument("preprocess: path " + std::to_string(p) + " stop label is not the last label");
    }
    const int pid = first_path_id + static_cast<int>(p);
    for (int t = 0; t < lab.n_labeled; ++t) {
      const bool stop_here = lab.tau && *lab.tau == t;
      TransitionRecord r;
      r.path_id = pid;
      r.time_index = t;
      r.s = StatePoint(features(path.states[static_cast<std::size_t>(t)], t));
      if (stop_here) {
        r.a = Action::Stop;
        r.s_next = StatePoint::cemetery(r.s.dim());
      } else {
        if (t + 1 >= path.length()) break;  // unstopped and nothing to pair with
        r.a = Action::Continue;
        r.s_next = StatePoint(features(path.states[static_cast<std::size_t>(t + 1)], t + 1));
      }
      ts.records.push_back(std::move(r));
    }
    ts.offsets.push_back(ts.records.size());
    ts.path_ids.push_back(pid);
  }
  return ts;
}

std::vector<std::size_t> split_indices(std::size_t n_paths, double val_frac, std::uint64_t seed) {
  if (!(val_frac > 0.0 && val_frac < 1.0)) throw std::invalid_argument("split: val_frac must be in (0,1)");
  const auto n_val = static_cast<std::size_t>(std::nearbyint(val_frac * static_cast<double>(n_paths)));
  if (n_val < 1 || n_val >= n_paths) {
    throw std::invalid_argument("split: " + std::to_string(n_paths) + " paths are too few to split");
  }
  std::vector<std::size_t> order(n_paths);
  std::iota(order.begin(), order.end(), 0);
  std::mt19937_64 rng(seed);
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> val(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_val));
  std::sort(val.begin(), val.end());
  return val;
}

namespace {

void append_path(TrajectorySet& dst, const TrajectorySet& src, std::size_t p) {
  for (std::size_t i = src.offsets[p]; i < src.offsets[p + 1]; ++i) dst.records.push_back(src.records[i]);
  dst.offsets.push_back(dst.records.size());
  dst.path_ids.push_back(src.path_ids[p]);
}

}  // namespace

SplitResult split(const TrajectorySet& ts, double val_frac, std::uint64_t seed) {
  const auto val = split_indices(ts.n_paths(), val_frac, seed);
  SplitResult out;
  out.train.tag = SplitTag::Train;
  out.val.tag = SplitTag::Val;
  std::size_t v = 0;
  for (std::size_t p = 0; p < ts.n_paths(); ++p) {
    if (v < val.size() && val[v] == p) {
      append_path(out.val, ts, p);
      ++v;
    } else {
      append_path(out.train, ts, p);
    }
  }
  return out;
}

std::vector<StatePoint> history(const TrajectorySet& ts, std::size_t record) {
  if (record >= ts.size()) throw std::out_of_range("history: record index out of range");
  const std::size_t first = ts.offsets[ts.path_of(record)];
  std::vector<StatePoint> h;
  h.reserve(record - first + 2);
  for (std::size_t i = first; i <= record; ++i) h.push_back(ts.records[i].s);
  h.push_back(ts.records[record].s_next);
  return h;
}

BatchSampler::BatchSampler(std::size_t n_records, std::size_t batch_size, std::uint64_t seed)
    : n_(n_records), batch_(batch_size), rng_(seed) {
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
}

std::size_t BatchSampler::batches_per_epoch() const { return (n_ + batch_ - 1) / batch_; }

std::vector<std::vector<std::size_t>> BatchSampler::epoch() {
  std::vector<std::size_t> perm(n_);
  std::iota(perm.begin(), perm.end(), 0);
  std::shuffle(perm.begin(), perm.end(), rng_);
  std::vector<std::vector<std::size_t>> out;
  out.reserve(batches_per_epoch());
  for (std::size_t i = 0; i < n_; i += batch_) {
    out.emplace_back(perm.begin() + static_cast<std::ptrdiff_t>(i),
                     perm.begin() + static_cast<std::ptrdiff_t>(std::min(n_, i + batch_)));
  }
  return out;
}

Batch sample_batch(const TrajectorySet& ts, std::size_t batch_size, bool need_history, std::mt19937_64& rng) {
  if (batch_size > ts.size()) throw std::invalid_argument("sample_batch: batch larger than the dataset");
  std::vector<std::size_t> perm(ts.size());
  std::iota(perm.begin(), perm.end(), 0);
  // Partial Fisher-Yates: the first batch_size slots are a uniform sample.
  for (std::size_t i = 0; i < batch_size; ++i) {
    std::uniform_int_distribution<std::size_t> pick(i, perm.size() - 1);
    std::swap(perm[i], perm[pick(rng)]);
  }
  Batch b;
  b.indices.assign(perm.begin(), perm.begin() + static_cast<std::ptrdiff_t>(batch_size));
  if (need_history) {
    b.histories.reserve(batch_size);
    for (auto i : b.indices) b.histories.push_back(history(ts, i));
  }
  return b;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::string> split_csv_line(const std::string& line) {
  std::vector<std::string> cells;
  std::string cell;
  std::istringstream ss(line);
  while (std::getline(ss, cell, ',')) {
    if (!cell.empty() && cell.back() == '\r') cell.pop_back();
    cells.push_back(cell);
  }
  if (!line.empty() && line.back() == ',') cells.emplace_back();
  return cells;
}

std::string format_double(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

}  // namespace

void write_labeled_csv(std::ostream& os, const LabeledPaths& lp) {
  std::size_t d = 0;
  for (const auto& p : lp.paths) {
    if (!p.states.empty()) {
      d = p.states.front().dim();
      break;
    }
  }
  os << "path_id,t";
  for (std::size_t j = 0; j < d; ++j) os << ",s_" << j;
  os << ",a,event_time\n";
  for (std::size_t p = 0; p < lp.paths.size(); ++p) {
    const auto& path = lp.paths[p];
    const auto actions = lp.labels[p].actions();
    const int pid = lp.path_ids.empty() ? static_cast<int>(p) : lp.path_ids[p];
    for (int t = 0; t < path.length(); ++t) {
      os << pid << ',' << t;
      for (double c : path.states[static_cast<std::size_t>(t)].coords) os << ',' << format_double(c);
      os << ',';
      if (t < static_cast<int>(actions.size())) os << actions[static_cast<std::size_t>(t)];
      os << ',';
      if (path.event_time) os << *path.event_time;
      os << '\n';
    }
  }
}

LabeledPaths read_labeled_csv(std::istream& is) {
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("labelled CSV: missing header");
  const auto header = split_csv_line(line);
  if (header.size() < 4 || header[0] != "path_id" || header[1] != "t" || header[header.size() - 2] != "a" ||
      header.back() != "event_time") {
    throw std::runtime_error("labelled CSV: unexpected header '" + line + "'");
  }
  const std::size_t d = header.size() - 4;
  LabeledPaths lp;
  int current = -1;
  std::size_t row_no = 1;
  while (std::getline(is, line)) {
    ++row_no;
    if (line.empty()) continue;
    const auto cells = split_csv_line(line);
    if (cells.size() != header.size()) {
      throw std::runtime_error("labelled CSV: row " + std::to_string(row_no) + " has the wrong column count");
    }
    const int pid = std::stoi(cells[0]);
    const int t = std::stoi(cells[1]);
    if (pid != current) {
      lp.paths.emplace_back();
      lp.labels.emplace_back();
      lp.path_ids.push_back(pid);
      current = pid;
    }
    auto& path = lp.paths.back();
    auto& lab = lp.labels.back();
    if (t != path.length()) throw std::runtime_error("labelled CSV: non-consecutive t at row " + std::to_string(row_no));
    std::vector<double> coords(d);
    for (std::size_t j = 0; j < d; ++j) coords[j] = std::stod(cells[2 + j]);
    path.states.emplace_back(std::move(coords));
    const auto& a = cells[2 + d];
    if (!a.empty()) {
      lab.n_labeled = t + 1;
      if (a == "0") lab.tau = t;
    }
    if (!cells.back().empty()) path.event_time = std::stoi(cells.back());
  }
  return lp;
}

void write_records_csv(std::ostream& os, const TrajectorySet& ts) {
  const std::size_t d = ts.feature_dim();
  os << "path_id,t";
  for (std::size_t j = 0; j < d; ++j) os << ",s_" << j;
  os << ",a";
  for (std::size_t j = 0; j < d; ++j) os << ",next_" << j;
  os << ",confidence,synthetic\n";
  for (const auto& r : ts.records) {
    os << r.path_id << ',' << r.time_index;
    for (double c : r.s.coords) os << ',' << format_double(c);
    os << ',' << to_int(r.a);
    for (double c : r.s_next.coords) os << ',' << format_double(c);
    os << ',' << format_double(r.confidence) << ',' << (r.synthetic ? 1 : 0) << '\n';
  }
}

// ---------------------------------------------------------------------------

namespace {

struct IngestRow {
  double time = 0.0;
  std::vector<double> features;
  bool event = false;
  bool complete = true;
};

std::size_t column_index(const std::vector<std::string>& header, const std::string& name) {
  auto it = std::find(header.begin(), header.end(), name);
  if (it == header.end()) throw std::runtime_error("ingest: missing column '" + name + "'");
  return static_cast<std::size_t>(std::distance(header.begin(), it));
}

bool parse_double(const std::string& s, double& out) {
  if (s.empty()) return false;
  try {
    std::size_t pos = 0;
    out = std::stod(s, &pos);
    return pos == s.size() && std::isfinite(out);
  } catch (const std::exception&) {
    return false;
  }
}

}  // namespace

IngestResult ingest_csv(std::istream& is, const IngestSchema& schema, int downsample_every) {
  if (downsample_every < 1) throw std::invalid_argument("ingest: downsample_every must be >= 1");
  std::string line;
  if (!std::getline(is, line)) throw std::runtime_error("ingest: empty file (header row is mandatory)");
  const auto header = split_csv_line(line);
  const auto pcol = column_index(header, schema.path_column);
  const auto tcol = column_index(header, schema.time_column);
  const auto ecol = column_index(header, schema.event_column);
  std::vector<std::size_t> fcols;
  for (const auto& f : schema.feature_columns) fcols.push_back(column_index(header, f));
  if (fcols.empty()) throw std::runtime_error("ingest: schema lists no feature columns");

  // Paths keep first-appearance order.
  std::vector<std::string> order;
  std::map<std::string, std::vector<IngestRow>> rows;
  while (std::getline(is, line)) {
    if (line.empty() || line == "\r") continue;
    const auto cells = split_csv_line(line);
    const std::string pid = pcol < cells.size() ? cells[pcol] : std::string();
    if (!rows.contains(pid)) order.push_back(pid);
    IngestRow r;
    r.complete = cells.size() == header.size() && !pid.empty() && parse_double(cells[tcol], r.time);
    r.features.resize(fcols.size());
    for (std::size_t j = 0; r.complete && j < fcols.size(); ++j) r.complete = parse_double(cells[fcols[j]], r.features[j]);
    double ev = 0.0;
    if (r.complete) r.complete = parse_double(cells[ecol], ev);
    r.event = ev != 0.0;
    rows[pid].push_back(std::move(r));
  }

  IngestResult out;
  int next_id = 0;
  for (const auto& pid : order) {
    const auto& rs = rows[pid];
    std::string problem;
    for (std::size_t i = 0; i < rs.size() && problem.empty(); ++i) {
      if (!rs[i].complete) problem = "missing or non-numeric value on row " + std::to_string(i);
      else if (i > 0 && !(rs[i].time > rs[i - 1].time)) problem = "time not increasing at row " + std::to_string(i);
    }
    if (rs.empty()) problem = "no rows";
    if (!problem.empty()) {
      out.diagnostics.push_back("path '" + pid + "': " + problem);
      continue;
    }
    std::optional<std::size_t> event_row;
    for (std::size_t i = 0; i < rs.size(); ++i) {
      if (rs[i].event) {
        event_row = i;
        break;
      }
    }
    RawPath path;
    ExpertLabeling lab;
    const std::size_t last = event_row.value_or(rs.size() - 1);
    for (std::size_t i = 0; i <= last; i += static_cast<std::size_t>(downsample_every)) {
      path.states.emplace_back(rs[i].features);
    }
    lab.n_labeled = path.length();
    if (event_row) {
      lab.tau = path.length() - 1;
      path.event_time = *lab.tau;
    }
    out.data.paths.push_back(std::move(path));
    out.data.labels.push_back(lab);
    out.data.path_ids.push_back(next_id++);
  }
  if (out.data.paths.empty()) {
    std::string msg = "ingest: no valid paths";
    for (const auto& d : out.diagnostics) msg += "\n  " + d;
    throw std::runtime_error(msg);
  }
  return out;
}

IngestResult ingest_csv(const std::filesystem::path& file, const IngestSchema& schema, int downsample_every) {
  std::ifstream in(file);
  if (!in) throw std::runtime_error("ingest: cannot open " + file.string());
  return ingest_csv(in, schema, downsample_every);
}

Standardizer Standardizer::fit(const std::vector<RawPath>& paths) {
  Standardizer st;
  std::size_t count = 0;
  for (const auto& p : paths) {
    for (const auto& s : p.states) {
      if (st.mean.empty()) {
        st.mean.assign(s.dim(), 0.0);
        st.scale.assign(s.dim(), 0.0);
      }
      for (std::size_t j = 0; j < s.dim(); ++j) st.mean[j] += s.coords[j];
      ++count;
    }
  }
  if (count == 0) throw std::invalid_argument("standardizer: no states");
  for (auto& m : st.mean) m /= static_cast<double>(count);
  for (const auto& p : paths) {
    for (const auto& s : p.states) {
      for (std::size_t j = 0; j < s.dim(); ++j) {
        const double diff = s.coords[j] - st.mean[j];
        st.scale[j] += diff * diff;
      }
    }
  }
  for (auto& v : st.scale) {
    v = std::sqrt(v / static_cast<double>(count));
    if (v == 0.0) v = 1.0;
  }
  return st;
}

void Standardizer::apply(std::vector<RawPath>& paths) const {
  for (auto& p : paths) {
    for (auto& s : p.states) {
      for (std::size_t j = 0; j < s.dim() && j < mean.size(); ++j) s.coords[j] = (s.coords[j] - mean[j]) / scale[j];
    }
  }
}

}  // namespace stoplab
