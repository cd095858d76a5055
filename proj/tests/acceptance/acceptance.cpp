// Acceptance run: one PASS/FAIL line per criterion. Property criteria (P*)
// run first, the gradient gate before anything trains; the benchmark
// criteria (Q*) train every listed algorithm on both Brownian examples.
//
// Exit status is 0 when every P criterion passes. Q lines report the measured
// values and are informational for the exit status.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <random>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "stoplab/expert.hpp"
#include "stoplab/harness.hpp"
#include "stoplab/knn.hpp"
#include "stoplab/oversampling.hpp"
#include "stoplab/smdp.hpp"
#include "support/gradient_gate.hpp"

using namespace stoplab;
namespace fs = std::filesystem;

namespace {

int g_p_failures = 0;

void report(const std::string& id, bool pass, const std::string& detail) {
  std::printf("%s %s  %s\n", pass ? "PASS" : "FAIL", id.c_str(), detail.c_str());
  std::fflush(stdout);
  if (!pass && id[0] == 'P') ++g_p_failures;
}

std::string fmt(const char* f, double v) {
  char buf[64];
  std::snprintf(buf, sizeof buf, f, v);
  return buf;
}

// --- P1 --------------------------------------------------------------------

std::vector<double> rule_value(const FiniteOSProblem& p, std::uint32_t rule) {
  const std::size_t n = p.n_states();
  std::vector<double> w = p.G;
  for (int t = p.horizon - 1; t >= 0; --t) {
    std::vector<double> prev(n);
    for (std::size_t s = 0; s < n; ++s) {
      if (rule >> (static_cast<std::size_t>(t) * n + s) & 1U) {
        prev[s] = p.G[s];
      } else {
        double ev = 0.0;
        for (std::size_t j = 0; j < n; ++j) ev += p.P[s][j] * w[j];
        prev[s] = p.g[s] + p.gamma * ev;
      }
    }
    w = prev;
  }
  return w;
}

void p1() {
  std::mt19937_64 rng(17);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  FiniteOSProblem p;
  p.horizon = 4;
  p.gamma = 0.9;
  p.P.assign(5, std::vector<double>(5));
  for (auto& row : p.P) {
    double s = 0.0;
    for (auto& x : row) s += (x = u(rng));
    for (auto& x : row) x /= s;
  }
  for (int i = 0; i < 5; ++i) {
    p.g.push_back(u(rng) - 0.5);
    p.G.push_back(3.0 * u(rng));
  }
  const auto ex = backward_induction_exact(p);
  std::vector<double> best(5, -1e300);
  for (std::uint32_t r = 0; r < (1U << 20); ++r) {
    const auto w = rule_value(p, r);
    for (int s = 0; s < 5; ++s) best[s] = std::max(best[s], w[s]);
  }
  double worst = 0.0;
  for (int s = 0; s < 5; ++s) worst = std::max(worst, std::abs(best[s] - ex.V[0][s]));

  // Embedded two-successor chain replayed over its full path tree.
  const int n = 5, H = 4;
  const std::vector<std::pair<int, int>> succ{{1, 2}, {3, 0}, {4, 4}, {2, 1}, {0, 3}};
  FiniteOSProblem c;
  c.horizon = H;
  c.gamma = 0.95;
  c.P.assign(n, std::vector<double>(n, 0.0));
  for (int s = 0; s < n; ++s) {
    c.P[s][succ[s].first] += 0.5;
    c.P[s][succ[s].second] += 0.5;
  }
  c.g = {0.2, -0.1, 0.05, 0.3, -0.4};
  c.G = {0.5, 1.7, 0.1, 1.2, 2.2};
  const auto cex = backward_induction_exact(c);
  std::vector<RawPath> paths;
  for (int s0 = 0; s0 < n; ++s0) {
    for (int b = 0; b < (1 << H); ++b) {
      RawPath rp;
      int s = s0;
      rp.states.push_back(StatePoint({double(s)}));
      for (int t = 0; t < H; ++t) {
        s = (b >> t & 1) ? succ[s].second : succ[s].first;
        rp.states.push_back(StatePoint({double(s)}));
      }
      paths.push_back(rp);
    }
  }
  GainSpec gs;
  gs.gamma = c.gamma;
  gs.g = [&](const StatePoint& x) { return c.g[static_cast<std::size_t>(x.coords[0])]; };
  gs.G = [&](const StatePoint& x) { return c.G[static_cast<std::size_t>(x.coords[0])]; };
  const auto reg = backward_induction_regression(paths, gs, 1);
  long agree = 0, total = 0;
  for (std::size_t i = 0; i < paths.size(); ++i) {
    for (int t = 0; t < H; ++t) {
      agree += reg.stop[i][t] == cex.stop[t][static_cast<std::size_t>(paths[i].states[t].coords[0])];
      ++total;
    }
  }
  const double frac = static_cast<double>(agree) / total;
  report("P1", worst <= 1e-12 && frac >= 0.99,
         "exact vs 2^20 rules max |dV0| = " + fmt("%.3g", worst) + "; regression agreement " + fmt("%.4f", frac) +
             " (>= 0.99)");
}

// --- P2 --------------------------------------------------------------------

void p2() {
  double worst = 0.0;
  std::string names;
  for (std::uint64_t seed : {1, 2, 3}) {
    for (const auto& r : stoplab::testing::run_gradient_gate(seed)) {
      worst = std::max(worst, r.max_rel_error);
      if (seed == 1) names += (names.empty() ? "" : ",") + r.loss;
    }
  }
  report("P2", worst <= 1e-4, "gradient gate [" + names + "] max rel error " + fmt("%.3g", worst) + " (<= 1e-4)");
}

// --- P3 --------------------------------------------------------------------

void p3() {
  std::mt19937_64 rng(23);
  std::uniform_real_distribution<double> q(-10.0, 10.0);
  long bad = 0;
  const double ln2 = std::log(2.0);
  for (double eps : {1e-3, 0.1, 1.0}) {
    for (int i = 0; i < 100000; ++i) {
      const QPair p{q(rng), q(rng)};
      const double m = std::max(p.q_stop, p.q_continue);
      const double v = soft_value(p, eps);
      // Strictness of the lower bound is read from the log excess, which
      // stays finite where v - m underflows.
      const bool ok = v >= m && std::isfinite(soft_value_log_excess(p, eps)) &&
                      v <= m + eps * ln2 + 4 * std::numeric_limits<double>::epsilon() * (1.0 + std::abs(m));
      bad += !ok;
    }
  }
  double min_mass = 1.0;
  for (int i = 0; i < 100000; ++i) {
    const double a = q(rng);
    double d = q(rng) / 10.0;
    if (std::abs(d) < 0.1) d = d < 0 ? -0.1 : 0.1;
    const auto pp = boltzmann_policy({a, a + d}, 1e-6);
    min_mass = std::min(min_mass, d > 0 ? pp.p_continue : pp.p_stop);
  }
  report("P3", bad == 0 && min_mass >= 1.0 - 1e-10,
         std::to_string(bad) + " bound violations in 3x1e5 pairs; min argmax mass at eps=1e-6 " +
             fmt("%.12f", min_mass));
}

// --- P4 --------------------------------------------------------------------

void p4() {
  std::mt19937_64 rng(29);
  std::uniform_int_distribution<int> len(1, 40);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution stops(0.5);
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  for (int i = 0; i < 1000; ++i) {
    RawPath p;
    const int L = len(rng);
    for (int t = 0; t < L; ++t) p.states.push_back(StatePoint({z(rng), z(rng)}));
    ExpertLabeling lab;
    lab.n_labeled = L;
    if (stops(rng)) {
      lab.tau = std::uniform_int_distribution<int>(0, L - 1)(rng);
      lab.n_labeled = *lab.tau + 1;
    }
    paths.push_back(p);
    labels.push_back(lab);
  }
  const auto ts = preprocess(paths, labels, FeatureMap{});
  long cemetery_bad = 0;
  for (const auto& r : ts.records) {
    if (r.a == Action::Stop) {
      cemetery_bad += !(r.s_next.is_cemetery &&
                        std::all_of(r.s_next.coords.begin(), r.s_next.coords.end(), [](double c) { return c == 0.0; }));
    }
  }
  std::size_t stopped = 0;
  for (const auto& l : labels) stopped += l.stopped();
  const auto sp = split(ts, 0.3, 31);
  std::set<int> tr(sp.train.path_ids.begin(), sp.train.path_ids.end());
  long shared = 0;
  for (const auto& r : sp.val.records) shared += tr.contains(r.path_id);
  const bool ok = cemetery_bad == 0 && ts.count_action(Action::Stop) == stopped && shared == 0 &&
                  sp.train.size() + sp.val.size() == ts.size();
  report("P4", ok,
         "stop records " + std::to_string(ts.count_action(Action::Stop)) + " / stopped paths " +
             std::to_string(stopped) + "; non-cemetery stops " + std::to_string(cemetery_bad) +
             "; val records from train paths " + std::to_string(shared));
}

// --- P5 --------------------------------------------------------------------

void p5() {
  std::mt19937_64 rng(37);
  std::normal_distribution<double> z(0.0, 1.0);
  std::vector<std::vector<double>> minority(500);
  for (auto& p : minority) p = {1.0 + z(rng), -0.5 + 0.7 * z(rng)};
  const int k = 12;
  const std::size_t n = 10000;
  const auto syn = smote_generate(minority, k, n, 41);
  double worst_z = 0.0;
  for (std::size_t c = 0; c < 2; ++c) {
    double mm = 0.0, m = 0.0, v = 0.0;
    for (const auto& p : minority) mm += p[c];
    mm /= minority.size();
    for (const auto& p : syn) m += p[c];
    m /= n;
    for (const auto& p : syn) v += (p[c] - m) * (p[c] - m);
    worst_z = std::max(worst_z, std::abs(m - mm) / std::sqrt(v / (n - 1) / n));
  }
  PointCloud cloud(minority.size(), 2);
  for (std::size_t i = 0; i < minority.size(); ++i) std::copy(minority[i].begin(), minority[i].end(), cloud.row(i));
  const auto nbrs = knn_indices_serial(cloud, k);
  long off_segment = 0;
  for (const auto& x : syn) {
    bool found = false;
    for (std::size_t i = 0; i < minority.size() && !found; ++i) {
      for (auto j : nbrs[i]) {
        const auto& a = minority[i];
        const auto& b = minority[j];
        const double dx = b[0] - a[0], dy = b[1] - a[1];
        const double u = ((x[0] - a[0]) * dx + (x[1] - a[1]) * dy) / (dx * dx + dy * dy);
        if (u >= -1e-12 && u <= 1 + 1e-12 && std::hypot(a[0] + u * dx - x[0], a[1] + u * dy - x[1]) <= 1e-9) {
          found = true;
          break;
        }
      }
    }
    off_segment += !found;
  }
  report("P5", worst_z <= 3.0 && off_segment == 0,
         "max |mean diff| / SE = " + fmt("%.3f", worst_z) + " (<= 3); synthetics off a minority segment " +
             std::to_string(off_segment));
}

// --- P6 and Q --------------------------------------------------------------

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

RunConfig env_config(const std::string& env, const fs::path& out) {
  auto cfg = load_config(fs::path(STOPLAB_SOURCE_DIR) / "configs" / (env + ".conf"));
  cfg.out_dir = out / env;
  return cfg;
}

void p6(const fs::path& out) {
  bool same = true;
  std::string runs;
  for (const char* dir : {"p6_a", "p6_b"}) {
    auto cfg = env_config("bmG", out / dir);
    cfg.algorithms = {Algorithm::DoIqsLb};
    cfg.seeds = {0};
    fs::remove_all(cfg.out_dir);
    std::ostringstream log;
    if (cmd_gen_data(cfg, log) != kExitOk || cmd_train(cfg, false, log) != kExitOk) same = false;
  }
  auto a = env_config("bmG", out / "p6_a"), b = env_config("bmG", out / "p6_b");
  for (const char* f : {"curves.csv", "checkpoint.bin"}) {
    const auto x = slurp(run_dir(a, Algorithm::DoIqsLb, 0) / f);
    const auto y = slurp(run_dir(b, Algorithm::DoIqsLb, 0) / f);
    same = same && !x.empty() && x == y;
  }
  report("P6", same, "two full do-iqs-lb trainings on bmG (200 epochs, seed 0): curves.csv and checkpoint.bin " +
                         std::string(same ? "bit-identical" : "differ"));
}

double median(std::vector<double> v) {
  std::sort(v.begin(), v.end());
  const auto n = v.size();
  return n % 2 ? v[n / 2] : 0.5 * (v[n / 2 - 1] + v[n / 2]);
}

struct EnvResults {
  std::map<std::string, std::vector<double>> ba;  // per algorithm, seed order
  std::map<std::string, std::vector<double>> seconds;
};

EnvResults run_env(const std::string& env, const fs::path& out, const std::vector<Algorithm>& algos, bool resume) {
  auto cfg = env_config(env, out);
  cfg.algorithms = algos;
  std::ostringstream log;
  if (!resume || !fs::exists(cfg.out_dir / "data" / "manifest.txt")) cmd_gen_data(cfg, log);
  EnvResults res;
  for (auto a : algos) {
    for (auto s : cfg.seeds) {
      auto one = cfg;
      one.algorithms = {a};
      one.seeds = {s};
      const auto t0 = std::chrono::steady_clock::now();
      std::ostringstream l;
      cmd_train(one, resume, l);
      const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
      res.seconds[std::string(algorithm_name(a))].push_back(secs);
      std::fprintf(stderr, "[acceptance] %s %s seed %llu: %.1f s\n", env.c_str(),
                   std::string(algorithm_name(a)).c_str(), static_cast<unsigned long long>(s), secs);
    }
  }
  std::ostringstream l;
  cmd_evaluate(cfg, l);
  std::istringstream csv(slurp(cfg.out_dir / "metrics.csv"));
  std::string line;
  std::getline(csv, line);
  while (std::getline(csv, line)) {
    std::vector<std::string> cells;
    std::istringstream ls(line);
    for (std::string c; std::getline(ls, c, ',');) cells.push_back(c);
    if (cells.size() >= 4) res.ba[cells[0]].push_back(std::stod(cells[3]));
  }
  std::cerr << l.str();
  return res;
}

std::string list(const std::vector<double>& v) {
  std::string s;
  for (double x : v) s += (s.empty() ? "" : " ") + fmt("%.4f", x);
  return "[" + s + "]";
}

void q_criteria(const fs::path& out, bool resume) {
  const std::vector<Algorithm> algos{Algorithm::Classifier, Algorithm::Iqs,         Algorithm::IqsSmote,
                                     Algorithm::IqsCsSmote, Algorithm::MbIqsSmote,  Algorithm::MbIqsCsSmote,
                                     Algorithm::DoIqsLb};
  const auto bm = run_env("bmG", out, algos, resume);
  const auto bmg = run_env("bmgG", out, algos, resume);
  auto ba = [](const EnvResults& r, const char* a) {
    const auto it = r.ba.find(a);
    return it == r.ba.end() ? std::vector<double>{} : it->second;
  };
  auto med = [&](const EnvResults& r, const char* a) {
    const auto v = ba(r, a);
    return v.size() == 5 ? median(v) : std::nan("");
  };

  {
    const auto v = ba(bm, "iqs");
    double mean = 0.0;
    for (double x : v) mean += x;
    mean = v.empty() ? std::nan("") : mean / v.size();
    const auto& secs = bm.seconds.at("iqs");
    const double slowest = *std::max_element(secs.begin(), secs.end());
    report("Q1", v.size() == 5 && std::abs(mean - 0.5) <= 0.02 && slowest <= 600.0,
           "bmG iqs test BA " + list(v) + " mean " + fmt("%.4f", mean) + " (want 0.50 +- 0.02); slowest seed " +
               fmt("%.1f", slowest) + " s (<= 600)");
  }
  {
    const double m = med(bm, "do-iqs-lb");
    report("Q2", m >= 0.85, "bmG do-iqs-lb test BA " + list(ba(bm, "do-iqs-lb")) + " median " + fmt("%.4f", m) +
                                " (>= 0.85)");
  }
  {
    const double m = med(bmg, "do-iqs-lb");
    report("Q3", m >= 0.78, "bmgG do-iqs-lb test BA " + list(ba(bmg, "do-iqs-lb")) + " median " + fmt("%.4f", m) +
                                " (>= 0.78)");
  }
  {
    bool ok = true;
    std::string detail;
    for (const auto* r : {&bm, &bmg}) {
      const char* env = r == &bm ? "bmG" : "bmgG";
      const double lb = med(*r, "do-iqs-lb"), cs = med(*r, "iqs-cs-smote"), sm = med(*r, "iqs-smote"),
                   iq = med(*r, "iqs"), cl = med(*r, "classifier");
      const bool chain = lb > cs && cs > sm && sm > iq;
      bool over = true;
      for (const char* a : {"iqs-smote", "iqs-cs-smote", "mb-iqs-smote", "mb-iqs-cs-smote"}) over = over && med(*r, a) > cl;
      ok = ok && chain && over;
      detail += std::string(env) + ": lb " + fmt("%.4f", lb) + " cs " + fmt("%.4f", cs) + " smote " + fmt("%.4f", sm) +
                " iqs " + fmt("%.4f", iq) + " clf " + fmt("%.4f", cl) + " mb-smote " +
                fmt("%.4f", med(*r, "mb-iqs-smote")) + " mb-cs " + fmt("%.4f", med(*r, "mb-iqs-cs-smote")) +
                (chain ? "" : " [order broken]") + (over ? "" : " [smote <= classifier]") + "; ";
    }
    report("Q4", ok, "medians " + detail);
  }
  {
    const double m = med(bm, "classifier");
    report("Q5", m >= 0.56 && m <= 0.68,
           "bmG classifier test BA " + list(ba(bm, "classifier")) + " median " + fmt("%.4f", m) + " (want 0.56-0.68)");
  }
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"stoplab acceptance run"};
  std::string out = "acceptance_out";
  bool resume = false, properties_only = false;
  app.add_option("--out", out, "Scratch directory for training artifacts");
  app.add_flag("--resume", resume, "Reuse finished runs found under --out");
  app.add_flag("--properties-only", properties_only, "Run the P criteria only");
  CLI11_PARSE(app, argc, argv);

  p2();
  p1();
  p3();
  p4();
  p5();
  if (!properties_only) {
    p6(out);
    q_criteria(out, resume);
  }
  std::printf("%s: %d property criteria failed\n", g_p_failures ? "FAILED" : "OK", g_p_failures);
  return g_p_failures ? 1 : 0;
}
