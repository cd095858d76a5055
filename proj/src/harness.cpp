#include "stoplab/harness.hpp"

#include <omp.h>

#include <algorithm>
#include <chrono>
#include <cmath>
#include <fstream>
#include <iomanip>
#include <map>
#include <ostream>
#include <sstream>

namespace stoplab {

namespace fs = std::filesystem;

namespace {

fs::path data_dir(const RunConfig& cfg) { return cfg.out_dir / "data"; }

LabeledPaths subset(const LabeledPaths& lp, const std::vector<std::size_t>& idx) {
  LabeledPaths out;
  for (auto i : idx) {
    out.paths.push_back(lp.paths[i]);
    out.labels.push_back(lp.labels[i]);
    out.path_ids.push_back(lp.path_ids[i]);
  }
  return out;
}

LabeledPaths slice(const std::vector<RawPath>& all, const std::vector<ExpertLabeling>& labels, int first, int count) {
  LabeledPaths lp;
  for (int i = first; i < first + count; ++i) {
    lp.paths.push_back(all[static_cast<std::size_t>(i)]);
    lp.labels.push_back(labels[static_cast<std::size_t>(i)]);
    lp.path_ids.push_back(i);
  }
  return lp;
}

void write_text(const fs::path& file, const std::string& text) {
  std::ofstream os(file, std::ios::binary);
  if (!os) throw std::runtime_error("cannot write " + file.string());
  os << text;
}

std::string fmt_opt(const std::optional<double>& v) {
  if (!v) return "NA";
  std::ostringstream os;
  os << std::setprecision(10) << *v;
  return os.str();
}

int worker_count(const RunConfig& cfg, std::size_t runs) {
  int jobs = cfg.jobs > 0 ? cfg.jobs : omp_get_max_threads();
  return std::max(1, std::min(jobs, static_cast<int>(runs)));
}

}  // namespace

Dataset assemble_dataset(const RunConfig& cfg, LabeledPaths train_paths, LabeledPaths test_paths) {
  Dataset d;
  d.features = FeatureMap{cfg.env.include_time_in_state, cfg.env.horizon};
  d.train_paths = std::move(train_paths);
  d.test_paths = std::move(test_paths);
  d.val_index = split_indices(d.train_paths.paths.size(), cfg.data.val_frac, derive_seed(cfg.data.seed, 7));
  std::vector<std::size_t> train_index;
  for (std::size_t i = 0, v = 0; i < d.train_paths.paths.size(); ++i) {
    if (v < d.val_index.size() && d.val_index[v] == i) {
      ++v;
    } else {
      train_index.push_back(i);
    }
  }
  const auto tr = subset(d.train_paths, train_index);
  d.train = preprocess(tr.paths, tr.labels, d.features);
  d.val_eval = build_eval_set(subset(d.train_paths, d.val_index), d.features);
  d.test_eval = build_eval_set(d.test_paths, d.features);
  return d;
}

Dataset make_dataset(const RunConfig& cfg) {
  if (cfg.ingest) {
    const auto& ic = *cfg.ingest;
    auto tr = ingest_csv(ic.train_csv, ic.schema, ic.downsample);
    auto te = ingest_csv(ic.test_csv, ic.schema, ic.downsample);
    if (ic.standardize) {
      const auto st = Standardizer::fit(tr.data.paths);
      st.apply(tr.data.paths);
      st.apply(te.data.paths);
    }
    return assemble_dataset(cfg, std::move(tr.data), std::move(te.data));
  }
  const int n = cfg.data.train_paths + cfg.data.test_paths;
  std::vector<RawPath> all;
  all.reserve(static_cast<std::size_t>(n));
  for (int i = 0; i < n; ++i) all.push_back(simulate_path(cfg.env, derive_seed(cfg.data.seed, 1000 + static_cast<std::uint64_t>(i))));
  // The expert labels every simulated path with one regression over all of them.
  const auto labels = label_paths(all, cfg.env, cfg.expert);
  return assemble_dataset(cfg, slice(all, labels, 0, cfg.data.train_paths),
                          slice(all, labels, cfg.data.train_paths, cfg.data.test_paths));
}

Dataset load_dataset(const RunConfig& cfg) {
  const auto dir = data_dir(cfg);
  std::ifstream tr(dir / "train.csv"), te(dir / "test.csv");
  if (!tr || !te) throw std::runtime_error("missing " + dir.string() + "/{train,test}.csv; run gen-data first");
  return assemble_dataset(cfg, read_labeled_csv(tr), read_labeled_csv(te));
}

TrainConfig run_train_config(const RunConfig& cfg, Algorithm algo, std::uint64_t seed) {
  TrainConfig tc = cfg.train;
  tc.algorithm = algo;
  tc.seed = seed;
  return tc;
}

fs::path run_dir(const RunConfig& cfg, Algorithm algo, std::uint64_t seed) {
  return cfg.out_dir / std::string(algorithm_name(algo)) / std::to_string(seed);
}

RunOutcome run_one(const RunConfig& cfg, const Dataset& data, Algorithm algo, std::uint64_t seed) {
  RunOutcome out;
  out.algorithm = algo;
  out.seed = seed;
  const auto t0 = std::chrono::steady_clock::now();
  try {
    out.result = train(run_train_config(cfg, algo, seed), data.train, data.val_eval);
    out.ok = !out.result.diverged;
    out.error = out.result.error;
  } catch (const std::exception& e) {
    out.ok = false;
    out.error = e.what();
  }
  out.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  return out;
}

void write_run_artifacts(const RunConfig& cfg, const RunOutcome& run) {
  const auto dir = run_dir(cfg, run.algorithm, run.seed);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "curves.csv", std::ios::binary);
    write_curves_csv(os, run.result.curves);
  }
  std::ostringstream st;
  st << "algorithm = " << algorithm_name(run.algorithm) << "\nseed = " << run.seed
     << "\nstatus = " << (run.ok ? "ok" : "failed") << "\nbest_epoch = " << run.result.best_epoch
     << "\nbest_val_ba = " << std::setprecision(17) << run.result.best_val_ba << "\n";
  if (!run.ok) st << "error = " << run.error << "\n";
  write_text(dir / "status.txt", st.str());
  if (run.ok) save_checkpoint(dir / "checkpoint.bin", run.result.checkpoint(run_train_config(cfg, run.algorithm, run.seed)));
}

int cmd_gen_data(const RunConfig& cfg, std::ostream& log) {
  const auto d = make_dataset(cfg);
  const auto dir = data_dir(cfg);
  fs::create_directories(dir);
  {
    std::ofstream os(dir / "train.csv", std::ios::binary);
    write_labeled_csv(os, d.train_paths);
  }
  {
    std::ofstream os(dir / "test.csv", std::ios::binary);
    write_labeled_csv(os, d.test_paths);
  }
  {
    std::ofstream os(dir / "train_records.csv", std::ios::binary);
    write_records_csv(os, d.train);
  }
  auto stopped = [](const LabeledPaths& lp) {
    return std::count_if(lp.labels.begin(), lp.labels.end(), [](const ExpertLabeling& l) { return l.stopped(); });
  };
  std::ostringstream m;
  m << "# stoplab data manifest\n"
    << "source = " << (cfg.ingest ? "ingest" : "simulated") << "\n"
    << "seed = " << cfg.data.seed << "\n"
    << "train_paths = " << d.train_paths.paths.size() << "\n"
    << "test_paths = " << d.test_paths.paths.size() << "\n"
    << "val_frac = " << std::setprecision(15) << cfg.data.val_frac << "\n"
    << "val_paths = " << d.val_index.size() << "\n"
    << "val_path_ids = ";
  for (std::size_t i = 0; i < d.val_index.size(); ++i) {
    m << (i ? "," : "") << d.train_paths.path_ids[d.val_index[i]];
  }
  m << "\nstopped_train_paths = " << stopped(d.train_paths) << "\n"
    << "stopped_test_paths = " << stopped(d.test_paths) << "\n"
    << "train_records = " << d.train.size() << "\n"
    << "train_stop_records = " << d.train.count_action(Action::Stop) << "\n"
    << "expert_gamma = " << cfg.expert.gamma << "\n"
    << "expert_knn_k = " << cfg.expert.knn_k << "\n"
    << "env = " << env_name(cfg.env.kind) << "\n"
    << "env_dim = " << cfg.env.dim << "\n"
    << "env_horizon = " << cfg.env.horizon << "\n"
    << "env_dt = " << cfg.env.dt << "\n"
    << "env_time_feature = " << (cfg.env.include_time_in_state ? "true" : "false") << "\n";
  write_text(dir / "manifest.txt", m.str());
  log << "gen-data: " << d.train_paths.paths.size() << " train/val paths, " << d.test_paths.paths.size()
      << " test paths -> " << dir.string() << "\n";
  return kExitOk;
}

int cmd_train(const RunConfig& cfg, bool resume, std::ostream& log) {
  Dataset data;
  try {
    data = load_dataset(cfg);
  } catch (const std::exception& e) {
    log << "train: " << e.what() << "\n";
    return kExitRunFailure;
  }
  std::vector<std::pair<Algorithm, std::uint64_t>> jobs;
  for (auto a : cfg.algorithms) {
    for (auto s : cfg.seeds) jobs.emplace_back(a, s);
  }
  std::vector<RunOutcome> outcomes(jobs.size());
  const int workers = worker_count(cfg, jobs.size());
  const auto n = static_cast<long>(jobs.size());
#pragma omp parallel for schedule(dynamic) num_threads(workers)
  for (long j = 0; j < n; ++j) {
    const auto [algo, seed] = jobs[static_cast<std::size_t>(j)];
    auto& out = outcomes[static_cast<std::size_t>(j)];
    if (resume && fs::exists(run_dir(cfg, algo, seed) / "checkpoint.bin")) {
      out.algorithm = algo;
      out.seed = seed;
      out.ok = true;
      out.skipped = true;
      continue;
    }
    out = run_one(cfg, data, algo, seed);
    try {
      write_run_artifacts(cfg, out);
    } catch (const std::exception& e) {
      out.ok = false;
      out.error = e.what();
    }
#pragma omp critical(stoplab_log)
    {
      log << "train: " << algorithm_name(algo) << " seed " << seed << ": "
          << (out.ok ? "ok" : "FAILED (" + out.error + ")") << ", best val BA " << std::setprecision(4)
          << out.result.best_val_ba << " at epoch " << out.result.best_epoch << ", " << std::setprecision(3)
          << out.seconds << " s\n";
    }
  }
  std::size_t ok = 0, skipped = 0, failed = 0;
  for (const auto& o : outcomes) {
    if (o.skipped) {
      ++skipped;
    } else if (o.ok) {
      ++ok;
    } else {
      ++failed;
    }
  }
  log << "train: " << ok << " succeeded, " << skipped << " skipped, " << failed << " failed\n";
  for (const auto& o : outcomes) {
    if (!o.ok) log << "  failed: " << algorithm_name(o.algorithm) << " seed " << o.seed << ": " << o.error << "\n";
  }
  return failed == 0 ? kExitOk : kExitRunFailure;
}

void write_metrics_csv(std::ostream& os, const std::vector<MetricsRow>& rows) {
  os << "algo,env,seed,ba,m_tte,m_emr,best_epoch,tp,fp,tn,fn\n";
  for (const auto& r : rows) {
    os << r.algorithm << ',' << r.env << ',' << r.seed << ',' << std::setprecision(10) << r.balanced_accuracy << ','
       << fmt_opt(r.m_tte) << ',' << fmt_opt(r.m_emr) << ',' << r.best_epoch << ',' << r.counts.tp << ','
       << r.counts.fp << ',' << r.counts.tn << ',' << r.counts.fn << '\n';
  }
}

void write_table(std::ostream& os, const std::vector<MetricsRow>& rows) {
  std::vector<std::string> algos, envs;
  std::map<std::pair<std::string, std::string>, std::vector<double>> cells;
  for (const auto& r : rows) {
    if (std::find(algos.begin(), algos.end(), r.algorithm) == algos.end()) algos.push_back(r.algorithm);
    if (std::find(envs.begin(), envs.end(), r.env) == envs.end()) envs.push_back(r.env);
    cells[{r.algorithm, r.env}].push_back(r.balanced_accuracy);
  }
  constexpr int kNameWidth = 18;
  constexpr int kCellWidth = 14;
  os << std::left << std::setw(kNameWidth) << "algorithm";
  for (const auto& e : envs) os << std::setw(kCellWidth) << e;
  os << "\n";
  for (const auto& a : algos) {
    os << std::setw(kNameWidth) << a;
    for (const auto& e : envs) {
      const auto it = cells.find({a, e});
      if (it == cells.end()) {
        os << std::setw(kCellWidth) << "-";
        continue;
      }
      const auto& v = it->second;
      double mean = 0.0;
      for (double x : v) mean += x;
      mean /= static_cast<double>(v.size());
      double var = 0.0;
      for (double x : v) var += (x - mean) * (x - mean);
      const double sd = v.size() > 1 ? std::sqrt(var / static_cast<double>(v.size() - 1)) : 0.0;
      std::ostringstream cell;
      cell << std::fixed << std::setprecision(4) << mean << "±" << std::setprecision(2) << 2.0 * sd;
      // "±" is two bytes in UTF-8; pad by display width.
      os << cell.str() << std::string(static_cast<std::size_t>(std::max(1, kCellWidth - static_cast<int>(cell.str().size()) + 1)), ' ');
    }
    os << "\n";
  }
}

int cmd_evaluate(const RunConfig& cfg, std::ostream& log) {
  Dataset data;
  try {
    data = load_dataset(cfg);
  } catch (const std::exception& e) {
    log << "evaluate: " << e.what() << "\n";
    return kExitRunFailure;
  }
  std::vector<MetricsRow> rows;
  std::vector<std::string> missing;
  for (auto a : cfg.algorithms) {
    for (auto s : cfg.seeds) {
      const auto file = run_dir(cfg, a, s) / "checkpoint.bin";
      if (!fs::exists(file)) {
        missing.push_back(file.string());
        continue;
      }
      try {
        const auto ck = load_checkpoint(file);
        const auto model = model_from_checkpoint(ck);
        const auto rep = evaluate(model, data.test_eval, EvalMode::Parallel);
        MetricsRow r;
        r.algorithm = std::string(algorithm_name(a));
        r.env = std::string(env_name(cfg.env.kind));
        r.seed = s;
        r.balanced_accuracy = rep.balanced_accuracy;
        r.m_tte = rep.tradeoff.m_tte;
        r.m_emr = rep.tradeoff.m_emr;
        r.counts = rep.counts;
        const auto it = ck.meta.find("best_epoch");
        if (it != ck.meta.end()) r.best_epoch = std::stoi(it->second);
        rows.push_back(r);
      } catch (const std::exception& e) {
        missing.push_back(file.string() + " (" + e.what() + ")");
      }
    }
  }
  fs::create_directories(cfg.out_dir);
  {
    std::ofstream os(cfg.out_dir / "metrics.csv", std::ios::binary);
    write_metrics_csv(os, rows);
  }
  std::ostringstream table;
  write_table(table, rows);
  write_text(cfg.out_dir / "table.txt", table.str());
  log << table.str();
  for (const auto& m : missing) log << "evaluate: missing " << m << "\n";
  return missing.empty() ? kExitOk : kExitRunFailure;
}

int cmd_export_heatmaps(const RunConfig& cfg, std::ostream& log) {
  int failures = 0;
  for (auto a : cfg.algorithms) {
    for (auto s : cfg.seeds) {
      const auto dir = run_dir(cfg, a, s);
      try {
        const auto model = model_from_checkpoint(load_checkpoint(dir / "checkpoint.bin"));
        GridSpec grid;
        grid.x_min = grid.y_min = -cfg.heatmap.extent;
        grid.x_max = grid.y_max = cfg.heatmap.extent;
        grid.nx = grid.ny = cfg.heatmap.resolution;
        grid.horizon = cfg.env.horizon;
        grid.time_feature = cfg.env.include_time_in_state;
        grid.normalize = cfg.heatmap.normalize;
        const auto slices = export_surfaces(model, grid, cfg.heatmap.times);
        const auto out = dir / "heatmaps";
        fs::create_directories(out);
        for (const auto& sl : slices) {
          std::ofstream os(out / ("surfaces_t" + std::to_string(sl.t) + ".csv"), std::ios::binary);
          write_surface_csv(os, sl, grid);
        }
        std::ofstream os(out / "boundaries.csv", std::ios::binary);
        write_boundaries_csv(os, slices);
        log << "export-heatmaps: " << out.string() << "\n";
      } catch (const std::exception& e) {
        ++failures;
        log << "export-heatmaps: " << dir.string() << ": " << e.what() << "\n";
      }
    }
  }
  return failures == 0 ? kExitOk : kExitRunFailure;
}

int cmd_sweep(const RunConfig& cfg, bool resume, std::ostream& log) {
  if (!fs::exists(data_dir(cfg) / "manifest.txt")) {
    const int rc = cmd_gen_data(cfg, log);
    if (rc != kExitOk) return rc;
  }
  const int train_rc = cmd_train(cfg, resume, log);
  const int eval_rc = cmd_evaluate(cfg, log);
  return std::max(train_rc, eval_rc);
}

}  // namespace stoplab
