#include <doctest.h>

#include <algorithm>
#include <random>
#include <set>
#include <sstream>
#include <stdexcept>

#include "stoplab/data.hpp"

using namespace stoplab;

namespace {

// Random paths of random length with a random stop (or none).
void random_labeled(std::size_t n, std::uint64_t seed, std::vector<RawPath>& paths,
                    std::vector<ExpertLabeling>& labels) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<int> len(1, 30);
  std::normal_distribution<double> z(0.0, 1.0);
  std::bernoulli_distribution stops(0.6);
  for (std::size_t i = 0; i < n; ++i) {
    RawPath p;
    const int L = len(rng);
    for (int t = 0; t < L; ++t) p.states.emplace_back(std::vector<double>{z(rng), z(rng)});
    ExpertLabeling lab;
    if (stops(rng)) {
      lab.tau = std::uniform_int_distribution<int>(0, L - 1)(rng);
      lab.n_labeled = *lab.tau + 1;
    } else {
      lab.n_labeled = L;
    }
    paths.push_back(std::move(p));
    labels.push_back(lab);
  }
}

}  // namespace

TEST_CASE("preprocessing invariants on 1000 random labelled paths") {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  random_labeled(1000, 11, paths, labels);
  const auto ts = preprocess(paths, labels, FeatureMap{});
  std::size_t stopped = 0;
  for (const auto& l : labels) stopped += l.stopped();
  CHECK(ts.count_action(Action::Stop) == stopped);
  CHECK(ts.n_paths() == 1000);
  for (std::size_t p = 0; p < ts.n_paths(); ++p) {
    for (std::size_t i = ts.offsets[p]; i < ts.offsets[p + 1]; ++i) {
      const auto& r = ts.records[i];
      CHECK(r.path_id == ts.path_ids[p]);
      CHECK(r.time_index == static_cast<int>(i - ts.offsets[p]));
      if (r.a == Action::Stop) {
        CHECK(r.s_next.is_cemetery);
        CHECK(std::all_of(r.s_next.coords.begin(), r.s_next.coords.end(), [](double c) { return c == 0.0; }));
        CHECK(i + 1 == ts.offsets[p + 1]);
      } else {
        CHECK_FALSE(r.s_next.is_cemetery);
        CHECK(r.s_next.coords == paths[p].states[static_cast<std::size_t>(r.time_index + 1)].coords);
      }
    }
  }
  const auto sp = split(ts, 0.3, 5);
  CHECK(sp.val.n_paths() == 300);
  CHECK(sp.train.size() + sp.val.size() == ts.size());
  std::set<int> train_ids(sp.train.path_ids.begin(), sp.train.path_ids.end());
  for (const auto& r : sp.val.records) CHECK_FALSE(train_ids.contains(r.path_id));
  for (const auto& r : sp.train.records) CHECK(train_ids.contains(r.path_id));
}

TEST_CASE("unstopped paths contribute continue records up to the last pair") {
  RawPath p;
  for (int t = 0; t < 4; ++t) p.states.emplace_back(std::vector<double>{double(t)});
  ExpertLabeling lab;
  lab.n_labeled = 4;
  const auto ts = preprocess({p}, {lab}, FeatureMap{true, 4}, 7);
  REQUIRE(ts.size() == 3);
  CHECK(ts.records[2].s.coords == std::vector<double>{2.0, 0.5});
  CHECK(ts.records[2].s_next.coords == std::vector<double>{3.0, 0.75});
  CHECK(ts.path_ids == std::vector<int>{7});
  ExpertLabeling bad;
  bad.n_labeled = 3;
  bad.tau = 1;
  CHECK_THROWS_AS(preprocess({p}, {bad}, FeatureMap{}), std::invalid_argument);
}

TEST_CASE("split sizes and determinism") {
  CHECK(split_indices(175, 0.3, 1).size() == 52);
  CHECK(split_indices(10, 0.25, 1).size() == 2);
  CHECK(split_indices(175, 0.3, 1) == split_indices(175, 0.3, 1));
  CHECK(split_indices(175, 0.3, 1) != split_indices(175, 0.3, 2));
  const auto v = split_indices(175, 0.3, 3);
  CHECK(std::is_sorted(v.begin(), v.end()));
  CHECK(std::adjacent_find(v.begin(), v.end()) == v.end());
  CHECK_THROWS_AS(split_indices(1, 0.3, 0), std::invalid_argument);
  CHECK_THROWS_AS(split_indices(10, 0.0, 0), std::invalid_argument);
  CHECK_THROWS_AS(split_indices(10, 1.0, 0), std::invalid_argument);
}

TEST_CASE("history ends with the successor of the record") {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  random_labeled(20, 3, paths, labels);
  const auto ts = preprocess(paths, labels, FeatureMap{});
  for (std::size_t i = 0; i < ts.size(); ++i) {
    const auto h = history(ts, i);
    const auto& r = ts.records[i];
    REQUIRE(h.size() == static_cast<std::size_t>(r.time_index) + 2);
    CHECK(h[static_cast<std::size_t>(r.time_index)].coords == r.s.coords);
    CHECK(h.back().is_cemetery == r.s_next.is_cemetery);
  }
  CHECK_THROWS_AS(history(ts, ts.size()), std::out_of_range);
}

TEST_CASE("batch sampler covers every record once per epoch") {
  BatchSampler s(1000, 128, 9);
  CHECK(s.batches_per_epoch() == 8);
  for (int e = 0; e < 3; ++e) {
    const auto batches = s.epoch();
    REQUIRE(batches.size() == 8);
    CHECK(batches.back().size() == 1000 - 7 * 128);
    std::vector<std::size_t> all;
    for (const auto& b : batches) all.insert(all.end(), b.begin(), b.end());
    std::sort(all.begin(), all.end());
    for (std::size_t i = 0; i < all.size(); ++i) CHECK(all[i] == i);
  }
  BatchSampler a(50, 7, 4), b(50, 7, 4);
  CHECK(a.epoch() == b.epoch());
  CHECK_THROWS_AS(BatchSampler(10, 0, 0), std::invalid_argument);
}

TEST_CASE("sample_batch draws distinct records") {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  random_labeled(30, 8, paths, labels);
  const auto ts = preprocess(paths, labels, FeatureMap{});
  std::mt19937_64 rng(1);
  const auto b = sample_batch(ts, 40, true, rng);
  std::set<std::size_t> uniq(b.indices.begin(), b.indices.end());
  CHECK(uniq.size() == 40);
  CHECK(b.histories.size() == 40);
  CHECK_THROWS_AS(sample_batch(ts, ts.size() + 1, false, rng), std::invalid_argument);
}

TEST_CASE("labelled CSV round trip is exact") {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  random_labeled(25, 21, paths, labels);
  paths[3].event_time = 2;
  LabeledPaths lp{paths, labels, {}};
  for (int i = 0; i < 25; ++i) lp.path_ids.push_back(100 + i);
  std::stringstream ss;
  write_labeled_csv(ss, lp);
  const auto back = read_labeled_csv(ss);
  REQUIRE(back.paths.size() == 25);
  CHECK(back.path_ids == lp.path_ids);
  for (std::size_t i = 0; i < 25; ++i) {
    REQUIRE(back.paths[i].length() == paths[i].length());
    for (int t = 0; t < paths[i].length(); ++t) CHECK(back.paths[i].states[t].coords == paths[i].states[t].coords);
    CHECK(back.labels[i].tau == labels[i].tau);
    CHECK(back.labels[i].n_labeled == labels[i].n_labeled);
    CHECK(back.paths[i].event_time == paths[i].event_time);
  }
  std::istringstream bad("id,t,x,a,event_time\n");
  CHECK_THROWS_AS(read_labeled_csv(bad), std::runtime_error);
}

TEST_CASE("ingest picks the last kept row at or before the event") {
  std::ostringstream csv;
  csv << "unit,time,x,y,hit\n";
  for (int i = 0; i < 10; ++i) csv << "a," << i << ',' << i << ',' << -i << ',' << (i == 7 ? 1 : 0) << '\n';
  for (int i = 0; i < 5; ++i) csv << "b," << i << ',' << 10 + i << ",0,0\n";
  csv << "c,0,1,1,0\nc,0,2,2,0\n";     // time does not increase
  csv << "d,0,1,,0\n";                 // missing value
  IngestSchema schema;
  schema.path_column = "unit";
  schema.time_column = "time";
  schema.event_column = "hit";
  schema.feature_columns = {"x", "y"};
  std::istringstream in(csv.str());
  const auto r = ingest_csv(in, schema, 3);
  REQUIRE(r.data.paths.size() == 2);
  CHECK(r.diagnostics.size() == 2);
  const auto& a = r.data.paths[0];
  REQUIRE(a.length() == 3);
  CHECK(a.states[2].coords == std::vector<double>{6.0, -6.0});
  CHECK(r.data.labels[0].tau == 2);
  CHECK(a.event_time == 2);
  CHECK(r.data.paths[1].length() == 2);
  CHECK_FALSE(r.data.labels[1].tau);
  CHECK(r.data.path_ids == std::vector<int>{0, 1});

  schema.feature_columns = {"z"};
  std::istringstream in2(csv.str());
  CHECK_THROWS_AS(ingest_csv(in2, schema, 1), std::runtime_error);
  std::istringstream in3(csv.str());
  CHECK_THROWS_AS(ingest_csv(in3, schema, 0), std::invalid_argument);
}

TEST_CASE("standardizer gives zero mean and unit scale on its fit set") {
  std::vector<RawPath> paths;
  std::vector<ExpertLabeling> labels;
  random_labeled(40, 2, paths, labels);
  for (auto& p : paths) {
    for (auto& s : p.states) {
      s.coords[0] = 3.0 + 10.0 * s.coords[0];
      s.coords[1] = 7.0;
    }
  }
  const auto st = Standardizer::fit(paths);
  CHECK(st.scale[1] == 1.0);
  st.apply(paths);
  double m = 0.0, v = 0.0;
  std::size_t n = 0;
  for (const auto& p : paths) {
    for (const auto& s : p.states) {
      m += s.coords[0];
      v += s.coords[0] * s.coords[0];
      ++n;
      CHECK(s.coords[1] == 0.0);
    }
  }
  CHECK(m / n == doctest::Approx(0.0).scale(1.0).epsilon(1e-12));
  CHECK(v / n == doctest::Approx(1.0).epsilon(1e-12));
}
