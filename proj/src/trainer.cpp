#include "stoplab/trainer.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <iomanip>
#include <ostream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <unordered_map>

namespace stoplab {

namespace {

struct AlgoEntry {
  Algorithm algo;
  std::string_view tag;
  AlgorithmTraits traits;
};

// classifier smote confidence model_based augmented local_bootstrap
const std::array<AlgoEntry, 10> kAlgos{{
    {Algorithm::Classifier, "classifier", {true, false, false, false, false, false}},
    {Algorithm::ClassifierSmote, "classifier-smote", {true, true, false, false, false, false}},
    {Algorithm::Iqs, "iqs", {false, false, false, false, false, false}},
    {Algorithm::IqsSmote, "iqs-smote", {false, true, false, false, false, false}},
    {Algorithm::IqsCsSmote, "iqs-cs-smote", {false, true, true, false, false, false}},
    {Algorithm::MbIqs, "mb-iqs", {false, false, false, true, false, false}},
    {Algorithm::MbIqsSmote, "mb-iqs-smote", {false, true, false, true, false, false}},
    {Algorithm::MbIqsCsSmote, "mb-iqs-cs-smote", {false, true, true, true, false, false}},
    {Algorithm::DoIqs, "do-iqs", {false, false, false, true, true, false}},
    {Algorithm::DoIqsLb, "do-iqs-lb", {false, false, false, true, true, true}},
}};

const AlgoEntry& entry(Algorithm a) {
  for (const auto& e : kAlgos) {
    if (e.algo == a) return e;
  }
  throw std::invalid_argument("unknown algorithm");
}

std::string exact(double v) {
  std::ostringstream os;
  os << std::setprecision(17) << v;
  return os.str();
}

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? "," : "") + std::to_string(v[i]);
  return s;
}

Eigen::MatrixXd columns_of(const std::vector<const StatePoint*>& pts, int dim) {
  Eigen::MatrixXd m = Eigen::MatrixXd::Zero(dim, static_cast<Eigen::Index>(pts.size()));
  for (std::size_t j = 0; j < pts.size(); ++j) {
    if (pts[j]->is_cemetery) continue;
    for (std::size_t r = 0; r < pts[j]->coords.size(); ++r) {
      m(static_cast<Eigen::Index>(r), static_cast<Eigen::Index>(j)) = pts[j]->coords[r];
    }
  }
  return m;
}

ParamRange q_range(const MultiHeadNet& net) { return {0, net.head_range(0).end}; }

// Everything one run owns.
class Run {
 public:
  Run(const TrainConfig& cfg, const TrajectorySet& train) : cfg_(cfg), tr_(traits(cfg.algorithm)), train_(train) {
    state_dim_ = static_cast<int>(train.feature_dim());
    if (state_dim_ == 0) throw std::invalid_argument("train: empty training set");
    const int aug = tr_.augmented ? 1 : 0;
    const int in = state_dim_ + aug;

    pool_ = train.records;
    if (tr_.smote) {
      auto fake = oversample_stops(train, cfg.smote, derive_seed(cfg.seed, 1));
      pool_.insert(pool_.end(), fake.begin(), fake.end());
    }

    NetConfig qc{in, cfg.trunk, {2}};
    if (tr_.model_based && cfg.share_trunk) qc.heads.push_back(in);
    q_ = MultiHeadNet(qc, derive_seed(cfg.seed, 2));
    if (tr_.model_based && !cfg.share_trunk) dyn_ = MultiHeadNet(NetConfig{in, cfg.trunk, {in}}, derive_seed(cfg.seed, 3));
    if (tr_.augmented) g_ = MultiHeadNet(NetConfig{state_dim_, cfg.g_hidden, {1}}, derive_seed(cfg.seed, 4));

    adam_q_ = Adam(q_range(q_));
    if (tr_.model_based) {
      if (dyn_) {
        adam_p_ = Adam({0, dyn_->n_params()});
      } else if (cfg.freeze_trunk_in_dyn_step) {
        adam_p_ = Adam(q_.head_range(1));
      } else {
        adam_p_ = Adam({0, q_.n_params()});
      }
    }
    if (g_) adam_g_ = Adam({0, g_->n_params()});
  }

  std::size_t pool_size() const { return pool_.size(); }

  StopModel model() const {
    StopModel m;
    m.q_net = q_;
    m.gamma = cfg_.gamma;
    if (g_) {
      m.g_net = *g_;
      if (cfg_.zero_g) m.g_net->params().setZero();
    }
    return m;
  }
  const std::optional<MultiHeadNet>& dynamics() const { return dyn_; }

  void run_batch(const std::vector<std::size_t>& idx, int epoch, long batch_no, EpochStats& acc) {
    if (tr_.augmented) {
      augmented_batch(idx, epoch, batch_no, acc);
    } else if (tr_.classifier) {
      classifier_batch(idx, epoch, batch_no, acc);
    } else {
      iqs_batch(idx, epoch, batch_no, acc);
    }
  }

 private:
  double lr(int epoch) const { return exp_schedule(cfg_.lr0, cfg_.lr_decay, epoch); }
  double eps(int epoch) const { return exp_schedule(cfg_.eps0, cfg_.eps_decay, epoch); }

  double weight_of(const TransitionRecord& r, int epoch) const {
    if (!r.synthetic) return 1.0;
    return tr_.confidence ? cfg_.smote.alpha_at(epoch) : 1.0;
  }

  // Dynamics prediction of the (possibly augmented) inputs.
  Eigen::MatrixXd predict_next(const Tape& tape_s, const Eigen::MatrixXd& x) const {
    if (dyn_) return dyn_->forward(x).heads[0];
    return tape_s.heads[1];
  }

  void classifier_batch(const std::vector<std::size_t>& idx, int epoch, long batch_no, EpochStats& acc) {
    std::vector<const StatePoint*> s;
    std::vector<int> a;
    std::vector<double> w;
    for (auto i : idx) {
      s.push_back(&pool_[i].s);
      a.push_back(to_int(pool_[i].a));
      w.push_back(1.0);
    }
    const auto x = columns_of(s, state_dim_);
    const auto tape = q_.forward(x);
    const auto ce = cross_entropy_loss(tape.heads[0], a, w);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q_.n_params());
    q_.backward(tape, {&ce.d_pred}, grad);
    adam_q_.step(q_.params(), grad, lr(epoch), batch_no);
    acc.total += ce.loss;
  }

  // Q step on J (or J_CS), then the dynamics step when configured.
  void iqs_batch(const std::vector<std::size_t>& idx, int epoch, long batch_no, EpochStats& acc) {
    std::vector<const StatePoint*> s, sn;
    std::vector<int> a;
    std::vector<double> w;
    std::vector<char> fake, active;
    for (auto i : idx) {
      const auto& r = pool_[i];
      s.push_back(&r.s);
      sn.push_back(&r.s_next);
      a.push_back(to_int(r.a));
      w.push_back(weight_of(r, epoch));
      fake.push_back(r.synthetic ? 1 : 0);
      active.push_back(r.a == Action::Continue && !r.s_next.is_cemetery ? 1 : 0);
    }
    const auto x = columns_of(s, state_dim_);
    const auto xn_obs = columns_of(sn, state_dim_);
    q_step(x, xn_obs, a, w, fake, epoch, batch_no, acc, nullptr);
    if (tr_.model_based) p_step(x, xn_obs, active, batch_no, epoch, acc);
  }

  // Pre-update outputs needed by the gain target.
  struct PreUpdate {
    Eigen::MatrixXd q_s;
    Eigen::MatrixXd q_pred_next;
  };

  void q_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& xn_obs, const std::vector<int>& a,
              const std::vector<double>& w, const std::vector<char>& fake, int epoch, long batch_no,
              EpochStats& acc, PreUpdate* pre) {
    const auto tape_s = q_.forward(x);
    Eigen::MatrixXd pred;
    if (tr_.model_based) pred = predict_next(tape_s, x);
    const bool use_pred = tr_.model_based && cfg_.successor == SuccessorSource::Predicted;
    const auto tape_n = q_.forward(use_pred ? pred : xn_obs);
    if (pre) {
      pre->q_s = tape_s.heads[0];
      pre->q_pred_next = use_pred ? tape_n.heads[0] : q_.forward(pred).heads[0];
    }
    const IqBatchView view{&tape_s.heads[0], &tape_n.heads[0], a, w};
    const auto l = iq_loss(view, eps(epoch), cfg_.gamma, Chi2Phi{cfg_.c_reg}, fake);
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q_.n_params());
    q_.backward(tape_s, {&l.d_q_s, nullptr}, grad);
    q_.backward(tape_n, {&l.d_q_next, nullptr}, grad);
    adam_q_.step(q_.params(), grad, lr(epoch), batch_no);
    acc.iq_term += l.iq_term;
    acc.value_term += l.value_term;
    acc.fake_term += l.fake_term;
    acc.total += l.loss;
  }

  void p_step(const Eigen::MatrixXd& x, const Eigen::MatrixXd& target, const std::vector<char>& active,
              long batch_no, int epoch, EpochStats& acc) {
    if (!cfg_.dynamics_step) return;
    const std::vector<double> ones(active.size(), 1.0);
    if (dyn_) {
      const auto tape = dyn_->forward(x);
      const auto l = masked_squared_error(tape.heads[0], target, ones, active);
      acc.dyn_loss += l.loss;
      if (std::none_of(active.begin(), active.end(), [](char c) { return c != 0; })) return;
      Eigen::VectorXd grad = Eigen::VectorXd::Zero(dyn_->n_params());
      dyn_->backward(tape, {&l.d_pred}, grad);
      adam_p_.step(dyn_->params(), grad, lr(epoch), batch_no);
      return;
    }
    const auto tape = q_.forward(x);
    const auto l = masked_squared_error(tape.heads[1], target, ones, active);
    acc.dyn_loss += l.loss;
    if (std::none_of(active.begin(), active.end(), [](char c) { return c != 0; })) return;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(q_.n_params());
    q_.backward(tape, {nullptr, &l.d_pred}, grad, !cfg_.freeze_trunk_in_dyn_step);
    adam_p_.step(q_.params(), grad, lr(epoch), batch_no);
  }

  void augmented_batch(const std::vector<std::size_t>& idx, int epoch, long batch_no, EpochStats& acc) {
    const double gamma = cfg_.gamma;
    // Gains along every path touched by the batch, recomputed with the current g.
    std::unordered_map<std::size_t, std::vector<double>> prefix;  // path -> Y_k, k = 0..len
    for (auto i : idx) {
      const std::size_t p = train_.path_of(i);
      if (prefix.count(p)) continue;
      const std::size_t b = train_.offsets[p], e = train_.offsets[p + 1];
      std::vector<const StatePoint*> states;
      for (std::size_t k = b; k < e; ++k) states.push_back(&train_.records[k].s);
      const bool tail = !train_.records[e - 1].s_next.is_cemetery;
      if (tail) states.push_back(&train_.records[e - 1].s_next);
      std::vector<double> y(states.size() + (tail ? 0 : 1), 0.0);
      Eigen::MatrixXd gv = Eigen::MatrixXd::Zero(1, static_cast<Eigen::Index>(states.size()));
      if (!cfg_.zero_g) gv = g_->forward(columns_of(states, state_dim_)).heads[0];
      double run = 0.0;
      for (std::size_t k = 0; k < states.size(); ++k) {
        run = y_update(run, gv(0, static_cast<Eigen::Index>(k)), static_cast<int>(k), gamma);
        y[k] = run;
      }
      // A stopped path's successor is the cemetery with zero gain.
      if (!tail) y.back() = run;
      prefix.emplace(p, std::move(y));
    }

    const auto n = static_cast<Eigen::Index>(idx.size());
    const int in = state_dim_ + 1;
    Eigen::MatrixXd x(in, n), xn(in, n), bare(state_dim_, n);
    Eigen::VectorXd y_minus(n);
    std::vector<int> a;
    std::vector<char> active;
    std::vector<const StatePoint*> s, sn;
    for (auto i : idx) {
      s.push_back(&train_.records[i].s);
      sn.push_back(&train_.records[i].s_next);
    }
    bare = columns_of(s, state_dim_);
    const auto bare_n = columns_of(sn, state_dim_);
    long n_stop = 0, n_cont = 0;
    for (Eigen::Index j = 0; j < n; ++j) {
      const auto i = idx[static_cast<std::size_t>(j)];
      const auto& r = train_.records[i];
      const auto& y = prefix.at(train_.path_of(i));
      const auto t = static_cast<std::size_t>(i - train_.offsets[train_.path_of(i)]);
      x.col(j) << bare.col(j), y[t];
      xn.col(j) << bare_n.col(j), (r.s_next.is_cemetery ? 0.0 : y[t + 1]);
      y_minus[j] = t == 0 ? 0.0 : y[t - 1];
      a.push_back(to_int(r.a));
      const bool cont = r.a == Action::Continue && !r.s_next.is_cemetery;
      active.push_back(cont ? 1 : 0);
      (r.a == Action::Stop ? n_stop : n_cont) += 1;
    }
    // Local bootstrap: stop records repeated until they match the continue count.
    double stop_mult = 1.0;
    if (tr_.local_bootstrap && n_stop > 0 && n_cont > n_stop) {
      stop_mult = static_cast<double>((n_cont + n_stop - 1) / n_stop);
    }
    std::vector<double> w(static_cast<std::size_t>(n));
    for (std::size_t j = 0; j < w.size(); ++j) w[j] = a[j] == 0 ? stop_mult : 1.0;
    const std::vector<char> fake(static_cast<std::size_t>(n), 0);

    PreUpdate pre;
    q_step(x, xn, a, w, fake, epoch, batch_no, acc, &pre);
    p_step(x, xn, active, batch_no, epoch, acc);

    if (cfg_.zero_g || !cfg_.train_g) return;
    Eigen::VectorXd v_next;
    soft_values(pre.q_pred_next, eps(epoch), v_next);
    Eigen::MatrixXd target(1, n);
    for (Eigen::Index j = 0; j < n; ++j) target(0, j) = gain_target(pre.q_s(1, j), v_next[j], y_minus[j], gamma);
    const auto tape = g_->forward(bare);
    const std::vector<double> ones(static_cast<std::size_t>(n), 1.0);
    const std::vector<char> all(static_cast<std::size_t>(n), 1);
    const auto l = masked_squared_error(tape.heads[0], target, ones, all);
    acc.g_loss += l.loss;
    Eigen::VectorXd grad = Eigen::VectorXd::Zero(g_->n_params());
    g_->backward(tape, {&l.d_pred}, grad);
    adam_g_.step(g_->params(), grad, lr(epoch), batch_no);
  }

 private:
  const TrainConfig& cfg_;
  AlgorithmTraits tr_;
  const TrajectorySet& train_;
  int state_dim_ = 0;
  std::vector<TransitionRecord> pool_;
  MultiHeadNet q_;
  std::optional<MultiHeadNet> dyn_;
  std::optional<MultiHeadNet> g_;
  Adam adam_q_, adam_p_, adam_g_;
};

}  // namespace

std::string_view algorithm_name(Algorithm a) { return entry(a).tag; }

Algorithm parse_algorithm(std::string_view tag) {
  for (const auto& e : kAlgos) {
    if (e.tag == tag) return e.algo;
  }
  throw std::invalid_argument("unknown algorithm '" + std::string(tag) + "'");
}

const std::vector<Algorithm>& all_algorithms() {
  static const std::vector<Algorithm> v = [] {
    std::vector<Algorithm> out;
    for (const auto& e : kAlgos) out.push_back(e.algo);
    return out;
  }();
  return v;
}

AlgorithmTraits traits(Algorithm a) { return entry(a).traits; }

void TrainConfig::validate() const {
  if (!(gamma > 0.0 && gamma < 1.0)) throw std::invalid_argument("gamma must lie in (0,1)");
  if (!(eps0 > 0.0)) throw std::invalid_argument("eps0 must be positive");
  if (!(lr0 > 0.0)) throw std::invalid_argument("lr0 must be positive");
  if (!(c_reg > 0.0)) throw std::invalid_argument("c_reg must be positive");
  if (epochs < 0) throw std::invalid_argument("epochs must be >= 0");
  if (batch_size == 0) throw std::invalid_argument("batch size must be positive");
  if (trunk.empty()) throw std::invalid_argument("trunk needs at least one layer");
  smote.validate();
  (void)entry(algorithm);
}

double gain_target(double q_continue, double v_next, double y_prev, double gamma) {
  return q_continue - gamma * v_next - y_prev;
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream) {
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL * (stream + 1);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

Checkpoint TrainResult::checkpoint(const TrainConfig& cfg) const {
  Checkpoint ck;
  ck.meta["algorithm"] = std::string(algorithm_name(cfg.algorithm));
  ck.meta["gamma"] = exact(cfg.gamma);
  ck.meta["seed"] = std::to_string(cfg.seed);
  ck.meta["epochs"] = std::to_string(cfg.epochs);
  ck.meta["best_epoch"] = std::to_string(best_epoch);
  ck.meta["eps0"] = exact(cfg.eps0);
  ck.meta["eps_decay"] = exact(cfg.eps_decay);
  ck.meta["lr0"] = exact(cfg.lr0);
  ck.meta["lr_decay"] = exact(cfg.lr_decay);
  ck.meta["trunk"] = join_ints(cfg.trunk);
  ck.meta["diverged"] = diverged ? "1" : "0";
  ck.nets.push_back({"q", best_model.q_net});
  if (best_model.g_net) ck.nets.push_back({"g", *best_model.g_net});
  if (best_dynamics) ck.nets.push_back({"dyn", *best_dynamics});
  return ck;
}

StopModel model_from_checkpoint(const Checkpoint& ck) {
  StopModel m;
  m.q_net = ck.net("q");
  if (ck.has("g")) m.g_net = ck.net("g");
  const auto it = ck.meta.find("gamma");
  if (it != ck.meta.end()) m.gamma = std::stod(it->second);
  return m;
}

TrainResult train(const TrainConfig& cfg, const TrajectorySet& train_set, const std::vector<EvalPath>& val) {
  cfg.validate();
  Run run(cfg, train_set);
  TrainResult res;
  res.best_model = run.model();
  res.best_dynamics = run.dynamics();

  BatchSampler sampler(run.pool_size(), cfg.batch_size, derive_seed(cfg.seed, 5));
  long batch_no = 0;
  for (int e = 0; e < cfg.epochs; ++e) {
    EpochStats st;
    st.epoch = e;
    st.lr = exp_schedule(cfg.lr0, cfg.lr_decay, e);
    st.eps = exp_schedule(cfg.eps0, cfg.eps_decay, e);
    st.alpha = traits(cfg.algorithm).confidence ? cfg.smote.alpha_at(e) : 1.0;
    const auto batches = sampler.epoch();
    try {
      for (const auto& b : batches) run.run_batch(b, e, batch_no++, st);
    } catch (const TrainingDivergence& ex) {
      res.diverged = true;
      res.error = ex.what();
      return res;
    }
    const double nb = static_cast<double>(batches.size());
    st.iq_term /= nb;
    st.value_term /= nb;
    st.fake_term /= nb;
    st.dyn_loss /= nb;
    st.g_loss /= nb;
    st.total /= nb;

    auto model = run.model();
    st.val_ba = val.empty() ? 0.0 : evaluate(model, val).balanced_accuracy;
    res.curves.push_back(st);
    if (st.val_ba > res.best_val_ba) {
      res.best_val_ba = st.val_ba;
      res.best_epoch = e;
      res.best_model = std::move(model);
      res.best_dynamics = run.dynamics();
    }
  }
  return res;
}

void write_curves_csv(std::ostream& os, const std::vector<EpochStats>& curves) {
  os << "epoch,iq_term,value_term,fake_term,dyn_loss,g_loss,total,val_ba,lr,eps,alpha\n";
  os.precision(17);
  for (const auto& c : curves) {
    os << c.epoch << ',' << c.iq_term << ',' << c.value_term << ',' << c.fake_term << ',' << c.dyn_loss << ','
       << c.g_loss << ',' << c.total << ',' << c.val_ba << ',' << c.lr << ',' << c.eps << ',' << c.alpha << '\n';
  }
}

}  // namespace stoplab
