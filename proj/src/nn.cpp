#include "stoplab/nn.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <random>
#include <sstream>

namespace stoplab {

namespace {

std::string join_ints(const std::vector<int>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) {
    if (i) s += ',';
    s += std::to_string(v[i]);
  }
  return s.empty() ? "-" : s;
}

std::vector<int> split_ints(const std::string& s) {
  std::vector<int> out;
  if (s == "-" || s.empty()) return out;
  std::istringstream ss(s);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(std::stoi(item));
  return out;
}

}  // namespace

std::string NetConfig::describe() const {
  return "input=" + std::to_string(input_dim) + " trunk=" + join_ints(trunk) + " heads=" + join_ints(heads);
}

NetConfig NetConfig::parse(const std::string& text) {
  NetConfig cfg;
  std::istringstream ss(text);
  std::string tok;
  bool seen_input = false, seen_heads = false;
  while (ss >> tok) {
    const auto eq = tok.find('=');
    if (eq == std::string::npos) throw std::runtime_error("net config: malformed token '" + tok + "'");
    const auto key = tok.substr(0, eq), val = tok.substr(eq + 1);
    if (key == "input") {
      cfg.input_dim = std::stoi(val);
      seen_input = true;
    } else if (key == "trunk") {
      cfg.trunk = split_ints(val);
    } else if (key == "heads") {
      cfg.heads = split_ints(val);
      seen_heads = true;
    } else {
      throw std::runtime_error("net config: unknown key '" + key + "'");
    }
  }
  if (!seen_input || !seen_heads) throw std::runtime_error("net config: input and heads are required");
  return cfg;
}

void MultiHeadNet::build_layout() {
  if (cfg_.input_dim < 1) throw std::invalid_argument("network input width must be positive");
  if (cfg_.heads.empty()) throw std::invalid_argument("network needs at least one head");
  layers_.clear();
  Eigen::Index off = 0;
  int in = cfg_.input_dim;
  auto add = [&](int i, int o) {
    if (o < 1) throw std::invalid_argument("layer widths must be positive");
    Layer l{i, o, off, off + static_cast<Eigen::Index>(i) * o};
    off = l.b_off + o;
    layers_.push_back(l);
  };
  for (int w : cfg_.trunk) {
    add(in, w);
    in = w;
  }
  for (int h : cfg_.heads) add(in, h);
  params_ = Eigen::VectorXd::Zero(off);
}

MultiHeadNet::MultiHeadNet(NetConfig cfg) : cfg_(std::move(cfg)) { build_layout(); }

MultiHeadNet::MultiHeadNet(NetConfig cfg, std::uint64_t seed) : cfg_(std::move(cfg)) {
  build_layout();
  std::mt19937_64 rng(seed);
  for (std::size_t l = 0; l < layers_.size(); ++l) {
    const double limit = std::sqrt(6.0 / layers_[l].in);
    std::uniform_real_distribution<double> u(-limit, limit);
    auto w = weight(l);
    for (Eigen::Index j = 0; j < w.cols(); ++j) {
      for (Eigen::Index i = 0; i < w.rows(); ++i) w(i, j) = u(rng);
    }
  }
}

ParamRange MultiHeadNet::trunk_range() const {
  const auto n_trunk = cfg_.trunk.size();
  return {0, n_trunk == 0 ? 0 : layers_[n_trunk - 1].b_off + layers_[n_trunk - 1].out};
}

ParamRange MultiHeadNet::head_range(std::size_t head) const {
  const auto& l = layers_.at(cfg_.trunk.size() + head);
  return {l.w_off, l.b_off + l.out};
}

Eigen::Map<const Eigen::MatrixXd> MultiHeadNet::weight(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.w_off, l.out, l.in};
}
Eigen::Map<Eigen::MatrixXd> MultiHeadNet::weight(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.w_off, l.out, l.in};
}
Eigen::Map<const Eigen::VectorXd> MultiHeadNet::bias(std::size_t layer) const {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.b_off, l.out};
}
Eigen::Map<Eigen::VectorXd> MultiHeadNet::bias(std::size_t layer) {
  const auto& l = layers_.at(layer);
  return {params_.data() + l.b_off, l.out};
}

Tape MultiHeadNet::forward(const Eigen::MatrixXd& x) const {
  if (x.rows() != cfg_.input_dim) {
    throw std::invalid_argument("forward: input has " + std::to_string(x.rows()) + " rows, network expects " +
                                std::to_string(cfg_.input_dim));
  }
  Tape tape;
  tape.input = x;
  const std::size_t n_trunk = cfg_.trunk.size();
  tape.hidden.reserve(n_trunk);
  for (std::size_t l = 0; l < n_trunk; ++l) {
    const auto& prev = l == 0 ? tape.input : tape.hidden.back();
    Eigen::MatrixXd z = weight(l) * prev;
    z.colwise() += bias(l);
    tape.hidden.push_back(z.cwiseMax(0.0));
  }
  const auto& feat = tape.features();
  for (std::size_t h = 0; h < cfg_.heads.size(); ++h) {
    Eigen::MatrixXd out = weight(n_trunk + h) * feat;
    out.colwise() += bias(n_trunk + h);
    tape.heads.push_back(std::move(out));
  }
  return tape;
}

std::vector<Eigen::VectorXd> MultiHeadNet::forward_one(const Eigen::VectorXd& x) const {
  const Tape t = forward(Eigen::MatrixXd(x));
  std::vector<Eigen::VectorXd> out;
  for (const auto& h : t.heads) out.emplace_back(h.col(0));
  return out;
}

void MultiHeadNet::backward(const Tape& tape, const std::vector<const Eigen::MatrixXd*>& head_grads,
                            Eigen::VectorXd& grad, bool train_trunk) const {
  if (grad.size() != params_.size()) throw std::invalid_argument("backward: gradient vector has the wrong size");
  const std::size_t n_trunk = cfg_.trunk.size();
  const auto& feat = tape.features();
  Eigen::MatrixXd dfeat = Eigen::MatrixXd::Zero(feat.rows(), feat.cols());
  bool any = false;
  for (std::size_t h = 0; h < cfg_.heads.size() && h < head_grads.size(); ++h) {
    const Eigen::MatrixXd* dh = head_grads[h];
    if (dh == nullptr) continue;
    any = true;
    const auto& l = layers_[n_trunk + h];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + l.w_off, l.out, l.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + l.b_off, l.out);
    gw.noalias() += (*dh) * feat.transpose();
    gb += dh->rowwise().sum();
    if (train_trunk && n_trunk > 0) dfeat.noalias() += weight(n_trunk + h).transpose() * (*dh);
  }
  if (!any || !train_trunk) return;
  for (std::size_t l = n_trunk; l-- > 0;) {
    const Eigen::MatrixXd dz = dfeat.cwiseProduct((tape.hidden[l].array() > 0.0).cast<double>().matrix());
    const auto& prev = l == 0 ? tape.input : tape.hidden[l - 1];
    const auto& lay = layers_[l];
    Eigen::Map<Eigen::MatrixXd> gw(grad.data() + lay.w_off, lay.out, lay.in);
    Eigen::Map<Eigen::VectorXd> gb(grad.data() + lay.b_off, lay.out);
    gw.noalias() += dz * prev.transpose();
    gb += dz.rowwise().sum();
    if (l > 0) dfeat = weight(l).transpose() * dz;
  }
}

Adam::Adam(ParamRange range, double beta1, double beta2, double eps)
    : range_(range),
      beta1_(beta1),
      beta2_(beta2),
      eps_(eps),
      m_(Eigen::VectorXd::Zero(range.size())),
      v_(Eigen::VectorXd::Zero(range.size())) {}

void Adam::step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr, long batch_index) {
  const auto g = grad.segment(range_.begin, range_.size());
  if (!g.allFinite()) throw TrainingDivergence("non-finite gradient", batch_index);
  ++t_;
  m_ = beta1_ * m_ + (1.0 - beta1_) * g;
  v_ = beta2_ * v_ + (1.0 - beta2_) * g.cwiseProduct(g);
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
  auto p = params.segment(range_.begin, range_.size());
  p.array() -= lr * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  if (!p.allFinite()) throw TrainingDivergence("non-finite parameter after update", batch_index);
}

double exp_schedule(double base, double factor, int epoch) { return base * std::pow(factor, epoch); }

// ---------------------------------------------------------------------------

const MultiHeadNet& Checkpoint::net(const std::string& name) const {
  for (const auto& n : nets) {
    if (n.name == name) return n.net;
  }
  throw std::out_of_range("checkpoint has no network '" + name + "'");
}

bool Checkpoint::has(const std::string& name) const {
  for (const auto& n : nets) {
    if (n.name == name) return true;
  }
  return false;
}

namespace {

constexpr const char* kMagic = "STOPLAB-CHECKPOINT 1";

void put_le_double(std::ostream& os, double v) {
  auto bits = std::bit_cast<std::uint64_t>(v);
  char buf[8];
  for (int i = 0; i < 8; ++i) {
    buf[i] = static_cast<char>(bits & 0xffu);
    bits >>= 8;
  }
  os.write(buf, 8);
}

double get_le_double(std::istream& is) {
  unsigned char buf[8];
  is.read(reinterpret_cast<char*>(buf), 8);
  if (!is) throw std::runtime_error("checkpoint: truncated parameter block");
  std::uint64_t bits = 0;
  for (int i = 7; i >= 0; --i) bits = (bits << 8) | buf[i];
  return std::bit_cast<double>(bits);
}

}  // namespace

void write_checkpoint(std::ostream& os, const Checkpoint& ck) {
  os << kMagic << '\n';
  for (const auto& [k, v] : ck.meta) {
    if (k.find_first_of(" \n") != std::string::npos || v.find('\n') != std::string::npos) {
      throw std::invalid_argument("checkpoint meta keys must not contain spaces or newlines");
    }
    os << "meta " << k << ' ' << v << '\n';
  }
  for (const auto& n : ck.nets) {
    os << "net " << n.name << ' ' << n.net.n_params() << ' ' << n.net.config().describe() << '\n';
  }
  os << "end\n";
  for (const auto& n : ck.nets) {
    for (Eigen::Index i = 0; i < n.net.n_params(); ++i) put_le_double(os, n.net.params()[i]);
  }
}

Checkpoint read_checkpoint(std::istream& is) {
  std::string line;
  if (!std::getline(is, line) || line != kMagic) throw std::runtime_error("checkpoint: bad magic line");
  Checkpoint ck;
  std::vector<Eigen::Index> counts;
  while (std::getline(is, line)) {
    if (line == "end") break;
    std::istringstream ss(line);
    std::string kind;
    ss >> kind;
    if (kind == "meta") {
      std::string key, value;
      ss >> key;
      std::getline(ss, value);
      if (!value.empty() && value.front() == ' ') value.erase(0, 1);
      ck.meta[key] = value;
    } else if (kind == "net") {
      std::string name;
      Eigen::Index count = 0;
      ss >> name >> count;
      std::string rest;
      std::getline(ss, rest);
      NamedNet nn{name, MultiHeadNet(NetConfig::parse(rest))};
      if (nn.net.n_params() != count) throw std::runtime_error("checkpoint: parameter count mismatch for " + name);
      counts.push_back(count);
      ck.nets.push_back(std::move(nn));
    } else {
      throw std::runtime_error("checkpoint: unexpected header line '" + line + "'");
    }
  }
  if (line != "end") throw std::runtime_error("checkpoint: header not terminated");
  for (auto& n : ck.nets) {
    for (Eigen::Index i = 0; i < n.net.n_params(); ++i) n.net.params()[i] = get_le_double(is);
  }
  return ck;
}

void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck) {
  std::ofstream out(file, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint " + file.string());
  write_checkpoint(out, ck);
}

Checkpoint load_checkpoint(const std::filesystem::path& file) {
  std::ifstream in(file, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint " + file.string());
  return read_checkpoint(in);
}

}  // namespace stoplab
