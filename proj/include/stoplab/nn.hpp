#pragma once

// Small multi-head feed-forward networks with hand-written reverse mode,
// Adam, exponential schedules and a checkpoint container.

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Dense>

namespace stoplab {

/// Thrown when a gradient or parameter stops being finite.
class TrainingDivergence : public std::runtime_error {
 public:
  TrainingDivergence(const std::string& what, long batch_index)
      : std::runtime_error(what + " (batch " + std::to_string(batch_index) + ")"), batch_(batch_index) {}
  long batch_index() const { return batch_; }

 private:
  long batch_;
};

struct NetConfig {
  int input_dim = 2;
  std::vector<int> trunk{64, 64};  // ReLU hidden layers; may be empty
  std::vector<int> heads{2};       // linear heads read from the last trunk layer

  bool operator==(const NetConfig&) const = default;
  std::string describe() const;
  static NetConfig parse(const std::string& text);
};

/// Index range [begin, end) into the flat parameter vector.
struct ParamRange {
  Eigen::Index begin = 0;
  Eigen::Index end = 0;
  Eigen::Index size() const { return end - begin; }
};

/// Cached activations of one batched forward pass. Columns are samples.
struct Tape {
  Eigen::MatrixXd input;
  std::vector<Eigen::MatrixXd> hidden;  // post-ReLU activations per trunk layer
  std::vector<Eigen::MatrixXd> heads;

  const Eigen::MatrixXd& features() const { return hidden.empty() ? input : hidden.back(); }
};

/// Trunk MLP with several linear heads. Head 0 of a Q network is (Q(s,stop),
/// Q(s,continue)); head 1, when present, is the next-state prediction.
class MultiHeadNet {
 public:
  MultiHeadNet() = default;
  /// He-uniform weights drawn from `seed`, zero biases.
  MultiHeadNet(NetConfig cfg, std::uint64_t seed);
  /// Zero-initialised parameters.
  explicit MultiHeadNet(NetConfig cfg);

  const NetConfig& config() const { return cfg_; }
  Eigen::Index n_params() const { return params_.size(); }
  Eigen::VectorXd& params() { return params_; }
  const Eigen::VectorXd& params() const { return params_; }

  ParamRange trunk_range() const;
  ParamRange head_range(std::size_t head) const;
  std::size_t n_heads() const { return cfg_.heads.size(); }

  /// x is input_dim x batch. Throws std::invalid_argument on a width mismatch.
  Tape forward(const Eigen::MatrixXd& x) const;
  /// Single-sample convenience: returns the concatenated head outputs.
  std::vector<Eigen::VectorXd> forward_one(const Eigen::VectorXd& x) const;

  /// Accumulates d(loss)/d(params) into grad given d(loss)/d(head) matrices
  /// (null for heads that do not feed the loss). With train_trunk false the
  /// trunk gradient is left untouched.
  void backward(const Tape& tape, const std::vector<const Eigen::MatrixXd*>& head_grads, Eigen::VectorXd& grad,
                bool train_trunk = true) const;

  Eigen::Map<const Eigen::MatrixXd> weight(std::size_t layer) const;
  Eigen::Map<Eigen::MatrixXd> weight(std::size_t layer);
  Eigen::Map<const Eigen::VectorXd> bias(std::size_t layer) const;
  Eigen::Map<Eigen::VectorXd> bias(std::size_t layer);
  /// Layers are the trunk layers followed by one layer per head.
  std::size_t n_layers() const { return layers_.size(); }

 private:
  struct Layer {
    int in = 0;
    int out = 0;
    Eigen::Index w_off = 0;
    Eigen::Index b_off = 0;
  };
  void build_layout();

  NetConfig cfg_;
  std::vector<Layer> layers_;
  Eigen::VectorXd params_;
};

/// Adam over one range of a parameter vector; other entries are not touched.
class Adam {
 public:
  Adam() = default;
  Adam(ParamRange range, double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8);

  /// Throws TrainingDivergence if grad has a non-finite entry in range.
  void step(Eigen::VectorXd& params, const Eigen::VectorXd& grad, double lr, long batch_index = -1);

  long steps() const { return t_; }
  ParamRange range() const { return range_; }
  const Eigen::VectorXd& first_moment() const { return m_; }
  const Eigen::VectorXd& second_moment() const { return v_; }

 private:
  ParamRange range_;
  double beta1_ = 0.9, beta2_ = 0.999, eps_ = 1e-8;
  long t_ = 0;
  Eigen::VectorXd m_, v_;
};

/// base * factor^epoch; shared by learning rate, temperature and confidence.
double exp_schedule(double base, double factor, int epoch);

struct NamedNet {
  std::string name;
  MultiHeadNet net;
};

/// Text header of key/value pairs and architectures, then the raw parameters
/// as little-endian 64-bit floats. Layout is documented in docs/checkpoint.md.
struct Checkpoint {
  std::map<std::string, std::string> meta;
  std::vector<NamedNet> nets;

  const MultiHeadNet& net(const std::string& name) const;
  bool has(const std::string& name) const;
};

void write_checkpoint(std::ostream& os, const Checkpoint& ck);
Checkpoint read_checkpoint(std::istream& is);
void save_checkpoint(const std::filesystem::path& file, const Checkpoint& ck);
Checkpoint load_checkpoint(const std::filesystem::path& file);

}  // namespace stoplab
