#pragma once

// Feed-forward Q-network: input -> hidden layers (leaky ReLU) -> either a
// dueling head (advantage[M] + value[1], q = V + A - mean(A)) or a plain
// linear head (q = A). Exact backpropagation of the squared TD error, plain
// SGD, and soft target blending.
//
// Checkpoint layout (little-endian):
//   char[8]  "WNCSQNET"
//   u32      version (1)
//   u32      head (0 = dueling, 1 = plain)
//   u32      activation (0 = leaky ReLU, 1 = ReLU)
//   f64      leaky slope
//   u32      tensor count T
//   T times: u32 rows, u32 cols, rows*cols f64 in row-major order
// Tensor order: W,b for each hidden layer, then advantage W,b, then value W,b
// (dueling only). Biases are stored as rows x 1.

#include <Eigen/Dense>
#include <array>
#include <bit>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <functional>
#include <istream>
#include <ostream>
#include <random>
#include <span>
#include <string>
#include <type_traits>
#include <vector>

#include "wncs/errors.hpp"
#include "wncs/rng.hpp"

namespace wncs::nn {

static_assert(std::endian::native == std::endian::little, "checkpoint I/O assumes little-endian");

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

enum class HeadKind : std::uint32_t { dueling = 0, plain = 1 };
enum class Activation : std::uint32_t { leaky_relu = 0, relu = 1 };

struct DenseLayer {
  Matrix w;  // out x in
  Vector b;  // out
};

struct NetworkParams {
  std::vector<DenseLayer> hidden;
  DenseLayer advantage;
  DenseLayer value;  // empty for the plain head

  /// Visits every tensor in checkpoint order.
  template <class Self, class F>
  static void for_each(Self& self, F&& f) {
    for (auto& l : self.hidden) {
      f(l.w);
      f(l.b);
    }
    f(self.advantage.w);
    f(self.advantage.b);
    if (self.value.w.size() > 0) {
      f(self.value.w);
      f(self.value.b);
    }
  }
  template <class F>
  void for_each(F&& f) { for_each(*this, std::forward<F>(f)); }
  template <class F>
  void for_each(F&& f) const { for_each(*this, std::forward<F>(f)); }

  std::size_t parameter_count() const {
    std::size_t n = 0;
    for_each([&](const auto& t) { n += static_cast<std::size_t>(t.size()); });
    return n;
  }

  NetworkParams zeros_like() const {
    NetworkParams z = *this;
    z.for_each([](auto& t) { t.setZero(); });
    return z;
  }

  bool all_finite() const {
    bool ok = true;
    for_each([&](const auto& t) { ok = ok && t.allFinite(); });
    return ok;
  }
};

struct NetworkSpec {
  std::vector<int> layer_sizes;  // input, hidden...
  int n_actions = 200;
  HeadKind head = HeadKind::dueling;
  Activation activation = Activation::leaky_relu;
  double leaky_slope = 0.01;

  /// input -> 32 -> 64 -> 300 -> head.
  static NetworkSpec standard(int input, int n_actions, HeadKind head = HeadKind::dueling) {
    return NetworkSpec{{input, 32, 64, 300}, n_actions, head, Activation::leaky_relu, 0.01};
  }
};

/// Activations kept by a batch forward pass for backpropagation.
struct ForwardCache {
  std::vector<Matrix> inputs;  // input to each hidden layer, then to the heads
  std::vector<Matrix> pre;     // hidden pre-activations
  Matrix q;
};

struct BackwardResult {
  NetworkParams grad;
  double loss = 0.0;
};

class QNetwork {
 public:
  QNetwork() = default;

  explicit QNetwork(NetworkSpec spec) : spec_(std::move(spec)) {
    if (spec_.layer_sizes.size() < 2) throw ContractError("QNetwork: need input and >= 1 hidden layer");
    for (std::size_t l = 1; l < spec_.layer_sizes.size(); ++l)
      params_.hidden.push_back({Matrix::Zero(spec_.layer_sizes[l], spec_.layer_sizes[l - 1]),
                                Vector::Zero(spec_.layer_sizes[l])});
    const int last = spec_.layer_sizes.back();
    params_.advantage = {Matrix::Zero(spec_.n_actions, last), Vector::Zero(spec_.n_actions)};
    if (spec_.head == HeadKind::dueling) params_.value = {Matrix::Zero(1, last), Vector::Zero(1)};
  }

  /// Weights ~ U(-sqrt(6/fan_in), +sqrt(6/fan_in)), biases zero.
  void init(rng::Engine& eng) {
    params_.for_each([&](auto& t) {
      if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Vector>) {
        t.setZero();
        return;
      }
      const double bound = std::sqrt(6.0 / static_cast<double>(t.cols()));
      std::uniform_real_distribution<double> u(-bound, bound);
      for (Eigen::Index r = 0; r < t.rows(); ++r)
        for (Eigen::Index c = 0; c < t.cols(); ++c) t(r, c) = u(eng);
    });
  }

  const NetworkSpec& spec() const { return spec_; }
  NetworkParams& params() { return params_; }
  const NetworkParams& params() const { return params_; }
  int input_size() const { return spec_.layer_sizes.front(); }
  int n_actions() const { return spec_.n_actions; }

  /// Batch forward; columns of `x` are samples. Returns q (actions x batch).
  Matrix forward(const Matrix& x, ForwardCache* cache = nullptr) const {
    if (x.rows() != input_size()) throw ContractError("forward: input size mismatch");
    Matrix a = x;
    if (cache) {
      cache->inputs.clear();
      cache->pre.clear();
    }
    for (const auto& layer : params_.hidden) {
      if (cache) cache->inputs.push_back(a);
      Matrix z = (layer.w * a).colwise() + layer.b;
      if (cache) cache->pre.push_back(z);
      a = activate(z);
    }
    if (cache) cache->inputs.push_back(a);
    Matrix q = (params_.advantage.w * a).colwise() + params_.advantage.b;
    if (spec_.head == HeadKind::dueling) {
      const Eigen::RowVectorXd v =
          (params_.value.w * a).colwise() + params_.value.b;  // 1 x batch
      const Eigen::RowVectorXd mean = q.colwise().mean();
      q.rowwise() += v - mean;
    }
    if (cache) cache->q = q;
    return q;
  }

  std::vector<double> forward(std::span<const double> x) const {
    const Matrix q = forward(Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1));
    return {q.data(), q.data() + q.size()};
  }

  /// Gradient of sum_b (y_b - q[a_b, b])^2 with respect to every parameter.
  /// `actions` are 0-based output indices.
  BackwardResult backward(const ForwardCache& cache, std::span<const int> actions,
                          std::span<const double> targets) const {
    const Eigen::Index batch = cache.q.cols();
    if (static_cast<Eigen::Index>(actions.size()) != batch ||
        static_cast<Eigen::Index>(targets.size()) != batch)
      throw ContractError("backward: actions/targets must match the batch");

    BackwardResult out;
    out.grad = params_.zeros_like();
    Matrix dq = Matrix::Zero(cache.q.rows(), batch);
    for (Eigen::Index b = 0; b < batch; ++b) {
      const int a = actions[static_cast<std::size_t>(b)];
      if (a < 0 || a >= n_actions()) throw ContractError("backward: action index out of range");
      const double err = cache.q(a, b) - targets[static_cast<std::size_t>(b)];
      out.loss += err * err;
      dq(a, b) = 2.0 * err;
    }

    const Matrix& top = cache.inputs.back();
    Matrix d_adv = dq;
    if (spec_.head == HeadKind::dueling) {
      const Eigen::RowVectorXd dv = dq.colwise().sum();
      d_adv.rowwise() -= dq.colwise().mean();
      out.grad.value.w = dv * top.transpose();
      out.grad.value.b = Vector::Constant(1, dv.sum());
    }
    out.grad.advantage.w = d_adv * top.transpose();
    out.grad.advantage.b = d_adv.rowwise().sum();

    Matrix da = params_.advantage.w.transpose() * d_adv;
    if (spec_.head == HeadKind::dueling)
      da += params_.value.w.transpose() * dq.colwise().sum();

    for (std::size_t l = params_.hidden.size(); l-- > 0;) {
      const Matrix dz = da.cwiseProduct(activate_grad(cache.pre[l]));
      out.grad.hidden[l].w = dz * cache.inputs[l].transpose();
      out.grad.hidden[l].b = dz.rowwise().sum();
      if (l > 0) da = params_.hidden[l].w.transpose() * dz;
    }
    return out;
  }

  /// Single-sample convenience wrapper.
  BackwardResult backward(std::span<const double> x, int action, double target) const {
    ForwardCache cache;
    forward(Eigen::Map<const Matrix>(x.data(), static_cast<Eigen::Index>(x.size()), 1), &cache);
    const std::array<int, 1> a{action};
    const std::array<double, 1> y{target};
    return backward(cache, a, y);
  }

  void save(std::ostream& os) const;
  static QNetwork load(std::istream& is);

 private:
  double slope() const { return spec_.activation == Activation::leaky_relu ? spec_.leaky_slope : 0.0; }

  Matrix activate(const Matrix& z) const {
    const double s = slope();
    return z.unaryExpr([s](double v) { return v > 0.0 ? v : s * v; });
  }
  Matrix activate_grad(const Matrix& z) const {
    const double s = slope();
    return z.unaryExpr([s](double v) { return v > 0.0 ? 1.0 : s; });
  }

  NetworkSpec spec_;
  NetworkParams params_;
};

/// theta <- theta - lr * grad.
inline void sgd_step(NetworkParams& params, const NetworkParams& grad, double lr) {
  std::vector<const Eigen::MatrixXd*> gm;
  std::vector<const Eigen::VectorXd*> gv;
  grad.for_each([&](const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>) gm.push_back(&t);
    else gv.push_back(&t);
  });
  std::size_t im = 0, iv = 0;
  params.for_each([&](auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>) {
      if (gm.at(im)->rows() != t.rows() || gm.at(im)->cols() != t.cols())
        throw ContractError("sgd_step: shape mismatch");
      t -= lr * *gm[im++];
    } else {
      if (gv.at(iv)->size() != t.size()) throw ContractError("sgd_step: shape mismatch");
      t -= lr * *gv[iv++];
    }
  });
  if (im != gm.size() || iv != gv.size()) throw ContractError("sgd_step: tensor count mismatch");
}

/// target <- rate * train + (1 - rate) * target.
inline void soft_update(NetworkParams& target, const NetworkParams& train, double rate) {
  std::vector<const Matrix*> sm;
  std::vector<const Vector*> sv;
  train.for_each([&](const auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>) sm.push_back(&t);
    else sv.push_back(&t);
  });
  std::size_t im = 0, iv = 0;
  target.for_each([&](auto& t) {
    if constexpr (std::is_same_v<std::decay_t<decltype(t)>, Matrix>) {
      if (im >= sm.size() || sm[im]->rows() != t.rows() || sm[im]->cols() != t.cols())
        throw ContractError("soft_update: shape mismatch");
      t = rate * *sm[im++] + (1.0 - rate) * t;
    } else {
      if (iv >= sv.size() || sv[iv]->size() != t.size())
        throw ContractError("soft_update: shape mismatch");
      t = rate * *sv[iv++] + (1.0 - rate) * t;
    }
  });
  if (im != sm.size() || iv != sv.size()) throw ContractError("soft_update: tensor count mismatch");
}

/// Euclidean norm of the difference of two parameter sets.
inline double distance(const NetworkParams& a, const NetworkParams& b) {
  std::vector<double> da, db;
  a.for_each([&](const auto& t) { da.insert(da.end(), t.data(), t.data() + t.size()); });
  b.for_each([&](const auto& t) { db.insert(db.end(), t.data(), t.data() + t.size()); });
  if (da.size() != db.size()) throw ContractError("distance: shape mismatch");
  double s = 0.0;
  for (std::size_t i = 0; i < da.size(); ++i) s += (da[i] - db[i]) * (da[i] - db[i]);
  return std::sqrt(s);
}

/// FNV-1a over the raw parameter bytes; stable for identical parameters.
inline std::uint64_t checksum(const NetworkParams& p) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  p.for_each([&](const auto& t) {
    const auto* bytes = reinterpret_cast<const unsigned char*>(t.data());
    for (std::size_t i = 0; i < static_cast<std::size_t>(t.size()) * sizeof(double); ++i) {
      h ^= bytes[i];
      h *= 0x100000001b3ULL;
    }
  });
  return h;
}

namespace detail {
inline constexpr char kMagic[8] = {'W', 'N', 'C', 'S', 'Q', 'N', 'E', 'T'};

template <class T>
void put(std::ostream& os, T v) {
  os.write(reinterpret_cast<const char*>(&v), sizeof(T));
}
template <class T>
T get(std::istream& is) {
  T v{};
  if (!is.read(reinterpret_cast<char*>(&v), sizeof(T))) throw ContractError("checkpoint: truncated");
  return v;
}
}  // namespace detail

inline void QNetwork::save(std::ostream& os) const {
  os.write(detail::kMagic, sizeof detail::kMagic);
  detail::put<std::uint32_t>(os, 1);
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(spec_.head));
  detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(spec_.activation));
  detail::put<double>(os, spec_.leaky_slope);
  std::uint32_t count = 0;
  params_.for_each([&](const auto&) { ++count; });
  detail::put<std::uint32_t>(os, count);
  params_.for_each([&](const auto& t) {
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.rows()));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(t.cols()));
    for (Eigen::Index r = 0; r < t.rows(); ++r)
      for (Eigen::Index c = 0; c < t.cols(); ++c) detail::put<double>(os, t(r, c));
  });
}

inline QNetwork QNetwork::load(std::istream& is) {
  char magic[8];
  if (!is.read(magic, sizeof magic) || std::memcmp(magic, detail::kMagic, sizeof magic) != 0)
    throw ContractError("checkpoint: bad magic");
  if (detail::get<std::uint32_t>(is) != 1) throw ContractError("checkpoint: unsupported version");
  NetworkSpec spec;
  spec.head = static_cast<HeadKind>(detail::get<std::uint32_t>(is));
  spec.activation = static_cast<Activation>(detail::get<std::uint32_t>(is));
  spec.leaky_slope = detail::get<double>(is);
  const auto count = detail::get<std::uint32_t>(is);
  std::vector<Matrix> tensors;
  for (std::uint32_t i = 0; i < count; ++i) {
    const auto rows = detail::get<std::uint32_t>(is);
    const auto cols = detail::get<std::uint32_t>(is);
    Matrix t(rows, cols);
    for (std::uint32_t r = 0; r < rows; ++r)
      for (std::uint32_t c = 0; c < cols; ++c) t(r, c) = detail::get<double>(is);
    tensors.push_back(std::move(t));
  }
  const std::size_t head_tensors = spec.head == HeadKind::dueling ? 4 : 2;
  if (tensors.size() < head_tensors + 2 || (tensors.size() - head_tensors) % 2 != 0)
    throw ContractError("checkpoint: inconsistent tensor count");
  const std::size_t n_hidden = (tensors.size() - head_tensors) / 2;
  spec.layer_sizes.push_back(static_cast<int>(tensors[0].cols()));
  for (std::size_t l = 0; l < n_hidden; ++l) spec.layer_sizes.push_back(static_cast<int>(tensors[2 * l].rows()));
  spec.n_actions = static_cast<int>(tensors[2 * n_hidden].rows());

  QNetwork net(spec);
  std::size_t idx = 0;
  bool shapes_ok = true;
  net.params_.for_each([&](auto& t) {
    const Matrix& src = tensors[idx++];
    if (src.rows() != t.rows() || src.cols() != t.cols()) {
      shapes_ok = false;
      return;
    }
    t = src;
  });
  if (!shapes_ok || idx != tensors.size()) throw ContractError("checkpoint: inconsistent tensor shapes");
  return net;
}

}  // namespace wncs::nn
