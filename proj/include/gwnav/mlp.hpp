#pragma once

// Dense rectifier networks and the Adam optimizer behind the controller.
// Everything is templated on the scalar: training runs in float for speed,
// gradient checks instantiate the identical code in double.

#include <cmath>
#include <utility>
#include <vector>

#include <Eigen/Core>

#include "gwnav/common.hpp"
#include "gwnav/serialize.hpp"

namespace gwnav {

template <typename T>
using MatT = Eigen::Matrix<T, Eigen::Dynamic, Eigen::Dynamic>;
template <typename T>
using VecT = Eigen::Matrix<T, Eigen::Dynamic, 1>;

/// Fully connected network, rectifier on hidden layers, linear output.
/// Batches are column-major: one sample per column.
template <typename T>
class Mlp {
public:
  Mlp() = default;

  Mlp(std::vector<int> sizes, Rng& rng) : sizes_(std::move(sizes)) {
    require(sizes_.size() >= 2, ErrorKind::config,
            "network needs input and output layers");
    for (int s : sizes_)
      require(s > 0, ErrorKind::config, "layer sizes must be positive");
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      const double bound = 1.0 / std::sqrt(static_cast<double>(sizes_[l]));
      MatT<T> w(sizes_[l + 1], sizes_[l]);
      VecT<T> b(sizes_[l + 1]);
      for (Eigen::Index c = 0; c < w.cols(); ++c)
        for (Eigen::Index r = 0; r < w.rows(); ++r)
          w(r, c) = static_cast<T>(rng.uniform(-bound, bound));
      for (Eigen::Index r = 0; r < b.size(); ++r)
        b(r) = static_cast<T>(rng.uniform(-bound, bound));
      w_.push_back(std::move(w));
      b_.push_back(std::move(b));
    }
  }

  static Mlp zeros_like(const Mlp& other) {
    Mlp m;
    m.sizes_ = other.sizes_;
    for (size_t l = 0; l < other.w_.size(); ++l) {
      m.w_.push_back(MatT<T>::Zero(other.w_[l].rows(), other.w_[l].cols()));
      m.b_.push_back(VecT<T>::Zero(other.b_[l].size()));
    }
    return m;
  }

  const std::vector<int>& sizes() const { return sizes_; }
  int layers() const { return static_cast<int>(w_.size()); }
  int in_dim() const { return sizes_.front(); }
  int out_dim() const { return sizes_.back(); }

  void set_zero() {
    for (auto& w : w_) w.setZero();
    for (auto& b : b_) b.setZero();
  }

  /// Forward pass. With `tape` given it records the input and each hidden
  /// post-activation, which backward() consumes.
  MatT<T> forward(const MatT<T>& x, std::vector<MatT<T>>* tape = nullptr) const {
    require(x.rows() == sizes_.front(), ErrorKind::usage,
            "network input dimension mismatch");
    if (tape) {
      tape->clear();
      tape->push_back(x);
    }
    MatT<T> h = x;
    for (int l = 0; l < layers(); ++l) {
      MatT<T> z = (w_[l] * h).colwise() + b_[l];
      if (l + 1 < layers()) {
        z = z.cwiseMax(T(0));
        if (tape) tape->push_back(z);
      }
      h = std::move(z);
    }
    return h;
  }

  /// Accumulate dLoss/dparams into `grad` given dLoss/doutput, one column
  /// per sample; optionally also produce dLoss/dinput. The rectifier gate
  /// is recovered from the recorded post-activations (zero means clamped).
  void backward(const std::vector<MatT<T>>& tape, const MatT<T>& dout,
                Mlp* grad, MatT<T>* dinput = nullptr) const {
    require(static_cast<int>(tape.size()) == layers(), ErrorKind::usage,
            "tape does not match this network");
    MatT<T> g = dout;
    for (int l = layers() - 1; l >= 0; --l) {
      if (grad) {
        grad->w_[l].noalias() += g * tape[l].transpose();
        grad->b_[l] += g.rowwise().sum();
      }
      if (l > 0) {
        MatT<T> gh = w_[l].transpose() * g;
        g = (tape[l].array() > T(0)).select(gh, MatT<T>::Zero(gh.rows(),
                                                              gh.cols()));
      } else if (dinput) {
        dinput->noalias() = w_[0].transpose() * g;
      }
    }
  }

  Eigen::Index param_count() const {
    Eigen::Index n = 0;
    for (size_t l = 0; l < w_.size(); ++l) n += w_[l].size() + b_[l].size();
    return n;
  }

  /// Flat parameter vector, layer by layer (weights column-major, then
  /// bias). The layout is the contract for optimizers and checkpoints.
  VecT<T> pack() const {
    VecT<T> p(param_count());
    Eigen::Index at = 0;
    for (size_t l = 0; l < w_.size(); ++l) {
      p.segment(at, w_[l].size()) =
          Eigen::Map<const VecT<T>>(w_[l].data(), w_[l].size());
      at += w_[l].size();
      p.segment(at, b_[l].size()) = b_[l];
      at += b_[l].size();
    }
    return p;
  }

  void unpack(const VecT<T>& p) {
    require(p.size() == param_count(), ErrorKind::usage,
            "parameter vector length mismatch");
    Eigen::Index at = 0;
    for (size_t l = 0; l < w_.size(); ++l) {
      Eigen::Map<VecT<T>>(w_[l].data(), w_[l].size()) =
          p.segment(at, w_[l].size());
      at += w_[l].size();
      b_[l] = p.segment(at, b_[l].size());
      at += b_[l].size();
    }
  }

  /// In-place Polyak step toward `online`: p <- (1-tau) p + tau p_online.
  void track(const Mlp& online, T tau) {
    require(sizes_ == online.sizes_, ErrorKind::usage,
            "target network shape mismatch");
    for (size_t l = 0; l < w_.size(); ++l) {
      w_[l] = (T(1) - tau) * w_[l] + tau * online.w_[l];
      b_[l] = (T(1) - tau) * b_[l] + tau * online.b_[l];
    }
  }

  void save(std::ostream& os) const {
    bin::write<std::uint64_t>(os, sizes_.size());
    for (int s : sizes_) bin::write<std::int32_t>(os, s);
    for (size_t l = 0; l < w_.size(); ++l) {
      bin::write_matrix(os, w_[l]);
      bin::write_matrix(os, b_[l]);
    }
  }

  void load(std::istream& is) {
    auto n = bin::read<std::uint64_t>(is);
    require(n >= 2 && n <= 64, ErrorKind::parse, "implausible layer count");
    sizes_.resize(n);
    for (auto& s : sizes_) s = bin::read<std::int32_t>(is);
    w_.clear();
    b_.clear();
    for (size_t l = 0; l + 1 < sizes_.size(); ++l) {
      w_.push_back(bin::read_matrix<MatT<T>>(is));
      b_.push_back(bin::read_matrix<VecT<T>>(is));
      require(w_[l].rows() == sizes_[l + 1] && w_[l].cols() == sizes_[l] &&
                  b_[l].size() == sizes_[l + 1],
              ErrorKind::parse, "network shape does not match its header");
    }
  }

private:
  std::vector<int> sizes_;
  std::vector<MatT<T>> w_;
  std::vector<VecT<T>> b_;
};

/// Adam on a flat parameter vector, default decay rates.
template <typename T>
class Adam {
public:
  Adam() = default;
  Adam(T lr, Eigen::Index n)
      : lr_(lr), m_(VecT<T>::Zero(n)), v_(VecT<T>::Zero(n)) {}

  void step(VecT<T>& params, const VecT<T>& grad) {
    require(params.size() == m_.size() && grad.size() == m_.size(),
            ErrorKind::usage, "optimizer size mismatch");
    ++t_;
    m_ = beta1_ * m_ + (T(1) - beta1_) * grad;
    v_.array() = beta2_ * v_.array() + (T(1) - beta2_) * grad.array().square();
    const T c1 = T(1) - std::pow(beta1_, static_cast<T>(t_));
    const T c2 = T(1) - std::pow(beta2_, static_cast<T>(t_));
    params.array() -=
        lr_ * (m_.array() / c1) / ((v_.array() / c2).sqrt() + eps_);
  }

  long long steps() const { return t_; }

  void save(std::ostream& os) const {
    bin::write<std::int64_t>(os, t_);
    bin::write(os, lr_);
    bin::write_matrix(os, m_);
    bin::write_matrix(os, v_);
  }

  void load(std::istream& is) {
    t_ = bin::read<std::int64_t>(is);
    lr_ = bin::read<T>(is);
    m_ = bin::read_matrix<VecT<T>>(is);
    v_ = bin::read_matrix<VecT<T>>(is);
    require(m_.size() == v_.size(), ErrorKind::parse,
            "optimizer moment size mismatch");
  }

private:
  T lr_ = T(1e-3);
  T beta1_ = T(0.9);
  T beta2_ = T(0.999);
  T eps_ = T(1e-8);
  VecT<T> m_, v_;
  long long t_ = 0;
};

} // namespace gwnav
