#pragma once

#include <Eigen/Core>
#include <stdexcept>
#include <string>

namespace pssqp {

using Eigen::MatrixXd;
using Eigen::VectorXd;

// Horizon and block dimensions of a shooting trajectory. The decision vector
// stacks N stage blocks [x_i; u_i] (size n+q) followed by one terminal state
// block (size n), so p = N*(n+q)+n.
struct Dims {
  int n = 1;  // states
  int q = 0;  // inputs
  int N = 1;  // stages
  int p = 1;  // total decision variables

  Dims() = default;
  Dims(int n_, int q_, int N_) : n(n_), q(q_), N(N_), p(N_ * (n_ + q_) + n_) {
    if (n < 1 || q < 0 || N < 1)
      throw std::invalid_argument("Dims: require n >= 1, q >= 0, N >= 1");
  }

  int stage_size(int i) const { return i == N ? n : n + q; }
  int stage_offset(int i) const { return i * (n + q); }
};

inline bool operator==(const Dims& a, const Dims& b) {
  return a.n == b.n && a.q == b.q && a.N == b.N && a.p == b.p;
}

// Flat decision vector with stage-block accessors.
class Trajectory {
 public:
  Trajectory() = default;
  explicit Trajectory(const Dims& dims) : dims_(dims), data_(VectorXd::Zero(dims.p)) {}
  Trajectory(const Dims& dims, VectorXd data) : dims_(dims), data_(std::move(data)) {
    if (data_.size() != dims_.p)
      throw std::invalid_argument("Trajectory: data length " + std::to_string(data_.size()) +
                                  " != p = " + std::to_string(dims_.p));
  }

  const Dims& dims() const { return dims_; }
  VectorXd& data() { return data_; }
  const VectorXd& data() const { return data_; }

  // stage block i in [0, N]; the block at N is the terminal state
  Eigen::VectorBlock<VectorXd> stage(int i) {
    check_stage(i);
    return data_.segment(dims_.stage_offset(i), dims_.stage_size(i));
  }
  Eigen::VectorBlock<const VectorXd> stage(int i) const {
    check_stage(i);
    return data_.segment(dims_.stage_offset(i), dims_.stage_size(i));
  }

  Eigen::VectorBlock<VectorXd> state(int i) {
    check_stage(i);
    return data_.segment(dims_.stage_offset(i), dims_.n);
  }
  Eigen::VectorBlock<const VectorXd> state(int i) const {
    check_stage(i);
    return data_.segment(dims_.stage_offset(i), dims_.n);
  }

  Eigen::VectorBlock<VectorXd> input(int i) {
    check_input(i);
    return data_.segment(dims_.stage_offset(i) + dims_.n, dims_.q);
  }
  Eigen::VectorBlock<const VectorXd> input(int i) const {
    check_input(i);
    return data_.segment(dims_.stage_offset(i) + dims_.n, dims_.q);
  }

 private:
  void check_stage(int i) const {
    if (i < 0 || i > dims_.N) throw std::out_of_range("Trajectory: stage " + std::to_string(i));
  }
  void check_input(int i) const {
    if (i < 0 || i >= dims_.N || dims_.q == 0)
      throw std::out_of_range("Trajectory: input " + std::to_string(i));
  }

  Dims dims_;
  VectorXd data_;
};

// Selector that picks the state out of a stage block: x = E [x; u], E = [I 0].
struct SelectorE {
  Dims dims;

  VectorXd apply(const VectorXd& stage_block) const { return stage_block.head(dims.n); }
  MatrixXd matrix() const {
    MatrixXd E = MatrixXd::Zero(dims.n, dims.n + dims.q);
    E.leftCols(dims.n).setIdentity();
    return E;
  }
};

struct DynamicsEvalError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ShotGenError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IntegrationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct ConfigError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

}  // namespace pssqp
