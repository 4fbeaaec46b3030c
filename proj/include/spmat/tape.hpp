#pragma once

#include "spmat/tensor.hpp"

#include <functional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

namespace spmat {

class Tape;

/// Handle to a value recorded on a Tape.
class Var {
public:
  Var() = default;

  const Tensor &value() const;
  const Shape &shape() const { return value().shape(); }
  bool requires_grad() const;
  Tape *tape() const noexcept { return tape_; }
  std::size_t id() const noexcept { return id_; }
  bool valid() const noexcept { return tape_ != nullptr; }

private:
  friend class Tape;
  Var(Tape *tape, std::size_t id) : tape_(tape), id_(id) {}

  Tape *tape_ = nullptr;
  std::size_t id_ = 0;
};

class Gradients {
public:
  /// Gradient of the loss w.r.t. a leaf; zeros if the leaf was not reached.
  const Tensor &operator[](const Var &leaf) const;

private:
  friend class Tape;
  std::vector<Tensor> grads_;
  std::vector<char> present_;
};

/// Append-only record of primitive operations. Record order is a topological
/// order, so backward() is a single reverse sweep. One tape per thread.
class Tape {
public:
  /// Receives the recorded output and dL/d(output), and accumulates into each
  /// input's gradient; a null pointer marks an input that does not need one.
  using BackwardFn = std::function<void(const Tensor &out, const Tensor &grad_out,
                                        std::span<Tensor *const> grad_in)>;

  Tape() = default;
  Tape(const Tape &) = delete;
  Tape &operator=(const Tape &) = delete;

  Var leaf(Tensor value, bool requires_grad = true);
  Var constant(Tensor value) { return leaf(std::move(value), false); }

  /// Records an operator output. Throws NonFinite naming `op` if any value is
  /// NaN or infinite.
  Var record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward);

  const Tensor &value(std::size_t id) const { return nodes_[id].value; }
  bool requires_grad(std::size_t id) const { return nodes_[id].requires_grad; }
  std::size_t size() const noexcept { return nodes_.size(); }

  Gradients backward(const Var &loss) const;

private:
  struct Node {
    Tensor value;
    std::vector<std::size_t> inputs;
    BackwardFn backward;
    bool requires_grad = false;
    bool is_leaf = false;
  };
  std::vector<Node> nodes_;
};

} // namespace spmat
