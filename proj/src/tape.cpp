#include "spmat/tape.hpp"

#include "spmat/error.hpp"

#include <fmt/format.h>

namespace spmat {

const Tensor &Var::value() const { return tape_->value(id_); }

bool Var::requires_grad() const { return tape_->requires_grad(id_); }

const Tensor &Gradients::operator[](const Var &leaf) const {
  if (leaf.id() >= grads_.size() || !present_[leaf.id()])
    throw Error(ErrorCode::DetachedLoss, "gradient requested for a value that is not a leaf of this tape");
  return grads_[leaf.id()];
}

Var Tape::leaf(Tensor value, bool requires_grad) {
  if (!value.all_finite())
    throw Error(ErrorCode::NonFinite, "leaf value");
  Node n;
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.is_leaf = true;
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Var Tape::record(std::string_view op, Tensor value, std::vector<Var> inputs, BackwardFn backward) {
  if (!value.all_finite())
    throw Error(ErrorCode::NonFinite, fmt::format("output of {}", op));
  Node n;
  n.value = std::move(value);
  for (const auto &in : inputs) {
    if (in.tape() != this)
      throw Error(ErrorCode::DetachedLoss, fmt::format("{}: input recorded on another tape", op));
    n.inputs.push_back(in.id());
    n.requires_grad = n.requires_grad || nodes_[in.id()].requires_grad;
  }
  if (n.requires_grad)
    n.backward = std::move(backward);
  nodes_.push_back(std::move(n));
  return Var(this, nodes_.size() - 1);
}

Gradients Tape::backward(const Var &loss) const {
  if (loss.tape() != this || loss.id() >= nodes_.size())
    throw Error(ErrorCode::DetachedLoss, "loss was not recorded on this tape");
  const auto &root = nodes_[loss.id()].value;
  if (root.numel() != 1)
    throw Error(ErrorCode::NotScalar,
                fmt::format("backward needs a scalar loss, got shape {}", shape_string(root.shape())));

  std::vector<Tensor> grads(nodes_.size());
  std::vector<char> present(nodes_.size(), 0);
  grads[loss.id()] = Tensor(root.shape(), 1.0);
  present[loss.id()] = 1;

  std::vector<Tensor *> in_ptrs;
  for (std::size_t k = loss.id() + 1; k-- > 0;) {
    const auto &node = nodes_[k];
    if (!present[k] || node.is_leaf || !node.requires_grad)
      continue;
    in_ptrs.assign(node.inputs.size(), nullptr);
    for (std::size_t a = 0; a < node.inputs.size(); ++a) {
      const auto in = node.inputs[a];
      if (!nodes_[in].requires_grad)
        continue;
      if (!present[in]) {
        grads[in] = Tensor(nodes_[in].value.shape(), 0.0);
        present[in] = 1;
      }
      in_ptrs[a] = &grads[in];
    }
    node.backward(node.value, grads[k], in_ptrs);
    // interior gradients are no longer needed once propagated
    grads[k] = Tensor();
    present[k] = 0;
  }

  Gradients out;
  out.grads_.resize(nodes_.size());
  out.present_.assign(nodes_.size(), 0);
  for (std::size_t k = 0; k < nodes_.size(); ++k) {
    if (!nodes_[k].is_leaf)
      continue;
    out.present_[k] = 1;
    out.grads_[k] = present[k] ? std::move(grads[k]) : Tensor(nodes_[k].value.shape(), 0.0);
  }
  return out;
}

} // namespace spmat
