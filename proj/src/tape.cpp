#include "carl/tape.hpp"

#include <atomic>

namespace carl {

namespace {
std::atomic<std::uint64_t> next_tape_id{1};
}  // namespace

template <typename T>
Tape<T>::Tape(Mode mode) : mode_(mode), id_(next_tape_id.fetch_add(1)) {}

template <typename T>
typename Tape<T>::TensorT Tape<T>::record(std::string op, std::vector<TensorT> inputs, TensorT output,
                                          Rule rule) {
  bool needs_grad = false;
  for (const auto& in : inputs) needs_grad = needs_grad || in.requires_grad();
  if (!recording() || !needs_grad) {
    output.set_requires_grad(false);
    return output;
  }
  if (consumed_) throw StateError("cannot record '" + op + "' on a consumed tape; call reset() first");
  output.set_requires_grad(true);
  output.set_origin(id_, static_cast<std::int64_t>(nodes_.size()));
  nodes_.push_back(Node{std::move(op), std::move(inputs), output, std::move(rule)});
  return output;
}

template <typename T>
void Tape<T>::backward(const TensorT& loss) {
  if (loss.numel() != 1) {
    throw ContractError("backward() needs a scalar loss, got shape " + shape_to_string(loss.shape()));
  }
  if (consumed_) throw StateError("backward() called twice on the same record without reset()");
  TensorT seed = loss;
  if (loss.node_id() < 0) {
    if (!loss.requires_grad()) throw ContractError("loss does not depend on any parameter");
    seed.mutable_grad()[0] += T{1};
    consumed_ = true;
    return;
  }
  if (loss.tape_id() != id_ || static_cast<std::size_t>(loss.node_id()) >= nodes_.size()) {
    throw ContractError("loss was not produced by this record");
  }
  const auto last = static_cast<std::size_t>(loss.node_id());
  for (std::size_t i = 0; i <= last; ++i) nodes_[i].output.zero_grad();
  seed.mutable_grad()[0] = T{1};
  for (std::size_t i = last + 1; i-- > 0;) {
    auto& node = nodes_[i];
    node.rule(node.inputs, node.output);
  }
  consumed_ = true;
}

template <typename T>
void Tape<T>::reset() {
  nodes_.clear();
  consumed_ = false;
  id_ = next_tape_id.fetch_add(1);
}

template class Tape<float>;
template class Tape<double>;

}  // namespace carl
