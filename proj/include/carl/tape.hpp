#pragma once

#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "carl/tensor.hpp"

namespace carl {

/// Ordered computation record for reverse-mode differentiation.
///
/// Every differentiable op appends one node holding its inputs, its output and
/// a local gradient rule. Nodes are appended in evaluation order, so the list
/// is topologically sorted by construction and backward() is a reverse sweep.
/// A tape supports exactly one backward(); call reset() to reuse it.
template <typename T>
class Tape {
 public:
  using TensorT = Tensor<T>;
  /// Accumulates d(loss)/d(input) into inputs[k].mutable_grad() given output.grad().
  using Rule = std::function<void(std::span<TensorT> inputs, const TensorT& output)>;

  struct Node {
    std::string op;
    std::vector<TensorT> inputs;
    TensorT output;
    Rule rule;
  };

  enum class Mode { kRecord, kInference };

  explicit Tape(Mode mode = Mode::kRecord);
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;
  Tape(Tape&&) noexcept = default;
  Tape& operator=(Tape&&) noexcept = default;

  bool recording() const { return mode_ == Mode::kRecord; }
  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }
  const Node& node(std::size_t i) const { return nodes_.at(i); }
  bool consumed() const { return consumed_; }

  /// Registers `output` as produced by `op`. The output requires grad iff any
  /// input does; nothing is stored in inference mode or when no input needs grad.
  TensorT record(std::string op, std::vector<TensorT> inputs, TensorT output, Rule rule);

  /// Seeds d(loss)/d(loss) = 1 and replays the record backward. Leaf gradients
  /// accumulate into whatever they already hold.
  void backward(const TensorT& loss);

  /// Drops all nodes so the tape can record a fresh computation.
  void reset();

 private:
  Mode mode_;
  std::uint64_t id_;
  std::vector<Node> nodes_;
  bool consumed_ = false;
};

extern template class Tape<float>;
extern template class Tape<double>;

}  // namespace carl
