#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

namespace ramwalk::diff {

using Shape = std::vector<std::size_t>;
using ParamId = std::size_t;

class ShapeError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

class Tape;

// Dense row-major array of doubles. Values are immutable once constructed;
// copies share storage. A tensor produced by an operation on tracked inputs
// carries the id of the node that recorded it.
class Tensor {
 public:
  Tensor() = default;
  Tensor(Shape shape, std::vector<double> values);

  static Tensor zeros(Shape shape);
  static Tensor filled(Shape shape, double value);
  static Tensor scalar(double value);

  const Shape& shape() const { return shape_; }
  std::size_t rank() const { return shape_.size(); }
  std::size_t dim(std::size_t axis) const { return shape_.at(axis); }
  std::size_t numel() const { return data_ ? data_->size() : 0; }
  bool empty() const { return numel() == 0; }

  std::span<const double> data() const;
  double operator[](std::size_t i) const { return (*data_)[i]; }
  double item() const;

  Tape* tape() const { return tape_; }
  std::int64_t node() const { return node_; }
  bool tracked() const { return tape_ != nullptr; }

  // Same values and shape, detached from any tape.
  Tensor detached() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const std::vector<double>> data_;
  Tape* tape_ = nullptr;
  std::int64_t node_ = -1;
};

bool same_values(const Tensor& a, const Tensor& b);

// Gradient buffers handed to a backward rule: one slot per recorded input,
// null when that input does not need a gradient.
using GradSlots = std::vector<std::vector<double>*>;
using BackwardFn = std::function<void(std::span<const double> grad_out, const GradSlots& grad_in)>;

using Gradients = std::map<ParamId, Tensor>;

// Define-by-run record of operations. Nodes are appended in evaluation order,
// so reverse insertion order is a valid reverse topological order. Single
// owner; not safe to share between threads.
class Tape {
 public:
  Tape() = default;
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Registers `value` as a leaf whose gradient is reported under `id`.
  Tensor watch(const Tensor& value, ParamId id);

  // Records an operation result. Inputs that are untracked (constants) get no
  // gradient slot. Returns an untracked tensor when no input is tracked.
  static Tensor record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                       BackwardFn backward);

  Gradients backward(const Tensor& loss);

  std::size_t size() const { return nodes_.size(); }

 private:
  struct Node {
    std::size_t numel = 0;
    Shape shape;
    std::vector<std::int64_t> inputs;
    BackwardFn backward;
    std::int64_t param = -1;
  };

  Tensor append(Shape shape, std::shared_ptr<const std::vector<double>> values, Node node);

  std::vector<Node> nodes_;
};

}  // namespace ramwalk::diff
