#include "ramwalk/diff/tensor.hpp"

#include <numeric>
#include <sstream>

namespace ramwalk::diff {

std::size_t shape_numel(const Shape& shape) {
  return std::accumulate(shape.begin(), shape.end(), std::size_t{1}, std::multiplies<>());
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ',';
    os << shape[i];
  }
  os << ']';
  return os.str();
}

Tensor::Tensor(Shape shape, std::vector<double> values) : shape_(std::move(shape)) {
  if (shape_numel(shape_) != values.size()) {
    throw ShapeError("tensor: shape " + shape_str(shape_) + " does not match " +
                     std::to_string(values.size()) + " values");
  }
  data_ = std::make_shared<const std::vector<double>>(std::move(values));
}

Tensor Tensor::zeros(Shape shape) { return filled(std::move(shape), 0.0); }

Tensor Tensor::filled(Shape shape, double value) {
  const auto n = shape_numel(shape);
  return Tensor(std::move(shape), std::vector<double>(n, value));
}

Tensor Tensor::scalar(double value) { return Tensor({}, {value}); }

std::span<const double> Tensor::data() const {
  if (!data_) return {};
  return {data_->data(), data_->size()};
}

double Tensor::item() const {
  if (numel() != 1) throw ShapeError("item: tensor of shape " + shape_str(shape_) + " is not a scalar");
  return (*data_)[0];
}

Tensor Tensor::detached() const {
  Tensor t = *this;
  t.tape_ = nullptr;
  t.node_ = -1;
  return t;
}

bool same_values(const Tensor& a, const Tensor& b) {
  if (a.shape() != b.shape()) return false;
  auto da = a.data();
  auto db = b.data();
  return std::equal(da.begin(), da.end(), db.begin(), db.end());
}

Tensor Tape::append(Shape shape, std::shared_ptr<const std::vector<double>> values, Node node) {
  node.numel = values->size();
  node.shape = shape;
  nodes_.push_back(std::move(node));
  Tensor t;
  t.shape_ = std::move(shape);
  t.data_ = std::move(values);
  t.tape_ = this;
  t.node_ = static_cast<std::int64_t>(nodes_.size() - 1);
  return t;
}

Tensor Tape::watch(const Tensor& value, ParamId id) {
  Node node;
  node.param = static_cast<std::int64_t>(id);
  auto values = std::make_shared<const std::vector<double>>(value.data().begin(), value.data().end());
  return append(value.shape(), std::move(values), std::move(node));
}

Tensor Tape::record(Shape shape, std::vector<double> values, const std::vector<Tensor>& inputs,
                    BackwardFn backward) {
  Tape* tape = nullptr;
  for (const auto& in : inputs) {
    if (!in.tracked()) continue;
    if (tape && in.tape() != tape) throw std::logic_error("record: inputs belong to different tapes");
    tape = in.tape();
  }
  if (!tape) return Tensor(std::move(shape), std::move(values));
  Node node;
  node.backward = std::move(backward);
  node.inputs.reserve(inputs.size());
  for (const auto& in : inputs) node.inputs.push_back(in.tracked() ? in.node() : -1);
  if (shape_numel(shape) != values.size()) {
    throw ShapeError("record: shape " + shape_str(shape) + " does not match " + std::to_string(values.size()) +
                     " values");
  }
  return tape->append(std::move(shape), std::make_shared<const std::vector<double>>(std::move(values)),
                      std::move(node));
}

Gradients Tape::backward(const Tensor& loss) {
  if (loss.numel() != 1) throw ShapeError("backward: loss must be scalar, got shape " + shape_str(loss.shape()));

  Gradients result;
  for (const auto& n : nodes_) {
    if (n.param >= 0) result.emplace(static_cast<ParamId>(n.param), Tensor::zeros(n.shape));
  }
  if (!loss.tracked()) return result;
  if (loss.tape() != this) throw std::logic_error("backward: loss was recorded on another tape");

  std::vector<std::vector<double>> grads(nodes_.size());
  grads[static_cast<std::size_t>(loss.node())].assign(1, 1.0);

  // Accumulated per-parameter gradient in case a leaf is watched twice.
  std::map<ParamId, std::vector<double>> acc;

  for (std::size_t k = static_cast<std::size_t>(loss.node()) + 1; k-- > 0;) {
    auto& g = grads[k];
    if (g.empty()) continue;
    const Node& node = nodes_[k];
    if (node.param >= 0) {
      auto& a = acc[static_cast<ParamId>(node.param)];
      if (a.empty()) {
        a = std::move(g);
      } else {
        for (std::size_t i = 0; i < a.size(); ++i) a[i] += g[i];
      }
      g = {};
      continue;
    }
    GradSlots slots(node.inputs.size(), nullptr);
    for (std::size_t s = 0; s < node.inputs.size(); ++s) {
      const auto in = node.inputs[s];
      if (in < 0) continue;
      auto& gi = grads[static_cast<std::size_t>(in)];
      if (gi.empty()) gi.assign(nodes_[static_cast<std::size_t>(in)].numel, 0.0);
      slots[s] = &gi;
    }
    if (node.backward) node.backward(std::span<const double>(g.data(), g.size()), slots);
    g = {};
  }

  for (auto& [id, values] : acc) {
    auto& slot = result[id];
    slot = Tensor(slot.shape(), std::move(values));
  }
  return result;
}

}  // namespace ramwalk::diff
