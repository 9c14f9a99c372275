#pragma once

// Dense row-major tensors with tape-based reverse-mode differentiation.
//
// A Tensor is a shared handle: copying it aliases the same storage, the way
// parameters are shared between a model and its optimizer. Operations never
// modify their inputs. When a Tape is active on the current thread and an
// operation has an input that requires gradients, the operation appends a
// node to the tape; backward() replays the tape in reverse from the loss.

#include <cstddef>
#include <cstdint>
#include <functional>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "sglens/rng.hpp"

namespace sglens {

using Shape = std::vector<std::size_t>;

std::size_t shape_numel(const Shape& shape);
std::string shape_str(const Shape& shape);

namespace detail {

class ImplBase {
 public:
  virtual ~ImplBase() = default;
  virtual void clear_grad() = 0;
};

template <typename T>
struct TensorImpl final : ImplBase {
  Shape shape;
  std::vector<T> data;
  std::vector<T> grad;
  bool requires_grad = false;
  std::uint64_t tape_id = 0;  // 0: leaf or untraced value
  std::size_t node = 0;

  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), T{0});
  }
  void clear_grad() override { std::fill(grad.begin(), grad.end(), T{0}); }
};

}  // namespace detail

// Ordered record of differentiable operations (a Wengert list). Nodes are
// appended in execution order, so the list is topologically sorted.
class Tape {
 public:
  Tape();
  ~Tape();
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  // Makes `tape` the active tape of this thread for the scope's lifetime.
  class Scope {
   public:
    explicit Scope(Tape& tape);
    ~Scope();
    Scope(const Scope&) = delete;
    Scope& operator=(const Scope&) = delete;

   private:
    Tape* previous_;
  };

  static Tape* active();

  std::uint64_t id() const { return id_; }
  std::size_t size() const { return nodes_.size(); }

  std::size_t record(std::shared_ptr<detail::ImplBase> output, std::function<void()> backward);
  void run_backward(std::size_t from_node);
  void clear_intermediate_grads();

 private:
  struct Node {
    std::shared_ptr<detail::ImplBase> output;
    std::function<void()> backward;
  };
  std::uint64_t id_;
  std::vector<Node> nodes_;
};

// Disables recording on this thread for the scope's lifetime.
class NoGradScope {
 public:
  NoGradScope();
  ~NoGradScope();
  NoGradScope(const NoGradScope&) = delete;
  NoGradScope& operator=(const NoGradScope&) = delete;

 private:
  Tape* previous_;
};

template <typename T>
class BasicTensor {
 public:
  using value_type = T;

  BasicTensor() = default;
  explicit BasicTensor(Shape shape, T fill = T{0});
  BasicTensor(Shape shape, std::vector<T> values);

  static BasicTensor zeros(Shape shape) { return BasicTensor(std::move(shape), T{0}); }
  static BasicTensor ones(Shape shape) { return BasicTensor(std::move(shape), T{1}); }
  static BasicTensor full(Shape shape, T value) { return BasicTensor(std::move(shape), value); }
  static BasicTensor scalar(T value) { return BasicTensor(Shape{1}, value); }
  static BasicTensor randn(Shape shape, Rng& rng);
  static BasicTensor uniform(Shape shape, Rng& rng, double lo, double hi);

  bool defined() const { return impl_ != nullptr; }
  const Shape& shape() const { return impl_->shape; }
  std::size_t rank() const { return impl_->shape.size(); }
  std::size_t dim(std::size_t axis) const { return impl_->shape.at(axis); }
  std::size_t numel() const { return impl_->data.size(); }

  std::span<const T> data() const { return impl_->data; }
  // Direct write access, for parameter updates and in-place pruning.
  std::span<T> mutable_data() { return impl_->data; }
  T item() const;
  T operator[](std::size_t i) const { return impl_->data[i]; }

  bool requires_grad() const { return impl_ && impl_->requires_grad; }
  BasicTensor& set_requires_grad(bool on);
  bool is_leaf() const { return impl_->tape_id == 0; }

  // Zero-filled when no gradient has been accumulated yet.
  std::span<const T> grad() const;
  std::span<T> mutable_grad();
  void zero_grad();

  // Deep copy as an untraced leaf that keeps the requires_grad flag.
  BasicTensor clone() const;
  // Deep copy with no gradient tracking.
  BasicTensor detach() const;

  template <typename U>
  BasicTensor<U> cast() const {
    std::vector<U> out(numel());
    for (std::size_t i = 0; i < out.size(); ++i) out[i] = static_cast<U>(impl_->data[i]);
    return BasicTensor<U>(shape(), std::move(out));
  }

  const std::shared_ptr<detail::TensorImpl<T>>& impl_ptr() const { return impl_; }

 private:
  std::shared_ptr<detail::TensorImpl<T>> impl_;
};

using Tensor = BasicTensor<float>;
using Tensor64 = BasicTensor<double>;

// Reverse pass from a scalar loss recorded on the active tape. Gradients of
// leaves accumulate across calls until zero_grad().
template <typename T>
void backward(const BasicTensor<T>& loss);

namespace detail {

// True when an active tape exists and any defined input requires gradients.
template <typename T>
bool should_record(std::initializer_list<const BasicTensor<T>*> inputs) {
  if (Tape::active() == nullptr) return false;
  for (const auto* t : inputs)
    if (t != nullptr && t->defined() && t->requires_grad()) return true;
  return false;
}

// Gradient buffer of an input when it takes part in differentiation, else empty.
template <typename T>
std::span<T> grad_sink(const std::shared_ptr<TensorImpl<T>>& impl) {
  if (!impl || !impl->requires_grad) return {};
  impl->ensure_grad();
  return impl->grad;
}

// Registers `fn(grad_out)` as the local gradient rule producing `out`.
template <typename T, typename Fn>
void attach_backward(BasicTensor<T>& out, Fn fn) {
  const auto& impl = out.impl_ptr();
  Tape* tape = Tape::active();
  impl->requires_grad = true;
  impl->ensure_grad();
  impl->tape_id = tape->id();
  TensorImpl<T>* raw = impl.get();
  impl->node = tape->record(impl, [raw, fn = std::move(fn)]() {
    fn(std::span<const T>(raw->grad));
  });
}

}  // namespace detail

}  // namespace sglens
