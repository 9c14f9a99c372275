#include "sglens/tensor.hpp"

#include <atomic>
#include <sstream>

#include "sglens/error.hpp"

namespace sglens {

namespace {

thread_local Tape* g_active_tape = nullptr;
std::atomic<std::uint64_t> g_next_tape_id{1};

}  // namespace

std::size_t shape_numel(const Shape& shape) {
  std::size_t n = 1;
  for (std::size_t d : shape) n *= d;
  return n;
}

std::string shape_str(const Shape& shape) {
  std::ostringstream os;
  os << '[';
  for (std::size_t i = 0; i < shape.size(); ++i) os << (i ? "," : "") << shape[i];
  os << ']';
  return os.str();
}

Tape::Tape() : id_(g_next_tape_id.fetch_add(1)) {}

Tape::~Tape() {
  if (g_active_tape == this) g_active_tape = nullptr;
}

Tape::Scope::Scope(Tape& tape) : previous_(g_active_tape) { g_active_tape = &tape; }
Tape::Scope::~Scope() { g_active_tape = previous_; }

Tape* Tape::active() { return g_active_tape; }

std::size_t Tape::record(std::shared_ptr<detail::ImplBase> output, std::function<void()> backward) {
  nodes_.push_back(Node{std::move(output), std::move(backward)});
  return nodes_.size() - 1;
}

void Tape::run_backward(std::size_t from_node) {
  for (std::size_t i = from_node + 1; i-- > 0;) nodes_[i].backward();
}

void Tape::clear_intermediate_grads() {
  for (auto& node : nodes_) node.output->clear_grad();
}

NoGradScope::NoGradScope() : previous_(g_active_tape) { g_active_tape = nullptr; }
NoGradScope::~NoGradScope() { g_active_tape = previous_; }

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, T fill) : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  impl_->data.assign(shape_numel(shape), fill);
  impl_->shape = std::move(shape);
}

template <typename T>
BasicTensor<T>::BasicTensor(Shape shape, std::vector<T> values)
    : impl_(std::make_shared<detail::TensorImpl<T>>()) {
  for (std::size_t d : shape)
    if (d == 0) throw ShapeError("tensor dimensions must be positive, got " + shape_str(shape));
  if (shape_numel(shape) != values.size())
    throw ShapeError("shape " + shape_str(shape) + " holds " + std::to_string(shape_numel(shape)) +
                     " elements, got " + std::to_string(values.size()));
  impl_->shape = std::move(shape);
  impl_->data = std::move(values);
}

template <typename T>
BasicTensor<T> BasicTensor<T>::randn(Shape shape, Rng& rng) {
  BasicTensor t(std::move(shape));
  rng.fill_normal<T>(t.mutable_data());
  return t;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::uniform(Shape shape, Rng& rng, double lo, double hi) {
  BasicTensor t(std::move(shape));
  for (auto& v : t.mutable_data()) v = static_cast<T>(rng.uniform(lo, hi));
  return t;
}

template <typename T>
T BasicTensor<T>::item() const {
  if (numel() != 1) throw ShapeError("item() needs a single-element tensor, got " + shape_str(shape()));
  return impl_->data[0];
}

template <typename T>
BasicTensor<T>& BasicTensor<T>::set_requires_grad(bool on) {
  impl_->requires_grad = on;
  if (on) impl_->ensure_grad();
  return *this;
}

template <typename T>
std::span<const T> BasicTensor<T>::grad() const {
  impl_->ensure_grad();
  return impl_->grad;
}

template <typename T>
std::span<T> BasicTensor<T>::mutable_grad() {
  impl_->ensure_grad();
  return impl_->grad;
}

template <typename T>
void BasicTensor<T>::zero_grad() {
  impl_->ensure_grad();
  impl_->clear_grad();
}

template <typename T>
BasicTensor<T> BasicTensor<T>::clone() const {
  BasicTensor out(shape(), impl_->data);
  if (requires_grad()) out.set_requires_grad(true);
  return out;
}

template <typename T>
BasicTensor<T> BasicTensor<T>::detach() const {
  return BasicTensor(shape(), impl_->data);
}

template <typename T>
void backward(const BasicTensor<T>& loss) {
  if (!loss.defined() || loss.numel() != 1)
    throw AutodiffError("backward() needs a scalar loss, got shape " +
                        (loss.defined() ? shape_str(loss.shape()) : std::string("<undefined>")));
  Tape* tape = Tape::active();
  const auto& impl = loss.impl_ptr();
  if (tape == nullptr || impl->tape_id != tape->id())
    throw AutodiffError("backward() called on a loss that was not recorded on the active tape");
  tape->clear_intermediate_grads();
  impl->ensure_grad();
  impl->grad[0] = T{1};
  tape->run_backward(impl->node);
}

template class BasicTensor<float>;
template class BasicTensor<double>;
template void backward<float>(const BasicTensor<float>&);
template void backward<double>(const BasicTensor<double>&);

}  // namespace sglens
