#include "loss/loss.hpp"

#include "core/ops.hpp"

namespace lsen {

namespace {

template <typename T>
void check_shapes(const char* op, const Tensor<T>& pred, const Tensor<T>& target) {
  LSEN_CHECK_DIM(pred.defined() && target.defined() && pred.shape() == target.shape(),
                 std::string(op) + ": prediction and target shapes differ");
}

}  // namespace

template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  check_shapes("bce_loss", pred, target);
  const T eps = static_cast<T>(kProbClamp);
  Tensor<T> p = ops::clamp(pred, eps, T(1) - eps);
  Tensor<T> pos = ops::mul(target, ops::log(p));
  Tensor<T> neg = ops::mul(ops::affine(target, T(-1), T(1)), ops::log(ops::affine(p, T(-1), T(1))));
  return ops::affine(ops::mean_all(ops::add(pos, neg)), T(-1), T(0));
}

template <typename T>
Tensor<T> dice_loss(const Tensor<T>& pred, const Tensor<T>& target, double smooth) {
  check_shapes("dice_loss", pred, target);
  const T s = static_cast<T>(smooth);
  Tensor<T> overlap = ops::sum_all(ops::mul(pred, target));
  Tensor<T> total = ops::add(ops::sum_all(pred), ops::sum_all(target));
  Tensor<T> ratio = ops::div(ops::affine(overlap, T(2), s), ops::affine(total, T(1), s));
  return ops::affine(ratio, T(-1), T(1));
}

template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target) {
  return ops::add(bce_loss(pred, target), dice_loss(pred, target));
}

#define LSEN_INSTANTIATE(T)                                                     \
  template Tensor<T> bce_loss<T>(const Tensor<T>&, const Tensor<T>&);           \
  template Tensor<T> dice_loss<T>(const Tensor<T>&, const Tensor<T>&, double);  \
  template Tensor<T> combined_loss<T>(const Tensor<T>&, const Tensor<T>&);

LSEN_INSTANTIATE(float)
LSEN_INSTANTIATE(double)
#undef LSEN_INSTANTIATE

}  // namespace lsen
