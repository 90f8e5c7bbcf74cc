#pragma once

#include "core/tensor.hpp"

namespace lsen {

// Probability clamp for log safety in the cross-entropy term.
inline constexpr double kProbClamp = 1e-7;
// Additive smoothing in the soft dice ratio (guards empty masks).
inline constexpr double kDiceSmooth = 1.0;

// Mean binary cross-entropy over all pixels; `pred` holds probabilities,
// `target` holds {0,1}.
template <typename T>
Tensor<T> bce_loss(const Tensor<T>& pred, const Tensor<T>& target);

// Soft dice loss 1 - (2*sum(y*p) + s) / (sum(y) + sum(p) + s).
template <typename T>
Tensor<T> dice_loss(const Tensor<T>& pred, const Tensor<T>& target, double smooth = kDiceSmooth);

// Training loss: bce + dice, equally weighted.
template <typename T>
Tensor<T> combined_loss(const Tensor<T>& pred, const Tensor<T>& target);

}  // namespace lsen
