#include "core/gradcheck.hpp"

#include <cmath>

#include "core/common.hpp"

namespace lsen {

template <typename T>
double grad_check(const std::function<Tensor<T>()>& f, const std::vector<Tensor<T>>& params,
                  const GradCheckOptions& opts) {
  LSEN_CHECK_ARG(opts.eps >= 1e-7 && opts.eps <= 1e-3, "grad_check: eps must be in [1e-7, 1e-3]");
  LSEN_CHECK_ARG(!params.empty(), "grad_check: no parameters given");
  for (const auto& p : params)
    LSEN_CHECK_ARG(p.requires_grad(), "grad_check: all params must require grad");

  // Analytic gradients.
  std::vector<std::vector<T>> analytic;
  {
    Tape<T> tape;
    Tensor<T> loss = f();
    LSEN_CHECK_ARG(loss.numel() == 1, "grad_check: f must return a scalar");
    tape.backward(loss);
    for (const auto& p : params) {
      const T* g = p.grad();
      LSEN_CHECK_ARG(g != nullptr, "grad_check: parameter received no gradient");
      analytic.emplace_back(g, g + p.numel());
    }
  }

  const double eps = opts.eps;
  const double floor = 1e-6;
  double max_rel = 0.0;
  for (size_t pi = 0; pi < params.size(); ++pi) {
    Tensor<T>& p = const_cast<Tensor<T>&>(params[pi]);
    const int64_t n = p.numel();
    int64_t step = 1;
    if (opts.max_elems_per_param > 0 && n > opts.max_elems_per_param)
      step = (n + opts.max_elems_per_param - 1) / opts.max_elems_per_param;
    for (int64_t i = 0; i < n; i += step) {
      const T saved = p.data()[i];
      p.data()[i] = saved + static_cast<T>(eps);
      const double up = static_cast<double>(f().item());
      p.data()[i] = saved - static_cast<T>(eps);
      const double dn = static_cast<double>(f().item());
      p.data()[i] = saved;
      const double numeric = (up - dn) / (2.0 * eps);
      const double a = static_cast<double>(analytic[pi][static_cast<size_t>(i)]);
      const double rel = std::abs(a - numeric) / std::max(floor, std::abs(a) + std::abs(numeric));
      max_rel = std::max(max_rel, rel);
    }
  }
  return max_rel;
}

template double grad_check<float>(const std::function<Tensor<float>()>&,
                                  const std::vector<Tensor<float>>&, const GradCheckOptions&);
template double grad_check<double>(const std::function<Tensor<double>()>&,
                                   const std::vector<Tensor<double>>&, const GradCheckOptions&);

}  // namespace lsen
