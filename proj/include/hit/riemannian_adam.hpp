#pragma once

#include <cmath>
#include <string>
#include <vector>

#include "hit/embedding_table.hpp"
#include "hit/error.hpp"
#include "hit/loss.hpp"
#include "hit/manifold.hpp"

namespace hit {

struct AdamConfig {
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Adam on the Poincare ball for a row-sparse embedding table.
///
/// Each touched row x with Euclidean gradient g is updated as
///   r = g (1 - c|x|^2)^2 / 4            (Riemannian gradient)
///   m = b1 m + (1 - b1) r
///   v = b2 v + (1 - b2) lambda_x^2 r*r  (componentwise metric norm)
///   x = project(x - lr * m_hat / (sqrt(v_hat) + eps))
/// Untouched rows keep their moments and are not moved.
class RiemannianAdam {
 public:
  RiemannianAdam(std::size_t rows, std::size_t dim, AdamConfig cfg = {})
      : cfg_(cfg), dim_(dim), m_(rows * dim, 0.0), v_(rows * dim, 0.0) {}

  std::size_t steps() const { return step_; }
  std::span<const double> first_moment() const { return m_; }
  std::span<const double> second_moment() const { return v_; }

  void step(EmbeddingTable& table, const RowGradients& grads, double lr) {
    if (grads.dim() != dim_ || table.dim() != dim_ || table.rows() * dim_ != m_.size())
      throw Error(ErrorKind::DimensionMismatch, "training", "optimizer state does not match table");
    ++step_;
    const double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(step_));
    const double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(step_));
    const auto& man = table.manifold();
    for (std::size_t s = 0; s < grads.size(); ++s) {
      const EntityId e = grads.ids()[s];
      const auto g = grads.grad(s);
      for (std::size_t i = 0; i < dim_; ++i) {
        if (!std::isfinite(g[i]))
          throw Error(ErrorKind::NumericInstability, "training",
                      "non-finite gradient for entity #" + std::to_string(e) + " at step " +
                          std::to_string(step_) + "; training aborted");
      }
      auto x = table.row_mut(e);
      const double lam = conformal_factor(x, man);
      const Vector r = egrad_to_rgrad(x, g, man);
      double* m = m_.data() + static_cast<std::size_t>(e) * dim_;
      double* v = v_.data() + static_cast<std::size_t>(e) * dim_;
      for (std::size_t i = 0; i < dim_; ++i) {
        m[i] = cfg_.beta1 * m[i] + (1.0 - cfg_.beta1) * r[i];
        v[i] = cfg_.beta2 * v[i] + (1.0 - cfg_.beta2) * lam * lam * r[i] * r[i];
        x[i] -= lr * (m[i] / bc1) / (std::sqrt(v[i] / bc2) + cfg_.eps);
      }
      project_inplace(x, man);
    }
  }

 private:
  AdamConfig cfg_;
  std::size_t dim_;
  std::size_t step_ = 0;
  std::vector<double> m_;
  std::vector<double> v_;
};

}  // namespace hit
