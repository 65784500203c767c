#include "splatcage/error.hpp"
#include "splatcage/loss.hpp"

namespace splatcage {

double silhouette_loss(const SilhouetteMask& rendered, const SilhouetteMask& target) {
  if (!rendered.same_size(target)) throw Error(ErrorCode::DimensionMismatch, "rendered and target masks differ in size");
  double sum = 0.0;
  for (std::size_t i = 0; i < rendered.pixels(); ++i) {
    const double d = rendered.data[i] - target.data[i];
    sum += d * d;
  }
  return sum;
}

SilhouetteMask silhouette_loss_grad(const SilhouetteMask& rendered, const SilhouetteMask& target, double weight) {
  if (!rendered.same_size(target)) throw Error(ErrorCode::DimensionMismatch, "rendered and target masks differ in size");
  SilhouetteMask g(rendered.width, rendered.height);
  for (std::size_t i = 0; i < rendered.pixels(); ++i) g.data[i] = weight * 2.0 * (rendered.data[i] - target.data[i]);
  return g;
}

}  // namespace splatcage
