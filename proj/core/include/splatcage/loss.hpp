#pragma once

#include "splatcage/image.hpp"

namespace splatcage {

/// Sum over pixels of (rendered - target)^2. Throws DimensionMismatch.
double silhouette_loss(const SilhouetteMask& rendered, const SilhouetteMask& target);

/// d(silhouette_loss)/d(rendered) = 2 (rendered - target), scaled by `weight`.
SilhouetteMask silhouette_loss_grad(const SilhouetteMask& rendered, const SilhouetteMask& target, double weight = 1.0);

}  // namespace splatcage
