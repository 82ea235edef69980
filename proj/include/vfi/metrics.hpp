#pragma once

#include "vfi/imaging.hpp"

namespace vfi {

struct MetricReport {
  double psnr = 0.0;  // dB, +inf for identical frames
  double ssim = 0.0;
  double l1 = 0.0;
};

// 10 log10(1 / MSE) with MSE over all channels jointly, peak 1.0.
double psnr(const Frame& a, const Frame& b);

// Single-scale SSIM: 11x11 Gaussian window (sigma 1.5), C1 = 0.01^2,
// C2 = 0.03^2, averaged over window positions fully inside the image and
// then over channels. Requires min(width, height) >= 11.
double ssim(const Frame& a, const Frame& b);

// Mean absolute difference over all samples.
double l1_loss(const Frame& a, const Frame& b);

// d l1_loss / d a: sign(a - b) / N, with zero where a == b.
Frame l1_loss_gradient(const Frame& a, const Frame& b);

MetricReport measure(const Frame& a, const Frame& b);

}  // namespace vfi
