#include "vfi/adapter.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <stdexcept>
#include <string>

namespace vfi {

const char* to_string(AdapterMode mode) {
  return mode == AdapterMode::direct ? "direct" : "feature_conditioned";
}

template <typename Tag>
AdapterTensor<Tag>::AdapterTensor(AdapterMode mode, int height, int width)
    : mode_(mode), height_(height), width_(width) {
  if (height <= 0 || width <= 0) throw std::invalid_argument("adapter dimensions must be positive");
  const std::size_t n = mode == AdapterMode::direct
                            ? 6 * pixel_count()
                            : static_cast<std::size_t>(kHeadInputs * kHeadOutputs + kHeadOutputs);
  values_.assign(n, 0.0);
}

template <typename Tag>
bool AdapterTensor<Tag>::all_finite() const {
  for (double v : values_) {
    if (!std::isfinite(v)) return false;
  }
  return true;
}

template class AdapterTensor<AdapterParamsTag>;
template class AdapterTensor<AdapterGradTag>;

AdapterParams init_identity(int height, int width, AdapterMode mode) {
  AdapterParams p(mode, height, width);
  if (mode == AdapterMode::direct) {
    for (auto d : {WarpDirection::toward_earlier, WarpDirection::toward_later}) {
      for (std::size_t i = 0; i < p.pixel_count(); ++i) p.alpha(d, i) = 1.0;
    }
  } else {
    p.head_bias(0) = 1.0;
  }
  return p;
}

bool is_identity(const AdapterParams& params) {
  return params == init_identity(params.height(), params.width(), params.mode());
}

AdaptedFlow apply(const AdapterParams& params, const FlowField& flow,
                  const FeatureStack* features, WarpDirection direction) {
  if (!flow.same_extent(params.width(), params.height())) {
    throw std::invalid_argument("adapter apply: flow extent does not match adapter");
  }
  const bool feature_mode = params.mode() == AdapterMode::feature_conditioned;
  if (feature_mode && features == nullptr) {
    throw std::invalid_argument("adapter apply: feature mode requires features");
  }
  if (!feature_mode && features != nullptr) {
    throw std::invalid_argument("adapter apply: direct mode takes no features");
  }
  if (feature_mode && (features->width() != flow.width() || features->height() != flow.height())) {
    throw std::invalid_argument("adapter apply: feature extent does not match flow");
  }

  AdaptedFlow out{FlowField(flow.width(), flow.height()), {}};
  ApplyTape& tape = out.tape;
  tape.mode = params.mode();
  tape.direction = direction;
  tape.height = params.height();
  tape.width = params.width();
  tape.input = flow;

  const std::size_t n = flow.pixel_count();
  if (!feature_mode) {
    for (std::size_t i = 0; i < n; ++i) {
      const double a = params.alpha(direction, i);
      out.flow.u()[i] = a * flow.u()[i] + params.beta_u(direction, i);
      out.flow.v()[i] = a * flow.v()[i] + params.beta_v(direction, i);
    }
    return out;
  }

  tape.features = *features;
  for (int k = 0; k < AdapterParams::kHeadInputs; ++k) {
    for (int j = 0; j < AdapterParams::kHeadOutputs; ++j) {
      tape.head[static_cast<std::size_t>(k * AdapterParams::kHeadOutputs + j)] =
          params.head_weight(k, j);
    }
  }
  for (std::size_t i = 0; i < n; ++i) {
    const auto m = features->at(i);
    std::array<double, AdapterParams::kHeadOutputs> o{};
    for (int j = 0; j < AdapterParams::kHeadOutputs; ++j) {
      double acc = params.head_bias(j);
      for (int k = 0; k < AdapterParams::kHeadInputs; ++k) {
        acc += params.head_weight(k, j) * m[static_cast<std::size_t>(k)];
      }
      o[static_cast<std::size_t>(j)] = acc;
    }
    out.flow.u()[i] = o[0] * flow.u()[i] + o[1];
    out.flow.v()[i] = o[0] * flow.v()[i] + o[2];
  }
  return out;
}

void accumulate_backward(const ApplyTape& tape, const FlowField& upstream, AdapterGrad& grad,
                         FeatureStack* feature_grad) {
  if (!upstream.same_extent(tape.width, tape.height) ||
      !tape.input.same_extent(tape.width, tape.height)) {
    throw std::invalid_argument("adapter backward: upstream/tape shape mismatch");
  }
  if (grad.mode() != tape.mode || grad.height() != tape.height || grad.width() != tape.width) {
    throw std::invalid_argument("adapter backward: gradient layout does not match tape");
  }
  const std::size_t n = upstream.pixel_count();
  const auto fu = tape.input.u();
  const auto fv = tape.input.v();
  const auto gu = upstream.u();
  const auto gv = upstream.v();

  if (tape.mode == AdapterMode::direct) {
    for (std::size_t i = 0; i < n; ++i) {
      grad.alpha(tape.direction, i) += gu[i] * fu[i] + gv[i] * fv[i];
      grad.beta_u(tape.direction, i) += gu[i];
      grad.beta_v(tape.direction, i) += gv[i];
    }
    return;
  }

  if (!tape.features) throw std::invalid_argument("adapter backward: tape lacks features");
  const FeatureStack& feats = *tape.features;
  if (feature_grad && (feature_grad->width() != tape.width || feature_grad->height() != tape.height)) {
    throw std::invalid_argument("adapter backward: feature gradient shape mismatch");
  }
  for (std::size_t i = 0; i < n; ++i) {
    const std::array<double, 3> d_out = {gu[i] * fu[i] + gv[i] * fv[i], gu[i], gv[i]};
    const auto m = feats.at(i);
    for (int j = 0; j < AdapterGrad::kHeadOutputs; ++j) {
      const double dj = d_out[static_cast<std::size_t>(j)];
      grad.head_bias(j) += dj;
      for (int k = 0; k < AdapterGrad::kHeadInputs; ++k) {
        grad.head_weight(k, j) += m[static_cast<std::size_t>(k)] * dj;
      }
    }
    if (feature_grad) {
      auto dm = feature_grad->at(i);
      for (int k = 0; k < AdapterGrad::kHeadInputs; ++k) {
        double acc = 0.0;
        for (int j = 0; j < AdapterGrad::kHeadOutputs; ++j) {
          acc += tape.head[static_cast<std::size_t>(k * AdapterGrad::kHeadOutputs + j)] *
                 d_out[static_cast<std::size_t>(j)];
        }
        dm[static_cast<std::size_t>(k)] += acc;
      }
    }
  }
}

AdapterGrad backward(const ApplyTape& tape, const FlowField& upstream) {
  AdapterGrad grad(tape.mode, tape.height, tape.width);
  accumulate_backward(tape, upstream, grad);
  return grad;
}

void sgd_step(AdapterParams& params, const AdapterGrad& grad, double eta) {
  if (!(eta >= 0.0) || !std::isfinite(eta)) {
    throw std::invalid_argument("sgd_step: learning rate must be finite and >= 0");
  }
  if (!params.same_layout(grad)) throw std::invalid_argument("sgd_step: layout mismatch");
  if (!grad.all_finite()) throw std::domain_error("sgd_step: non-finite gradient, step rejected");
  auto p = params.values();
  const auto g = grad.values();
  for (std::size_t i = 0; i < p.size(); ++i) p[i] -= eta * g[i];
}

namespace {
constexpr std::size_t kHeaderBytes = 12;
}

std::vector<unsigned char> serialize_adapter(const AdapterParams& params) {
  static_assert(std::endian::native == std::endian::little);
  const auto values = params.values();
  std::vector<unsigned char> bytes(kHeaderBytes + values.size() * sizeof(double));
  const auto mode = static_cast<std::uint32_t>(params.mode());
  const std::int32_t h = params.height();
  const std::int32_t w = params.width();
  std::memcpy(bytes.data(), &mode, 4);
  std::memcpy(bytes.data() + 4, &h, 4);
  std::memcpy(bytes.data() + 8, &w, 4);
  std::memcpy(bytes.data() + kHeaderBytes, values.data(), values.size() * sizeof(double));
  return bytes;
}

AdapterParams deserialize_adapter(std::span<const unsigned char> bytes) {
  if (bytes.size() < kHeaderBytes) throw std::runtime_error("adapter blob: truncated header");
  std::uint32_t mode = 0;
  std::int32_t h = 0, w = 0;
  std::memcpy(&mode, bytes.data(), 4);
  std::memcpy(&h, bytes.data() + 4, 4);
  std::memcpy(&w, bytes.data() + 8, 4);
  if (mode > 1) throw std::runtime_error("adapter blob: unknown mode " + std::to_string(mode));
  if (h <= 0 || w <= 0) throw std::runtime_error("adapter blob: bad dimensions");
  AdapterParams p(static_cast<AdapterMode>(mode), h, w);
  auto values = p.values();
  if (bytes.size() != kHeaderBytes + values.size() * sizeof(double)) {
    throw std::runtime_error("adapter blob: payload size mismatch");
  }
  std::memcpy(values.data(), bytes.data() + kHeaderBytes, values.size() * sizeof(double));
  return p;
}

void write_adapter(const AdapterParams& params, const std::filesystem::path& path) {
  const auto bytes = serialize_adapter(params);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) throw std::runtime_error("write failed for " + path.string());
}

AdapterParams read_adapter(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot open " + path.string());
  const std::vector<unsigned char> bytes{std::istreambuf_iterator<char>(in),
                                         std::istreambuf_iterator<char>()};
  return deserialize_adapter(bytes);
}

}  // namespace vfi
