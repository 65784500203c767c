#pragma once

#include <cstdint>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "splatcage/image.hpp"

namespace splatcage {

struct GuidanceRequest {
  RgbImage rendered;   // x at the query view
  RgbImage reference;  // I_ref at the sketch view
  double delta_elev = 0.0;
  double delta_azim = 0.0;
  std::string prompt;
  std::uint64_t timestep_seed = 0;
};

struct GuidanceResponse {
  RgbImage grad;  // dL/dx, same size as the request images
  double scale = 1.0;
};

struct ReferenceRequest {
  RgbImage render;
  SilhouetteMask sketch;
  std::string prompt;
};

/// Image-space guidance provider. Implementations must be safe to call
/// concurrently from several threads.
class GuidanceClient {
 public:
  virtual ~GuidanceClient() = default;
  virtual GuidanceResponse sds_gradient(const GuidanceRequest& request) const = 0;
  virtual RgbImage sketch_to_reference(const ReferenceRequest& request) const = 0;
  virtual std::string name() const = 0;
};

/// Deterministic local stand-in. The gradient is lambda (x - blur(x, 2 px)),
/// a smoothness pull, not a diffusion prior. The reference image is the
/// render warped by a thin-plate spline from its silhouette (non-black
/// pixels) onto the sketch.
class MockGuidance final : public GuidanceClient {
 public:
  explicit MockGuidance(double lambda = 0.01, double sigma = 2.0) : lambda_(lambda), sigma_(sigma) {}
  GuidanceResponse sds_gradient(const GuidanceRequest& request) const override;
  RgbImage sketch_to_reference(const ReferenceRequest& request) const override;
  std::string name() const override { return "mock"; }

 private:
  double lambda_, sigma_;
};

struct HttpGuidanceConfig {
  std::string endpoint;  // e.g. http://127.0.0.1:8090 (optional path prefix)
  double timeout_seconds = 60.0;
  std::vector<double> retry_backoff_seconds{0.5, 1.0, 2.0};  // one entry per retry
};

/// Overrides from SPLATCAGE_GUIDANCE_URL and SPLATCAGE_GUIDANCE_TIMEOUT.
HttpGuidanceConfig apply_env(HttpGuidanceConfig config);

/// Client for POST /v1/sds and /v1/sketch2ref. Connection failures and 5xx
/// answers are retried per the backoff list, then ServiceUnavailable;
/// malformed answers raise BadResponse.
class HttpGuidance final : public GuidanceClient {
 public:
  explicit HttpGuidance(HttpGuidanceConfig config);
  GuidanceResponse sds_gradient(const GuidanceRequest& request) const override;
  RgbImage sketch_to_reference(const ReferenceRequest& request) const override;
  std::string name() const override { return config_.endpoint; }

 private:
  std::string post(const std::string& path, const std::string& body) const;
  HttpGuidanceConfig config_;
};

/// "mock" or an http:// endpoint.
std::unique_ptr<GuidanceClient> make_guidance(const std::string& spec);

inline constexpr int kMaxGuidanceDim = 2048;

// Wire format: JSON header fields plus base64 payloads. Images travel as
// 8-bit PNG, gradients as little-endian float32.
std::string encode_sds_request(const GuidanceRequest& request);
GuidanceRequest decode_sds_request(std::string_view json);
std::string encode_sds_response(const GuidanceResponse& response);
GuidanceResponse decode_sds_response(std::string_view json);
std::string encode_reference_request(const ReferenceRequest& request);
ReferenceRequest decode_reference_request(std::string_view json);
std::string encode_reference_response(const RgbImage& image);
RgbImage decode_reference_response(std::string_view json);

}  // namespace splatcage
