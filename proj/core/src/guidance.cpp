#include <chrono>
#include <cmath>
#include <cstdlib>
#include <cstring>
#include <thread>

// Eigen before httplib: <resolv.h> defines a `_res` macro that clashes with Eigen internals.
#include "splatcage/error.hpp"
#include "splatcage/guidance.hpp"
#include "splatcage/hash.hpp"
#include "splatcage/tps.hpp"

#include <httplib.h>
#include <json.hpp>

namespace splatcage {

using nlohmann::json;

GuidanceResponse MockGuidance::sds_gradient(const GuidanceRequest& request) const {
  const RgbImage blurred = gaussian_blur(request.rendered, sigma_);
  GuidanceResponse r;
  r.grad = RgbImage(request.rendered.width, request.rendered.height);
  for (std::size_t i = 0; i < r.grad.data.size(); ++i) r.grad.data[i] = lambda_ * (request.rendered.data[i] - blurred.data[i]);
  return r;
}

RgbImage MockGuidance::sketch_to_reference(const ReferenceRequest& request) const {
  const RgbImage& render = request.render;
  if (!render.same_size(request.sketch)) throw Error(ErrorCode::DimensionMismatch, "render and sketch differ in size");
  SilhouetteMask shape(render.width, render.height);
  for (std::size_t i = 0; i < shape.pixels(); ++i) {
    const double m = std::max({render.data[3 * i], render.data[3 * i + 1], render.data[3 * i + 2]});
    shape.data[i] = m > 0.5 / 255.0 ? 1.0 : 0.0;
  }
  return tps_warp(render, shape, threshold(request.sketch, 0.5));
}

HttpGuidanceConfig apply_env(HttpGuidanceConfig config) {
  if (const char* url = std::getenv("SPLATCAGE_GUIDANCE_URL"); url && *url) config.endpoint = url;
  if (const char* t = std::getenv("SPLATCAGE_GUIDANCE_TIMEOUT"); t && *t) config.timeout_seconds = std::atof(t);
  return config;
}

HttpGuidance::HttpGuidance(HttpGuidanceConfig config) : config_(std::move(config)) {
  if (config_.endpoint.rfind("http://", 0) != 0) {
    throw Error(ErrorCode::InvalidArgument, "guidance endpoint must start with http://");
  }
}

std::string HttpGuidance::post(const std::string& path, const std::string& body) const {
  // Split "http://host:port/prefix" into the client origin and path prefix.
  const auto slash = config_.endpoint.find('/', 7);
  const std::string origin = config_.endpoint.substr(0, slash);
  std::string prefix = slash == std::string::npos ? "" : config_.endpoint.substr(slash);
  while (!prefix.empty() && prefix.back() == '/') prefix.pop_back();

  httplib::Client client(origin);
  const auto timeout = std::chrono::duration<double>(config_.timeout_seconds);
  const auto sec = std::chrono::duration_cast<std::chrono::seconds>(timeout);
  const auto usec = std::chrono::duration_cast<std::chrono::microseconds>(timeout - sec);
  client.set_connection_timeout(sec.count(), usec.count());
  client.set_read_timeout(sec.count(), usec.count());
  client.set_write_timeout(sec.count(), usec.count());

  std::string last_error;
  const std::size_t attempts = config_.retry_backoff_seconds.size() + 1;
  for (std::size_t attempt = 0; attempt < attempts; ++attempt) {
    if (attempt > 0) {
      std::this_thread::sleep_for(std::chrono::duration<double>(config_.retry_backoff_seconds[attempt - 1]));
    }
    auto res = client.Post(prefix + path, body, "application/json");
    if (!res) {
      last_error = httplib::to_string(res.error());
      continue;
    }
    if (res->status >= 500) {
      last_error = "HTTP " + std::to_string(res->status);
      continue;
    }
    if (res->status != 200) throw Error(ErrorCode::BadResponse, "guidance service answered HTTP " + std::to_string(res->status));
    return res->body;
  }
  throw Error(ErrorCode::ServiceUnavailable,
              "guidance service unreachable after " + std::to_string(attempts) + " attempts: " + last_error);
}

namespace {

void check_dims(int w, int h) {
  if (w <= 0 || h <= 0 || w > kMaxGuidanceDim || h > kMaxGuidanceDim) {
    throw Error(ErrorCode::BadResponse, "image dimensions outside [1, 2048]");
  }
}

}  // namespace

GuidanceResponse HttpGuidance::sds_gradient(const GuidanceRequest& request) const {
  check_dims(request.rendered.width, request.rendered.height);
  if (!request.rendered.same_size(request.reference)) {
    throw Error(ErrorCode::BadResponse, "rendered and reference images differ in size");
  }
  GuidanceResponse r = decode_sds_response(post("/v1/sds", encode_sds_request(request)));
  if (!r.grad.same_size(request.rendered)) throw Error(ErrorCode::BadResponse, "gradient size does not match the request");
  return r;
}

RgbImage HttpGuidance::sketch_to_reference(const ReferenceRequest& request) const {
  check_dims(request.render.width, request.render.height);
  if (!request.render.same_size(request.sketch)) throw Error(ErrorCode::BadResponse, "render and sketch differ in size");
  RgbImage out = decode_reference_response(post("/v1/sketch2ref", encode_reference_request(request)));
  if (!out.same_size(request.render)) throw Error(ErrorCode::BadResponse, "reference size does not match the request");
  return out;
}

std::unique_ptr<GuidanceClient> make_guidance(const std::string& spec) {
  if (spec.empty() || spec == "mock") return std::make_unique<MockGuidance>();
  HttpGuidanceConfig config;
  config.endpoint = spec;
  return std::make_unique<HttpGuidance>(apply_env(config));
}

// ---- wire format -----------------------------------------------------------

namespace {

json parse(std::string_view text) {
  try {
    return json::parse(text);
  } catch (const json::exception& e) {
    throw Error(ErrorCode::BadResponse, std::string("malformed JSON: ") + e.what());
  }
}

template <class T>
T field(const json& j, const char* name) {
  try {
    return j.at(name).get<T>();
  } catch (const json::exception&) {
    throw Error(ErrorCode::BadResponse, std::string("missing or mistyped field '") + name + "'");
  }
}

std::string png_b64(const RgbImage& img) { return base64_encode(encode_png(img)); }
std::string png_b64(const SilhouetteMask& img) { return base64_encode(encode_png(img)); }

RgbImage rgb_from_b64(const std::string& text) {
  try {
    return decode_png_rgb(base64_decode(text));
  } catch (const Error& e) {
    throw Error(ErrorCode::BadResponse, e.what());
  }
}

SilhouetteMask gray_from_b64(const std::string& text) {
  try {
    return decode_png_gray(base64_decode(text));
  } catch (const Error& e) {
    throw Error(ErrorCode::BadResponse, e.what());
  }
}

}  // namespace

std::string encode_sds_request(const GuidanceRequest& r) {
  json j;
  j["width"] = r.rendered.width;
  j["height"] = r.rendered.height;
  j["delta_elev"] = r.delta_elev;
  j["delta_azim"] = r.delta_azim;
  j["prompt"] = r.prompt;
  j["timestep_seed"] = r.timestep_seed;
  j["rendered_png"] = png_b64(r.rendered);
  j["reference_png"] = png_b64(r.reference);
  return j.dump();
}

GuidanceRequest decode_sds_request(std::string_view text) {
  const json j = parse(text);
  GuidanceRequest r;
  r.delta_elev = field<double>(j, "delta_elev");
  r.delta_azim = field<double>(j, "delta_azim");
  r.prompt = field<std::string>(j, "prompt");
  r.timestep_seed = field<std::uint64_t>(j, "timestep_seed");
  r.rendered = rgb_from_b64(field<std::string>(j, "rendered_png"));
  r.reference = rgb_from_b64(field<std::string>(j, "reference_png"));
  if (!r.rendered.same_size(field<int>(j, "width"), field<int>(j, "height")) || !r.rendered.same_size(r.reference)) {
    throw Error(ErrorCode::BadResponse, "declared size does not match the images");
  }
  if (!std::isfinite(r.delta_elev) || !std::isfinite(r.delta_azim)) throw Error(ErrorCode::BadResponse, "non-finite view delta");
  return r;
}

std::string encode_sds_response(const GuidanceResponse& r) {
  std::vector<float> f(r.grad.data.begin(), r.grad.data.end());
  json j;
  j["width"] = r.grad.width;
  j["height"] = r.grad.height;
  j["scale"] = r.scale;
  j["grad_f32"] = base64_encode(std::span<const std::uint8_t>(reinterpret_cast<const std::uint8_t*>(f.data()),
                                                              f.size() * sizeof(float)));
  return j.dump();
}

GuidanceResponse decode_sds_response(std::string_view text) {
  const json j = parse(text);
  const int w = field<int>(j, "width"), h = field<int>(j, "height");
  check_dims(w, h);
  GuidanceResponse r;
  r.scale = field<double>(j, "scale");
  std::vector<std::uint8_t> bytes;
  try {
    bytes = base64_decode(field<std::string>(j, "grad_f32"));
  } catch (const Error& e) {
    throw Error(ErrorCode::BadResponse, e.what());
  }
  r.grad = RgbImage(w, h);
  if (bytes.size() != r.grad.data.size() * sizeof(float)) throw Error(ErrorCode::BadResponse, "gradient payload size mismatch");
  std::vector<float> f(r.grad.data.size());
  std::memcpy(f.data(), bytes.data(), bytes.size());
  for (std::size_t i = 0; i < f.size(); ++i) {
    if (!std::isfinite(f[i])) throw Error(ErrorCode::BadResponse, "non-finite gradient value");
    r.grad.data[i] = f[i];
  }
  if (!std::isfinite(r.scale)) throw Error(ErrorCode::BadResponse, "non-finite scale");
  return r;
}

std::string encode_reference_request(const ReferenceRequest& r) {
  json j;
  j["width"] = r.render.width;
  j["height"] = r.render.height;
  j["prompt"] = r.prompt;
  j["render_png"] = png_b64(r.render);
  j["sketch_png"] = png_b64(r.sketch);
  return j.dump();
}

ReferenceRequest decode_reference_request(std::string_view text) {
  const json j = parse(text);
  ReferenceRequest r;
  r.prompt = field<std::string>(j, "prompt");
  r.render = rgb_from_b64(field<std::string>(j, "render_png"));
  r.sketch = gray_from_b64(field<std::string>(j, "sketch_png"));
  if (!r.render.same_size(field<int>(j, "width"), field<int>(j, "height")) || !r.render.same_size(r.sketch)) {
    throw Error(ErrorCode::BadResponse, "declared size does not match the images");
  }
  return r;
}

std::string encode_reference_response(const RgbImage& image) {
  json j;
  j["width"] = image.width;
  j["height"] = image.height;
  j["image_png"] = png_b64(image);
  return j.dump();
}

RgbImage decode_reference_response(std::string_view text) {
  const json j = parse(text);
  RgbImage img = rgb_from_b64(field<std::string>(j, "image_png"));
  if (!img.same_size(field<int>(j, "width"), field<int>(j, "height"))) {
    throw Error(ErrorCode::BadResponse, "declared size does not match the image");
  }
  return img;
}

}  // namespace splatcage
