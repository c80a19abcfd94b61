#include "omnifuse/http_backends.hpp"

#include <httplib.h>

#include <nlohmann/json.hpp>

#include "omnifuse/error.hpp"
#include "omnifuse/image_io.hpp"

namespace omnifuse {

namespace {

httplib::Client make_client(const std::string& base_url, std::chrono::milliseconds timeout) {
  httplib::Client client(base_url);
  if (!client.is_valid()) throw BackendError("invalid service URL '" + base_url + "'");
  client.set_connection_timeout(timeout);
  client.set_read_timeout(timeout);
  client.set_write_timeout(timeout);
  return client;
}

std::string png_string(const RgbImage& rgb) {
  const auto bytes = encode_png(rgb, 1);
  return {bytes.begin(), bytes.end()};
}

httplib::Response require_ok(httplib::Result result, const std::string& what) {
  if (!result) {
    throw BackendError(what + " unreachable: " + httplib::to_string(result.error()));
  }
  if (result->status < 200 || result->status >= 300) {
    throw BackendError(what + " answered HTTP " + std::to_string(result->status) + ": " +
                           describe_error_body(result->body),
                       result->status);
  }
  return std::move(*result);
}

}  // namespace

std::string describe_error_body(const std::string& body) {
  const auto j = nlohmann::json::parse(body, nullptr, false);
  if (j.is_object() && j.contains("message")) {
    std::string out = j["message"].is_string() ? j["message"].get<std::string>() : j["message"].dump();
    if (j.contains("code")) out = "[" + (j["code"].is_string() ? j["code"].get<std::string>() : j["code"].dump()) + "] " + out;
    return out;
  }
  return body;
}

HttpPromptBackend::HttpPromptBackend(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

std::string HttpPromptBackend::generate(const TaskContext& ctx, const RgbImage& rgb) {
  auto client = make_client(base_url_, timeout_);
  const httplib::MultipartFormDataItems items = {
      {"image", png_string(rgb), "frame.png", "image/png"},
      {"task", ctx.task_text, "", "text/plain"},
  };
  const auto res = require_ok(client.Post("/prompt", items), name());
  const auto j = nlohmann::json::parse(res.body, nullptr, false);
  if (!j.is_object() || !j.contains("prompt") || !j["prompt"].is_string()) {
    throw ProtocolError(name() + " returned a body without a string 'prompt'");
  }
  return j["prompt"].get<std::string>();
}

HttpMaskBackend::HttpMaskBackend(std::string base_url, std::chrono::milliseconds timeout)
    : base_url_(std::move(base_url)), timeout_(timeout) {}

SegMask HttpMaskBackend::segment(const std::string& prompt, const RgbImage& rgb, std::int64_t) {
  auto client = make_client(base_url_, timeout_);
  const httplib::MultipartFormDataItems items = {
      {"image", png_string(rgb), "frame.png", "image/png"},
      {"prompt", prompt, "", "text/plain"},
  };
  const auto res = require_ok(client.Post("/segment", items), name());
  const auto* data = reinterpret_cast<const std::uint8_t*>(res.body.data());
  SegMask mask = decode_mask_png({data, res.body.size()});
  mask.source = MaskSource::service;
  mask.prompt_text = prompt;
  mask.validate(rgb.width, rgb.height);
  return mask;
}

}  // namespace omnifuse
