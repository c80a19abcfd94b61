#pragma once

// HTTP clients for external prompt and segmentation services.
//
//   POST /prompt   multipart {image: PNG, task: text}   -> 200 {"prompt": "..."}
//   POST /segment  multipart {image: PNG, prompt: text} -> 200 PNG mask (0/255)
//
// Error responses carry JSON {code, message}.

#include <chrono>
#include <string>

#include "omnifuse/mask_provider.hpp"

namespace omnifuse {

class HttpPromptBackend final : public PromptBackend {
 public:
  /// `base_url` like "http://127.0.0.1:8080".
  explicit HttpPromptBackend(std::string base_url, std::chrono::milliseconds timeout = kDefaultBackendTimeout);
  std::string name() const override { return "http-prompt:" + base_url_; }
  std::string generate(const TaskContext& ctx, const RgbImage& rgb) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

class HttpMaskBackend final : public MaskBackend {
 public:
  explicit HttpMaskBackend(std::string base_url, std::chrono::milliseconds timeout = kDefaultBackendTimeout);
  std::string name() const override { return "http-mask:" + base_url_; }
  SegMask segment(const std::string& prompt, const RgbImage& rgb, std::int64_t frame_idx) override;

 private:
  std::string base_url_;
  std::chrono::milliseconds timeout_;
};

/// Human-readable message from a `{code, message}` error body, or the raw
/// body when it is not JSON.
std::string describe_error_body(const std::string& body);

}  // namespace omnifuse
