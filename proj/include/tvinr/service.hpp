// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <atomic>
#include <chrono>
#include <cstdint>
#include <cstdio>
#include <iostream>
#include <memory>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <httplib.h>
#include <json.hpp>

#include "tvinr/json_fields.hpp"
#include "tvinr/pipeline.hpp"
#include "tvinr/png.hpp"
#include "tvinr/renderer.hpp"

namespace tvinr::service {

using nlohmann::json;

inline constexpr const char* kLatencyHeader = "X-Render-Latency-Ms";

struct ServiceOptions {
  std::int64_t max_pixels = 1024 * 1024;
  render::ArmConfig arm{};
};

struct RenderRequest {
  double t = 0.0;
  render::Camera camera{};
  std::string tf_id = "hot";
  std::optional<render::TransferFunction> tf;
};

/// Client error with an HTTP status and the offending field.
struct RequestError : ArgumentError {
  RequestError(int status, std::string field, const std::string& msg)
      : ArgumentError(msg), status_(status), field_(std::move(field)) {}
  int status() const noexcept { return status_; }
  const std::string& field() const noexcept { return field_; }

 private:
  int status_;
  std::string field_;
};

struct HttpResult {
  int status = 200;
  std::string content_type = "application/json";
  std::string body;
  std::vector<std::pair<std::string, std::string>> headers;
};

inline HttpResult json_result(int status, const json& j) { return {status, "application/json", j.dump(), {}}; }

/// Stateless render endpoints over one immutable trained model.
class RenderService {
 public:
  RenderService(pipeline::TrainedModel model, ServiceOptions opts)
      : model_(std::move(model)), opts_(opts) {
    if (opts_.max_pixels < 1) throw ArgumentError("max_pixels must be positive");
  }

  const pipeline::TrainedModel& model() const { return model_; }
  const ServiceOptions& options() const { return opts_; }

  json meta() const {
    const auto& d = model_.volume_dims;
    json tf_ids = json::array();
    for (const auto& t : render::builtin_transfer_functions()) tf_ids.push_back(t.id);
    return {{"api_version", 1},
            {"key_times", model_.model.encoder.key_times()},
            {"fbb", coreset::fbb_to_json(model_.fbb)},
            {"dims", {d.x, d.y, d.z}},
            {"tf_ids", tf_ids},
            {"limits", {{"max_pixels", opts_.max_pixels}, {"t_min", model_.t_min()}, {"t_max", model_.t_max()}}},
            {"default_camera", render::camera_to_json(render::Camera{})}};
  }

  json transfer_functions() const {
    json out = json::array();
    for (const auto& t : render::builtin_transfer_functions()) out.push_back({{"id", t.id}, {"points", t.tf.to_json()}});
    return out;
  }

  RenderRequest parse_request(const std::string& body) const {
    const json doc = json::parse(body, nullptr, false);
    if (doc.is_discarded()) throw RequestError(400, "<body>", "request body is not valid JSON");
    try {
      const Fields f(doc, "");
      f.reject_unknown({"t", "camera", "width", "height", "transfer_function"});
      RenderRequest r;
      r.t = f.number("t");
      if (!(r.t >= model_.t_min() && r.t <= model_.t_max()))
        throw FieldError("t", "must lie in the key range [" + std::to_string(model_.t_min()) + ", " +
                                  std::to_string(model_.t_max()) + "]");
      if (f.has("camera")) r.camera = pipeline::detail::parse_camera(f.object("camera"));
      r.camera.width = static_cast<int>(f.integer_in("width", 256, 1, 1 << 20));
      r.camera.height = static_cast<int>(f.integer_in("height", 256, 1, 1 << 20));
      std::tie(r.tf_id, r.tf) = pipeline::parse_transfer_function(f, "transfer_function", r.tf_id);
      try {
        r.camera.validate();
      } catch (const ArgumentError& e) {
        throw FieldError("camera", e.what());
      }
      if (static_cast<std::int64_t>(r.camera.width) * r.camera.height > opts_.max_pixels)
        throw RequestError(413, "width", "image of " + std::to_string(r.camera.width) + "x" + std::to_string(r.camera.height) +
                                             " exceeds the limit of " + std::to_string(opts_.max_pixels) + " pixels");
      return r;
    } catch (const FieldError& e) {
      throw RequestError(400, e.field(), e.what());
    }
  }

  /// PNG bytes plus the wall time of the render itself.
  std::pair<std::vector<std::uint8_t>, double> render_png(const RenderRequest& r) const {
    const auto& tf = r.tf ? *r.tf : render::builtin_transfer_function(r.tf_id);
    const auto res = pipeline::render_trained(model_, r.t, r.camera, tf, opts_.arm, false);
    return {png::encode(res.image), res.stats.seconds};
  }

  HttpResult handle_render(const std::string& body) const {
    const auto start = std::chrono::steady_clock::now();
    try {
      const auto req = parse_request(body);
      const auto bytes = render_png(req).first;
      const double total_ms = std::chrono::duration<double, std::milli>(std::chrono::steady_clock::now() - start).count();
      char ms[32];
      std::snprintf(ms, sizeof ms, "%.3f", total_ms);
      return {200, "image/png", std::string(bytes.begin(), bytes.end()), {{kLatencyHeader, ms}, {"Cache-Control", "no-store"}}};
    } catch (const RequestError& e) {
      return json_result(e.status(), {{"error", e.status() == 413 ? "payload_too_large" : "bad_request"},
                                      {"field", e.field()},
                                      {"message", e.what()}});
    } catch (const std::exception& e) {
      return internal_error(e.what());
    }
  }

  HttpResult internal_error(const std::string& what) const {
    const auto id = next_error_id();
    std::cerr << "error " << id << ": " << what << std::endl;
    return json_result(500, {{"error", "internal"}, {"error_id", id}, {"message", "render failed; see server log for " + id}});
  }

  void mount(httplib::Server& s) const {
    auto send = [](httplib::Response& res, const HttpResult& r) {
      res.status = r.status;
      for (const auto& [k, v] : r.headers) res.set_header(k, v);
      res.set_content(r.body, r.content_type);
    };
    s.Get("/healthz", [](const httplib::Request&, httplib::Response& res) { res.set_content("ok", "text/plain"); });
    s.Get("/api/meta", [this, send](const httplib::Request&, httplib::Response& res) { send(res, json_result(200, meta())); });
    s.Get("/api/transfer-functions", [this, send](const httplib::Request&, httplib::Response& res) {
      send(res, json_result(200, transfer_functions()));
    });
    s.Post("/api/render", [this, send](const httplib::Request& req, httplib::Response& res) { send(res, handle_render(req.body)); });
    s.set_exception_handler([this, send](const httplib::Request&, httplib::Response& res, std::exception_ptr ep) {
      std::string what = "unknown exception";
      try {
        std::rethrow_exception(ep);
      } catch (const std::exception& e) {
        what = e.what();
      } catch (...) {
      }
      send(res, internal_error(what));
    });
    s.set_payload_max_length(std::size_t{1} << 20);
  }

 private:
  std::string next_error_id() const {
    static const auto epoch = static_cast<unsigned long long>(
        std::chrono::duration_cast<std::chrono::milliseconds>(std::chrono::system_clock::now().time_since_epoch()).count());
    char buf[40];
    std::snprintf(buf, sizeof buf, "E%011llx-%04llx", epoch & 0xfffffffffffull,
                  static_cast<unsigned long long>(errors_.fetch_add(1) + 1));
    return buf;
  }

  pipeline::TrainedModel model_;
  ServiceOptions opts_;
  mutable std::atomic<std::uint64_t> errors_{0};
};

/// Runs the service until the process is stopped. Port 0 picks a free port.
inline int serve(const pipeline::JobConfig& cfg, std::ostream& log) {
  const auto ckpt = cfg.serve.checkpoint.empty() ? cfg.output_dir / pipeline::kCheckpointName : cfg.serve.checkpoint;
  ServiceOptions opts;
  opts.max_pixels = cfg.serve.max_pixels;
  opts.arm = cfg.render.arm;
  opts.arm.threads = cfg.serve.render_threads;
  const RenderService svc(pipeline::load_trained(ckpt), opts);
  httplib::Server server;
  const int threads = cfg.serve.threads;
  server.new_task_queue = [threads] { return new httplib::ThreadPool(static_cast<std::size_t>(threads)); };
  svc.mount(server);
  int port = cfg.serve.port;
  if (port == 0) {
    port = server.bind_to_any_port(cfg.serve.host);
    if (port < 0) throw ArgumentError("cannot bind " + cfg.serve.host);
  } else if (!server.bind_to_port(cfg.serve.host, port)) {
    throw ArgumentError("cannot bind " + cfg.serve.host + ":" + std::to_string(port));
  }
  log << "listening on http://" << cfg.serve.host << ":" << port << std::endl;
  server.listen_after_bind();
  return 0;
}

}  // namespace tvinr::service
