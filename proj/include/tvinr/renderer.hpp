// Copyright 2026 The tvinr Authors
// SPDX-License-Identifier: Apache-2.0
#pragma once

#include <algorithm>
#include <array>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <exception>
#include <limits>
#include <span>
#include <string>
#include <thread>
#include <vector>

#include <json.hpp>

#include "tvinr/common.hpp"
#include "tvinr/feature_coreset.hpp"
#include "tvinr/metrics.hpp"
#include "tvinr/model.hpp"
#include "tvinr/occupancy.hpp"

namespace tvinr::render {

using metrics::Image;

struct Camera {
  Vec3d eye{0, 0, 4};
  Vec3d target{0, 0, 0};
  Vec3d up{0, 1, 0};
  double fov_deg = 40.0;
  int width = 128, height = 128;

  void validate() const {
    if (width < 1 || height < 1) throw ArgumentError("camera image size must be positive");
    if (!(fov_deg > 0.0 && fov_deg < 180.0)) throw ArgumentError("camera fov must be in (0, 180) degrees");
    const Vec3d f = target - eye;
    if (!(length(f) > 0.0)) throw ArgumentError("camera eye and target coincide");
    if (!(length(cross(f, up)) > 1e-12 * length(f) * length(up))) throw ArgumentError("camera up is parallel to the view direction");
  }
};

inline nlohmann::json camera_to_json(const Camera& c) {
  return {{"eye", {c.eye.x, c.eye.y, c.eye.z}},
          {"target", {c.target.x, c.target.y, c.target.z}},
          {"up", {c.up.x, c.up.y, c.up.z}},
          {"fov", c.fov_deg},
          {"width", c.width},
          {"height", c.height}};
}

/// Piecewise-linear scalar -> RGBA map.
class TransferFunction {
 public:
  struct Point {
    double s;
    float r, g, b, a;
  };

  TransferFunction() : TransferFunction({{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}}) {}
  explicit TransferFunction(std::vector<Point> pts) : pts_(std::move(pts)) {
    if (pts_.size() < 2) throw ArgumentError("transfer function needs at least two control points");
    if (pts_.front().s != 0.0 || pts_.back().s != 1.0) throw ArgumentError("transfer function must span scalars 0..1");
    for (std::size_t i = 0; i < pts_.size(); ++i) {
      const auto& p = pts_[i];
      if (i && !(p.s >= pts_[i - 1].s)) throw ArgumentError("transfer function control points must be sorted");
      for (float c : {p.r, p.g, p.b, p.a})
        if (!(c >= 0.0f && c <= 1.0f)) throw ArgumentError("transfer function values must lie in [0, 1]");
    }
  }

  const std::vector<Point>& points() const { return pts_; }

  std::array<float, 4> operator()(double s) const {
    s = std::clamp(s, 0.0, 1.0);
    auto hi = std::upper_bound(pts_.begin(), pts_.end(), s, [](double v, const Point& p) { return v < p.s; });
    if (hi == pts_.end()) {
      const auto& p = pts_.back();
      return {p.r, p.g, p.b, p.a};
    }
    const auto& b = *hi;
    const auto& a = *(hi - 1);
    const double w = b.s > a.s ? (s - a.s) / (b.s - a.s) : 1.0;
    auto lerp = [w](float x, float y) { return static_cast<float>(x + (y - x) * w); };
    return {lerp(a.r, b.r), lerp(a.g, b.g), lerp(a.b, b.b), lerp(a.a, b.a)};
  }

  static TransferFunction from_json(const nlohmann::json& j) {
    std::vector<Point> pts;
    const auto& arr = j.is_object() ? j.at("points") : j;
    if (!arr.is_array()) throw ArgumentError("transfer function must be a list of control points");
    for (const auto& p : arr)
      pts.push_back({p.at("scalar").get<double>(), p.at("r").get<float>(), p.at("g").get<float>(), p.at("b").get<float>(),
                     p.at("a").get<float>()});
    return TransferFunction(std::move(pts));
  }

  nlohmann::json to_json() const {
    auto arr = nlohmann::json::array();
    for (const auto& p : pts_) arr.push_back({{"scalar", p.s}, {"r", p.r}, {"g", p.g}, {"b", p.b}, {"a", p.a}});
    return arr;
  }

 private:
  std::vector<Point> pts_;
};

struct NamedTf {
  std::string id;
  TransferFunction tf;
};

/// Built-in maps; all are fully transparent at scalar 0.
inline const std::vector<NamedTf>& builtin_transfer_functions() {
  static const std::vector<NamedTf> tfs{
      {"grayscale", TransferFunction({{0, 0, 0, 0, 0}, {1, 1, 1, 1, 1}})},
      {"hot", TransferFunction({{0, 0, 0, 0, 0}, {0.3, 0.8f, 0.1f, 0.0f, 0.02f}, {0.6, 1.0f, 0.7f, 0.1f, 0.2f}, {1, 1, 1, 0.9f, 0.8f}})},
      {"cool-warm", TransferFunction({{0, 0.23f, 0.3f, 0.75f, 0}, {0.5, 0.87f, 0.87f, 0.87f, 0.1f}, {1, 0.7f, 0.02f, 0.15f, 0.9f}})},
      {"feature", TransferFunction({{0, 0, 0, 0, 0}, {0.45, 0.2f, 0.4f, 0.9f, 0}, {0.55, 0.3f, 0.6f, 1.0f, 0.6f}, {1, 1, 1, 1, 1}})},
  };
  return tfs;
}

inline const TransferFunction& builtin_transfer_function(const std::string& id) {
  std::string known;
  for (const auto& t : builtin_transfer_functions()) {
    if (t.id == id) return t.tf;
    known += (known.empty() ? "" : ", ") + t.id;
  }
  throw ArgumentError("unknown transfer function '" + id + "' (available: " + known + ")");
}

/// Per-ray marching state. Samples sit at t_enter + i * step.
struct RayState {
  int pixel = 0;
  Vec3d origin, dir;
  double t_enter = 0.0, t_exit = -1.0;
  std::int64_t next_index = 0;
  std::int64_t samples_taken = 0;
  std::array<float, 4> rgba{0, 0, 0, 0};
  bool alive = false;

  Vec3d at(double t) const { return origin + dir * t; }
};

/// Slab test against [-1, 1]^3; returns false on a miss.
inline bool intersect_unit_box(const Vec3d& o, const Vec3d& d, double& t0, double& t1) {
  t0 = 0.0;
  t1 = std::numeric_limits<double>::infinity();
  for (int a = 0; a < 3; ++a) {
    if (d[a] == 0.0) {
      if (o[a] < -1.0 || o[a] > 1.0) return false;
      continue;
    }
    double ta = (-1.0 - o[a]) / d[a], tb = (1.0 - o[a]) / d[a];
    if (ta > tb) std::swap(ta, tb);
    t0 = std::max(t0, ta);
    t1 = std::min(t1, tb);
  }
  return t1 >= t0;
}

/// One primary ray per pixel centre (row-major from the top-left pixel).
inline std::vector<RayState> get_rays(const Camera& cam) {
  cam.validate();
  const Vec3d f = normalized(cam.target - cam.eye);
  const Vec3d r = normalized(cross(f, cam.up));
  const Vec3d u = cross(r, f);
  const double th = std::tan(cam.fov_deg * 0.5 * 3.14159265358979323846 / 180.0);
  const double aspect = static_cast<double>(cam.width) / cam.height;
  std::vector<RayState> rays(static_cast<std::size_t>(cam.width) * cam.height);
  for (int py = 0; py < cam.height; ++py)
    for (int px = 0; px < cam.width; ++px) {
      auto& ray = rays[static_cast<std::size_t>(py) * cam.width + px];
      const double sx = (2.0 * (px + 0.5) / cam.width - 1.0) * th * aspect;
      const double sy = (1.0 - 2.0 * (py + 0.5) / cam.height) * th;
      ray.pixel = py * cam.width + px;
      ray.origin = cam.eye;
      ray.dir = normalized(f + r * sx + u * sy);
      double t0, t1;
      ray.alive = intersect_unit_box(ray.origin, ray.dir, t0, t1);
      if (ray.alive) {
        ray.t_enter = t0;
        ray.t_exit = t1;
      }
    }
  return rays;
}

/// max(min(floor(N_r / N_a), cap), 1).
inline std::int64_t arm_pace(std::int64_t budget, std::int64_t alive, std::int64_t cap = 64) {
  if (alive < 1) throw ArgumentError("arm_pace: no alive rays");
  return std::max<std::int64_t>(std::min<std::int64_t>(budget / alive, cap), 1);
}

inline constexpr double kBoxDiagonal = 3.4641016151377544;  // |[-1,1]^3| diagonal

struct ArmConfig {
  bool adaptive = true;
  std::int64_t budget = 0;  // N_r; 0 means the initial alive-ray count
  std::int64_t pace_cap = 64;
  std::int64_t fixed_pace = 1;  // used when !adaptive
  std::int64_t max_samples_per_ray = 0;  // R_max; 0 means 2 * diagonal / step
  bool global_sample_cap = false;  // stop once all rays together took R_max samples
  double step = 0.0;  // 0 means diagonal / 512
  double reference_step = 0.0;  // opacity correction reference; 0 means diagonal / 512
  double termination = 0.99;
  bool skip_empty = true;
  std::array<float, 4> background{0, 0, 0, 1};
  int threads = 1;  // field evaluation workers; 0 means hardware concurrency

  double resolved_step() const { return step > 0.0 ? step : kBoxDiagonal / 512.0; }
  double resolved_reference() const { return reference_step > 0.0 ? reference_step : kBoxDiagonal / 512.0; }
  std::int64_t resolved_max_samples() const {
    return max_samples_per_ray > 0 ? max_samples_per_ray
                                   : static_cast<std::int64_t>(std::ceil(2.0 * kBoxDiagonal / resolved_step()));
  }
};

/// Advances a ray by up to `count` samples, skipping lattice positions whose
/// occupancy cell is empty without charging them to the budget. Positions
/// go to `out`; returns how many were produced. The ray is marked dead once
/// it leaves the box or hits its per-ray sample cap.
inline std::int64_t next_samples(RayState& ray, std::int64_t count, const coreset::OccupancyGrid* occ, double step,
                                 std::int64_t max_samples, std::vector<Vec3d>& out) {
  std::int64_t produced = 0;
  const std::int64_t last = static_cast<std::int64_t>(std::floor((ray.t_exit - ray.t_enter) / step));
  const Dims3 cells = occ ? occ->cells() : Dims3{1, 1, 1};
  while (produced < count && ray.samples_taken < max_samples) {
    if (ray.next_index > last) break;
    const double t = ray.t_enter + static_cast<double>(ray.next_index) * step;
    const Vec3d p = ray.at(t);
    if (occ) {
      Index3 c;
      if (!occ->cell_of(p, c)) {
        ++ray.next_index;
        continue;
      }
      if (!occ->test(c.x, c.y, c.z)) {
        // Jump to the last lattice point still inside this empty cell; the
        // following iterations re-check from there.
        double t_out = ray.t_exit;
        const std::int64_t ci[3] = {c.x, c.y, c.z};
        const std::int64_t n[3] = {cells.x, cells.y, cells.z};
        for (int a = 0; a < 3; ++a) {
          const double d = ray.dir[a];
          if (d == 0.0) continue;
          const double face = -1.0 + 2.0 * static_cast<double>(ci[a] + (d > 0 ? 1 : 0)) / static_cast<double>(n[a]);
          t_out = std::min(t_out, (face - ray.origin[a]) / d);
        }
        const auto j = static_cast<std::int64_t>(std::floor((t_out - ray.t_enter) / step));
        ray.next_index = std::max(ray.next_index + 1, j);
        continue;
      }
    }
    out.push_back(p);
    ++ray.next_index;
    ++ray.samples_taken;
    ++produced;
  }
  if (ray.next_index > last || ray.samples_taken >= max_samples) ray.alive = false;
  return produced;
}

/// Anything exposing eval(t, positions, values) over world positions in [-1, 1]^3.
template <class F>
concept ScalarField = requires(const F& f, double t, std::span<const Vec3d> p, std::span<float> v) { f.eval(t, p, v); };

/// Trained model over its feature box; zero elsewhere.
template <class Model>
class ModelField {
 public:
  ModelField(const Model& m, coreset::FeatureBoundingBox fbb) : model_(&m), fbb_(fbb) {}

  void eval(double t, std::span<const Vec3d> pos, std::span<float> out) const {
    nn::Workspace<Model> ws(*model_);
    for (std::size_t i = 0; i < pos.size(); ++i) {
      if (!coreset::inside_fbb(pos[i], fbb_)) {
        out[i] = 0.0f;
        continue;
      }
      const Vec3d q = coreset::to_fbb_coords(pos[i], fbb_);
      out[i] = static_cast<float>(nn::forward_one(*model_, Query4<double>{t, q.x, q.y, q.z}, ws));
    }
  }

 private:
  const Model* model_;
  coreset::FeatureBoundingBox fbb_;
};

/// Trilinear interpolation of one vertex grid spanning [-1, 1]^3 (time ignored).
class GridField {
 public:
  GridField(Dims3 dims, std::vector<float> values) : dims_(dims), values_(std::move(values)) {
    if (static_cast<std::int64_t>(values_.size()) != dims_.count()) throw ArgumentError("grid field size mismatch");
  }

  float sample(const Vec3d& p) const {
    std::int64_t i0[3];
    double w[3];
    const std::int64_t n[3] = {dims_.x, dims_.y, dims_.z};
    for (int a = 0; a < 3; ++a) {
      const double u = std::clamp((p[a] + 1.0) * 0.5 * static_cast<double>(n[a] - 1), 0.0, static_cast<double>(n[a] - 1));
      i0[a] = std::min<std::int64_t>(static_cast<std::int64_t>(u), n[a] - 2);
      w[a] = u - static_cast<double>(i0[a]);
    }
    double v = 0.0;
    for (int c = 0; c < 8; ++c) {
      const int dx = c & 1, dy = (c >> 1) & 1, dz = (c >> 2) & 1;
      const double wc = (dx ? w[0] : 1 - w[0]) * (dy ? w[1] : 1 - w[1]) * (dz ? w[2] : 1 - w[2]);
      if (wc == 0.0) continue;
      v += wc * values_[static_cast<std::size_t>(dims_.linear(i0[0] + dx, i0[1] + dy, i0[2] + dz))];
    }
    return static_cast<float>(v);
  }

  void eval(double, std::span<const Vec3d> pos, std::span<float> out) const {
    for (std::size_t i = 0; i < pos.size(); ++i) out[i] = sample(pos[i]);
  }

 private:
  Dims3 dims_;
  std::vector<float> values_;
};

/// Splits one batch across worker threads. Samples are independent, so the
/// result does not depend on the thread count.
template <ScalarField Field>
void eval_batch(const Field& field, double t, std::span<const Vec3d> pos, std::span<float> out, int threads) {
  constexpr std::size_t kMinChunk = 2048;
  std::size_t workers = threads > 0 ? static_cast<std::size_t>(threads) : std::max(1u, std::thread::hardware_concurrency());
  workers = std::min(workers, (pos.size() + kMinChunk - 1) / kMinChunk);
  if (workers <= 1) {
    field.eval(t, pos, out);
    return;
  }
  const std::size_t chunk = (pos.size() + workers - 1) / workers;
  std::vector<std::exception_ptr> errors(workers);
  {
    std::vector<std::jthread> pool;
    for (std::size_t w = 1; w < workers; ++w)
      pool.emplace_back([&, w] {
        const std::size_t b = w * chunk, e = std::min(pos.size(), b + chunk);
        try {
          if (b < e) field.eval(t, pos.subspan(b, e - b), out.subspan(b, e - b));
        } catch (...) {
          errors[w] = std::current_exception();
        }
      });
    try {
      field.eval(t, pos.subspan(0, chunk), out.subspan(0, chunk));
    } catch (...) {
      errors[0] = std::current_exception();
    }
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
}

struct RenderStats {
  std::int64_t iterations = 0;   // batched model invocations
  std::int64_t samples = 0;      // positions evaluated
  std::int64_t wasted = 0;       // evaluated after a ray saturated
  std::int64_t initial_rays = 0;
  std::vector<std::int64_t> alive_per_iteration;
  std::vector<std::int64_t> pace_per_iteration;
  double seconds = 0.0;
};

struct RenderResult {
  Image image;
  RenderStats stats;
};

/// Sample streaming with Adaptive Ray Marching: each iteration sets the pace
/// from the alive-ray count, gathers that many samples per alive ray into one
/// batch, evaluates the field once, and composites front to back.
template <ScalarField Field>
RenderResult render(const Field& field, double t, const Camera& cam, const TransferFunction& tf, const ArmConfig& arm,
                    const coreset::OccupancyGrid* occ) {
  if (!(t >= -1.0 && t <= 1.0)) throw BoundsError("render time outside [-1, 1]");
  if (arm.pace_cap < 1 || arm.fixed_pace < 1) throw ArgumentError("marching pace must be >= 1");
  if (!(arm.termination > 0.0 && arm.termination <= 1.0)) throw ArgumentError("termination threshold must be in (0, 1]");
  const auto start = std::chrono::steady_clock::now();
  const double step = arm.resolved_step();
  const double corr = step / arm.resolved_reference();
  const std::int64_t rmax = arm.resolved_max_samples();
  const coreset::OccupancyGrid* skip = arm.skip_empty ? occ : nullptr;

  auto rays = get_rays(cam);
  RenderResult res{Image(cam.width, cam.height), {}};
  std::vector<std::size_t> alive;
  for (std::size_t i = 0; i < rays.size(); ++i)
    if (rays[i].alive) alive.push_back(i);
  res.stats.initial_rays = static_cast<std::int64_t>(alive.size());
  const std::int64_t budget = arm.budget > 0 ? arm.budget : std::max<std::int64_t>(res.stats.initial_rays, 1);

  std::vector<Vec3d> positions;
  std::vector<std::size_t> owner_end;  // exclusive end in `positions` per alive entry
  std::vector<float> values;
  std::int64_t finished_samples = 0;

  while (!alive.empty()) {
    const auto na = static_cast<std::int64_t>(alive.size());
    const std::int64_t ns = arm.adaptive ? arm_pace(budget, na, arm.pace_cap) : arm.fixed_pace;
    res.stats.alive_per_iteration.push_back(na);
    res.stats.pace_per_iteration.push_back(ns);
    positions.clear();
    owner_end.clear();
    for (const auto r : alive) {
      next_samples(rays[r], ns, skip, step, rmax, positions);
      owner_end.push_back(positions.size());
    }
    if (!positions.empty()) {
      values.resize(positions.size());
      eval_batch(field, t, std::span<const Vec3d>(positions), std::span<float>(values), arm.threads);
      ++res.stats.iterations;
      res.stats.samples += static_cast<std::int64_t>(positions.size());
    }
    std::size_t begin = 0;
    std::size_t kept = 0;
    for (std::size_t k = 0; k < alive.size(); ++k) {
      auto& ray = rays[alive[k]];
      const std::size_t end = owner_end[k];
      for (std::size_t s = begin; s < end; ++s) {
        if (ray.rgba[3] >= arm.termination) {
          res.stats.wasted += static_cast<std::int64_t>(end - s);
          break;
        }
        const float v = values[s];
        if (!std::isfinite(v))
          throw RenderError("non-finite field value at pixel (" + std::to_string(ray.pixel % cam.width) + ", " +
                            std::to_string(ray.pixel / cam.width) + ")");
        auto c = tf(v);
        double a = c[3];
        if (corr != 1.0) a = 1.0 - std::pow(1.0 - a, corr);
        const double wgt = (1.0 - ray.rgba[3]) * a;
        ray.rgba[0] += static_cast<float>(wgt * c[0]);
        ray.rgba[1] += static_cast<float>(wgt * c[1]);
        ray.rgba[2] += static_cast<float>(wgt * c[2]);
        ray.rgba[3] += static_cast<float>(wgt);
      }
      finished_samples += static_cast<std::int64_t>(end - begin);
      begin = end;
      if (ray.rgba[3] >= arm.termination) ray.alive = false;
      if (ray.alive) alive[kept++] = alive[k];
    }
    alive.resize(kept);
    if (arm.global_sample_cap && finished_samples > rmax) alive.clear();
  }

  for (const auto& ray : rays) {
    float* px = res.image.pixel(ray.pixel % cam.width, ray.pixel / cam.width);
    const float rest = 1.0f - ray.rgba[3];
    for (int c = 0; c < 3; ++c) px[c] = ray.rgba[static_cast<std::size_t>(c)] + rest * arm.background[static_cast<std::size_t>(c)];
    px[3] = ray.rgba[3] + rest * arm.background[3];
  }
  res.stats.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
  return res;
}

/// Occupancy at time t from the per-key grids: the key grid itself when t
/// hits a key time, the blended grid between the bracketing keys otherwise.
inline coreset::OccupancyGrid occupancy_at(std::span<const coreset::OccupancyGrid> keys, double t) {
  if (keys.empty()) throw ArgumentError("no key occupancy grids");
  for (const auto& g : keys)
    if (g.frame_time() == t) return g;
  for (std::size_t k = 0; k + 1 < keys.size(); ++k)
    if (t > keys[k].frame_time() && t < keys[k + 1].frame_time()) return coreset::interp_occupancy(keys[k], keys[k + 1], t);
  throw BoundsError("time outside the key frame range");
}

template <ScalarField Field>
RenderResult render_supersampled_time(const Field& field, double t, std::span<const coreset::OccupancyGrid> keys,
                                      const Camera& cam, const TransferFunction& tf, const ArmConfig& arm) {
  const auto occ = occupancy_at(keys, t);
  return render(field, t, cam, tf, arm, &occ);
}

/// Cells that intersect the feature box: where a model field can be non-zero.
inline coreset::OccupancyGrid fbb_occupancy(const coreset::FeatureBoundingBox& fbb) {
  auto g = coreset::OccupancyGrid::for_vertex_dims(fbb.volume_dims);
  const auto c = g.cells();
  for (std::int64_t k = std::max<std::int64_t>(fbb.box.lo.z - 1, 0); k <= std::min(fbb.box.hi.z, c.z - 1); ++k)
    for (std::int64_t j = std::max<std::int64_t>(fbb.box.lo.y - 1, 0); j <= std::min(fbb.box.hi.y, c.y - 1); ++j)
      for (std::int64_t i = std::max<std::int64_t>(fbb.box.lo.x - 1, 0); i <= std::min(fbb.box.hi.x, c.x - 1); ++i) g.set(i, j, k);
  return g;
}

}  // namespace tvinr::render
