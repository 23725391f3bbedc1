#include "footfit/fitting.hpp"

#include "footfit/error.hpp"
#include "footfit/renderer.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <numeric>

namespace footfit {

void FitConfig::validate() const {
  if (!(lr > 0.0) || !std::isfinite(lr)) throw ConfigError("lr must be positive");
  if (stage1_epochs < 0 || stage2_epochs < 0) throw ConfigError("epoch counts must be >= 0");
  if (weights.kp < 0.0 || weights.sil < 0.0 || weights.norm < 0.0) throw ConfigError("loss weights must be >= 0");
  if (render_width <= 0 || render_height <= 0) throw ConfigError("render size must be positive");
  if (!(sharpness > 0.0)) throw ConfigError("sharpness must be positive");
  if (!(threshold_deg >= 0.0)) throw ConfigError("threshold must be >= 0");
  if (code_prior < 0.0) throw ConfigError("code prior weight must be >= 0");
}

std::vector<std::size_t> select_views(std::span<const Camera> cameras, std::size_t m) {
  const std::size_t n = cameras.size();
  if (m < 1) throw ConfigError("at least one view must be selected");
  if (m > n) throw ConfigError("cannot select " + std::to_string(m) + " of " + std::to_string(n) + " views");
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::vector<double> y(n);
  for (std::size_t i = 0; i < n; ++i) y[i] = cameras[i].center().y();
  std::stable_sort(order.begin(), order.end(), [&y](std::size_t a, std::size_t b) { return y[a] < y[b]; });
  if (m == 1) return {order[(n - 1) / 2]};
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < m; ++i) {
    const std::size_t rank = (2 * i * (n - 1) + (m - 1)) / (2 * (m - 1));
    out.push_back(order[rank]);
  }
  return out;
}

// ---- Adam --------------------------------------------------------------------------

Adam::Adam(double lr, double beta1, double beta2, double eps) : lr_(lr), beta1_(beta1), beta2_(beta2), eps_(eps) {}

void Adam::step(const std::string& name, std::span<double> param, std::span<const double> grad) {
  if (param.size() != grad.size()) throw DimensionError("adam: gradient size differs for " + name);
  for (double g : grad) {
    if (!std::isfinite(g)) throw NumericalError("non-finite gradient for parameter " + name);
  }
  State& s = state_[name];
  if (s.m.empty()) {
    s.m.assign(param.size(), 0.0);
    s.v.assign(param.size(), 0.0);
  } else if (s.m.size() != param.size()) {
    throw DimensionError("adam: parameter " + name + " changed size");
  }
  ++s.t;
  const double c1 = 1.0 - std::pow(beta1_, static_cast<double>(s.t));
  const double c2 = 1.0 - std::pow(beta2_, static_cast<double>(s.t));
  for (std::size_t i = 0; i < param.size(); ++i) {
    s.m[i] = beta1_ * s.m[i] + (1.0 - beta1_) * grad[i];
    s.v[i] = beta2_ * s.v[i] + (1.0 - beta2_) * grad[i] * grad[i];
    const double mhat = s.m[i] / c1;
    const double vhat = s.v[i] / c2;
    param[i] -= lr_ * mhat / (std::sqrt(vhat) + eps_);
  }
}

std::size_t Adam::steps(const std::string& name) const {
  const auto it = state_.find(name);
  return it == state_.end() ? 0 : it->second.t;
}

// ---- observation preparation -------------------------------------------------------

ViewObservation resample_view(const ViewObservation& view, int width, int height) {
  const Camera& cam = view.camera;
  const NormalObservation& obs = view.normals;
  if (obs.mu.width != cam.width || obs.mu.height != cam.height || obs.mu.channels != 3 ||
      obs.kappa.width != cam.width || obs.kappa.height != cam.height || obs.kappa.channels != 1) {
    throw DimensionError("observation maps do not match the camera image size");
  }
  if (cam.width == width && cam.height == height) return view;
  if (cam.width % width != 0 || cam.height % height != 0 || cam.width / width != cam.height / height) {
    throw ConfigError("render size " + std::to_string(width) + "x" + std::to_string(height) +
                      " is not an integer downsampling of " + std::to_string(cam.width) + "x" +
                      std::to_string(cam.height));
  }
  const int f = cam.width / width;
  ViewObservation out = view;
  out.camera.fx /= f;
  out.camera.fy /= f;
  out.camera.cx /= f;
  out.camera.cy /= f;
  out.camera.width = width;
  out.camera.height = height;
  out.normals.mu = ImageD(width, height, 3, 0.0);
  out.normals.kappa = ImageD(width, height, 1, 0.0);
  for (int y = 0; y < height; ++y) {
    for (int x = 0; x < width; ++x) {
      Vec3 m = Vec3::Zero();
      double k = 0.0;
      for (int dy = 0; dy < f; ++dy) {
        for (int dx = 0; dx < f; ++dx) {
          const int sx = x * f + dx, sy = y * f + dy;
          for (int c = 0; c < 3; ++c) m[c] += obs.mu.at(sx, sy, c);
          k += obs.kappa.at(sx, sy);
        }
      }
      const double len = m.norm();
      if (len > 0.0) m /= len;
      for (int c = 0; c < 3; ++c) out.normals.mu.at(x, y, c) = m[c];
      out.normals.kappa.at(x, y) = k / (f * f);
    }
  }
  return out;
}

namespace {

struct PreparedView {
  Camera camera;
  KeypointObservation keypoints;
  ImageD mu, kappa;
  std::vector<char> foreground;
  ad::Tensor mask;  // (H x W) 0/1
};

std::vector<PreparedView> prepare(const std::vector<ViewObservation>& views, const FitConfig& config) {
  if (views.empty()) throw ConfigError("no views to fit");
  std::vector<PreparedView> out;
  std::size_t visible = 0;
  for (const ViewObservation& raw : views) {
    const ViewObservation v = resample_view(raw, config.render_width, config.render_height);
    if (v.keypoints.size() != static_cast<std::size_t>(kNumKeypoints)) {
      throw DimensionError("each view needs " + std::to_string(kNumKeypoints) + " keypoints");
    }
    PreparedView p;
    p.camera = v.camera;
    p.keypoints = v.keypoints;
    p.mu = v.normals.mu;
    p.kappa = v.normals.kappa;
    for (const KeypointLabel& k : p.keypoints) {
      if (k.visibility > 0.0) ++visible;
    }
    const Image8 mask = silhouette_from_uncertainty(p.kappa, config.threshold_deg);
    p.mask = ad::Tensor({static_cast<std::size_t>(mask.height), static_cast<std::size_t>(mask.width)});
    p.foreground.resize(mask.data.size());
    for (std::size_t i = 0; i < mask.data.size(); ++i) {
      p.foreground[i] = mask.data[i] != 0;
      p.mask[i] = p.foreground[i] ? 1.0 : 0.0;
      if (p.foreground[i]) {
        Vec3 m(p.mu.data[3 * i], p.mu.data[3 * i + 1], p.mu.data[3 * i + 2]);
        const double len = m.norm();
        if (len == 0.0 || !std::isfinite(len)) {
          p.foreground[i] = 0;
          p.mask[i] = 0.0;
          continue;
        }
        m /= len;
        for (int c = 0; c < 3; ++c) p.mu.data[3 * i + c] = m[c];
      }
    }
    out.push_back(std::move(p));
  }
  if (visible < 2) {
    throw NumericalError("under-constrained fit: " + std::to_string(visible) +
                         " visible keypoints across all views (need at least 2)");
  }
  if (config.uniform_kappa) {
    double sum = 0.0;
    std::size_t count = 0;
    for (const PreparedView& p : out) {
      for (std::size_t i = 0; i < p.foreground.size(); ++i) {
        if (p.foreground[i]) {
          sum += p.kappa.data[i];
          ++count;
        }
      }
    }
    const double mean = count > 0 ? sum / static_cast<double>(count) : 0.0;
    for (PreparedView& p : out) std::fill(p.kappa.data.begin(), p.kappa.data.end(), mean);
  }
  return out;
}

void apply_step(Adam& adam, FootParams& params, const ParamVars& vars, const ad::Gradients& grads,
                const FreeMask& free) {
  auto update = [&](const char* name, std::span<double> p, const ad::Var& v, bool on) {
    if (!on || p.empty()) return;
    const ad::Tensor g = grads[v];
    adam.step(name, p, g.data);
  };
  update("r", std::span<double>(params.r.data(), 3), vars.r, free[0]);
  update("t", std::span<double>(params.t.data(), 3), vars.t, free[1]);
  update("s", std::span<double>(params.s.data(), 3), vars.s, free[2]);
  update("z_shape", params.z_shape, vars.z_shape, free[3]);
  update("z_pose", params.z_pose, vars.z_pose, free[4]);
  for (int k = 0; k < 3; ++k) {
    if (!(params.s[k] > 0.0)) throw NumericalError("scale parameter became non-positive");
  }
}

void check_dims(const FootModel& model, const FootParams& p) {
  if (p.z_shape.size() != static_cast<std::size_t>(model.field.shape_dim) ||
      p.z_pose.size() != static_cast<std::size_t>(model.field.pose_dim)) {
    throw DimensionError("parameter codes do not match the model");
  }
}

}  // namespace

FitResult fit_stage1(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
                     const FootParams& init, const FitProgress& progress) {
  config.validate();
  check_dims(model, init);
  const std::vector<PreparedView> prepared = prepare(views, config);
  std::vector<KeypointObservation> observed;
  for (const PreparedView& p : prepared) observed.push_back(p.keypoints);

  const bool codes_free = config.stage1_free[3] || config.stage1_free[4];
  std::vector<std::size_t> kp_rows(model.keypoint_ids.begin(), model.keypoint_ids.end());

  FitResult result;
  result.params = init;
  result.trace.snapshots.push_back(init);
  Adam adam(config.lr);
  for (int epoch = 0; epoch < config.stage1_epochs; ++epoch) {
    ad::Tape tape;
    const ParamVars vars = make_param_vars(tape, result.params, config.stage1_free);
    ad::Var deformed_kp;
    if (codes_free) {
      deformed_kp = ad::gather_rows(deform(model, vars.z_shape, vars.z_pose), kp_rows);
    } else {
      std::vector<Vec3> pts;
      for (int id : model.keypoint_ids) pts.push_back(model.template_mesh.vertices[id]);
      const std::vector<Vec3> disp = model.field.evaluate(pts, result.params.z_shape, result.params.z_pose);
      ad::Tensor t({pts.size(), 3});
      for (std::size_t i = 0; i < pts.size(); ++i) {
        for (int k = 0; k < 3; ++k) t[3 * i + k] = pts[i][k] + disp[i][k];
      }
      deformed_kp = tape.constant(std::move(t));
    }
    const ad::Var world = register_points(deformed_kp, vars.r, vars.t, vars.s);
    std::vector<ad::Var> projections;
    for (const PreparedView& p : prepared) {
      projections.push_back(project_normalized(to_camera_frame(world, p.camera), p.camera));
    }
    const ad::Var loss = kp_fit_loss(projections, observed);
    FitEpoch rec;
    rec.stage = 1;
    rec.epoch = epoch;
    rec.kp = rec.total = loss.item();
    if (!std::isfinite(rec.total)) throw NumericalError("non-finite loss in registration stage");
    result.trace.epochs.push_back(rec);
    if (progress) progress(rec);
    apply_step(adam, result.params, vars, tape.backward(loss), config.stage1_free);
  }
  result.trace.snapshots.push_back(result.params);
  return result;
}

FitResult fit_stage2(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
                     const FootParams& init, int epoch_offset, const FitProgress& progress) {
  config.validate();
  check_dims(model, init);
  const std::vector<PreparedView> prepared = prepare(views, config);
  std::vector<KeypointObservation> observed;
  for (const PreparedView& p : prepared) observed.push_back(p.keypoints);
  const auto& faces = model.template_mesh.faces;
  const EdgeTopology topology = build_edge_topology(faces);
  const RenderOptions options{config.sharpness, true, true};
  const LossWeights& w = config.weights;

  FitResult result;
  result.params = init;
  result.trace.snapshots.push_back(init);
  Adam adam(config.lr);
  for (int epoch = 0; epoch < config.stage2_epochs; ++epoch) {
    ad::Tape tape;
    const ParamVars vars = make_param_vars(tape, result.params, config.stage2_free);
    const ad::Var verts = forward(model, vars);

    std::vector<ad::Var> projections;
    ad::Var sil_sum, norm_sum;
    std::size_t norm_count = 0;
    for (const PreparedView& p : prepared) {
      const RenderedView view = render_view(verts, faces, topology, model.keypoint_ids, p.camera, options);
      projections.push_back(view.keypoints);
      const ad::Var sil = silhouette_l2(view.silhouette, p.mask);
      sil_sum = sil_sum.valid() ? sil_sum + sil : sil;

      std::vector<std::size_t> rows;
      ad::Tensor mu, kappa;
      std::vector<double> mu_data, kappa_data;
      for (std::size_t i = 0; i < view.pixels.size(); ++i) {
        const std::size_t px = view.pixels[i];
        if (!p.foreground[px]) continue;
        rows.push_back(i);
        for (int c = 0; c < 3; ++c) mu_data.push_back(p.mu.data[3 * px + c]);
        kappa_data.push_back(p.kappa.data[px]);
      }
      if (rows.empty()) continue;
      const ad::Var n = ad::gather_rows(view.normals, rows);
      const ad::Var term = normal_fit_sum(n, ad::Tensor({rows.size(), 3}, std::move(mu_data)),
                                          ad::Tensor({rows.size()}, std::move(kappa_data)));
      norm_sum = norm_sum.valid() ? norm_sum + term : term;
      norm_count += rows.size();
    }
    const ad::Var kp = kp_fit_loss(projections, observed);
    const ad::Var sil = sil_sum * (1.0 / static_cast<double>(prepared.size()));
    ad::Var total = kp * w.kp + sil * w.sil;
    FitEpoch rec;
    rec.stage = 2;
    rec.epoch = epoch_offset + epoch;
    rec.kp = kp.item();
    rec.sil = sil.item();
    if (norm_count > 0) {
      const ad::Var norm = norm_sum * (1.0 / static_cast<double>(norm_count));
      rec.norm = norm.item();
      total = total + norm * w.norm;
    }
    if (config.code_prior > 0.0) {
      total = total + (ad::sum(ad::square(vars.z_shape)) + ad::sum(ad::square(vars.z_pose))) * config.code_prior;
    }
    rec.total = total.item();
    if (!std::isfinite(rec.total)) throw NumericalError("non-finite loss in deformation stage");
    result.trace.epochs.push_back(rec);
    if (progress) progress(rec);
    apply_step(adam, result.params, vars, tape.backward(total), config.stage2_free);
  }
  result.trace.snapshots.push_back(result.params);
  return result;
}

FitResult fit(const FootModel& model, const std::vector<ViewObservation>& views, const FitConfig& config,
              const FitProgress& progress) {
  FitResult s1 = fit_stage1(model, views, config, FootParams::identity(model), progress);
  FitResult s2 = fit_stage2(model, views, config, s1.params, config.stage1_epochs, progress);
  FitResult out;
  out.params = s2.params;
  out.trace.epochs = std::move(s1.trace.epochs);
  out.trace.epochs.insert(out.trace.epochs.end(), s2.trace.epochs.begin(), s2.trace.epochs.end());
  out.trace.snapshots = s1.trace.snapshots;
  out.trace.snapshots.push_back(s2.trace.snapshots.back());
  return out;
}

// ---- artifacts -----------------------------------------------------------------------

void write_trace_csv(const std::filesystem::path& path, const FitTrace& trace) {
  std::FILE* f = std::fopen(path.string().c_str(), "wb");
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  std::fprintf(f, "epoch,L_kp,L_sil,L_norm,total\n");
  for (const FitEpoch& e : trace.epochs) {
    std::fprintf(f, "%d,%.17g,%.17g,%.17g,%.17g\n", e.epoch, e.kp, e.sil, e.norm, e.total);
  }
  if (std::fclose(f) != 0) throw IoError("failed writing " + path.string());
}

void write_params_json(const std::filesystem::path& path, const FootParams& params) {
  json_util::save_file(path, json_util::to_json(params));
}

FootParams read_params_json(const std::filesystem::path& path) {
  FootParams p;
  try {
    json_util::from_json(json_util::load_file(path, false), p, path.string());
  } catch (const ConfigError& e) {
    throw IoError(e.what());
  }
  return p;
}

}  // namespace footfit
