#include "footfit/synth.hpp"

#include "footfit/error.hpp"
#include "footfit/mesh_io.hpp"
#include "footfit/parallel.hpp"
#include "footfit/renderer.hpp"

#include "json_util.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

namespace footfit {

namespace {

double round_f32(double v) { return static_cast<double>(static_cast<float>(v)); }

std::uint8_t to_byte(double v) { return static_cast<std::uint8_t>(std::clamp(std::floor(v * 255.0 + 0.5), 0.0, 255.0)); }

std::string view_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "view_%03zu", i);
  return buf;
}

}  // namespace

void NoiseModel::validate() const {
  if (!(sigma_view_deg >= 0.0) || !std::isfinite(sigma_view_deg)) throw ConfigError("noise sigma must be >= 0");
  if (!(grazing_gain >= 0.0)) throw ConfigError("grazing gain must be >= 0");
  if (!(calibration > 0.0)) throw ConfigError("calibration must be positive");
  if (!(kp_sigma > 0.0)) throw ConfigError("keypoint sigma must be positive");
  if (!(kp_noise >= 0.0)) throw ConfigError("keypoint noise must be >= 0");
  if (!(corruption_deg >= 0.0 && corruption_deg < 90.0)) throw ConfigError("corruption angle must be in [0, 90)");
}

void SceneSpec::validate() const {
  if (views < 1) throw ConfigError("a scene needs at least one view");
  if (!(cutoff_height >= 0.0)) throw ConfigError("cutoff height must be >= 0");
  if (!(max_cutoff_fraction >= 0.0 && max_cutoff_fraction <= 1.0)) throw ConfigError("cutoff fraction must be in [0, 1]");
  if (max_attempts < 1) throw ConfigError("max_attempts must be >= 1");
  for (int k = 0; k < 3; ++k) {
    if (!(gt.s[k] > 0.0)) throw ConfigError("ground-truth scale must be positive");
  }
  footfit::validate(arc);
  noise.validate();
  for (int v : noise.corrupted_views) {
    if (v < 0 || v >= views) throw ConfigError("corrupted view index out of range");
  }
}

FootParams random_gt_params(const FootModel& model, std::uint64_t seed, double code_std, const GtRanges& ranges) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  std::normal_distribution<double> normal(0.0, code_std);
  FootParams p = FootParams::identity(model);
  const double deg = kPi / 180.0;
  p.r = Vec3(ranges.tilt_deg * deg * u(rng), ranges.tilt_deg * deg * u(rng), ranges.yaw_deg * deg * u(rng));
  p.t = Vec3(ranges.translation * u(rng), ranges.translation * u(rng), 0.0);
  p.s = Vec3(1.0 + ranges.scale * u(rng), 1.0 + ranges.scale * u(rng), 1.0 + ranges.scale * u(rng));
  for (double& z : p.z_shape) z = normal(rng);
  for (double& z : p.z_pose) z = normal(rng);
  return p;
}

NormalObservation synthesize_kappa(const ImageD& normal_gt, const NoiseModel& noise, std::mt19937_64& rng,
                                   double systematic_deg) {
  if (normal_gt.channels != 3) throw DimensionError("synthesize_kappa: normal map must have 3 channels");
  const int W = normal_gt.width, H = normal_gt.height;
  NormalObservation obs{ImageD(W, H, 3, 0.0), ImageD(W, H, 1, 0.0)};
  std::normal_distribution<double> normal(0.0, 1.0);
  const double deg = kPi / 180.0;
  const Mat3 systematic = axis_angle(Vec3::UnitX(), systematic_deg * deg);
  for (std::size_t p = 0; p < normal_gt.pixel_count(); ++p) {
    const Vec3 n(normal_gt.data[3 * p], normal_gt.data[3 * p + 1], normal_gt.data[3 * p + 2]);
    if (n.squaredNorm() == 0.0) continue;
    const double sigma = noise.sigma_view_deg * (1.0 + noise.grazing_gain * (1.0 - std::abs(n.z())));
    const double angle = std::abs(normal(rng)) * sigma * deg;
    Vec3 axis(normal(rng), normal(rng), normal(rng));
    axis -= n * n.dot(axis);
    if (axis.norm() < 1e-12) axis = n.unitOrthogonal();
    axis.normalize();
    Vec3 mu = n * std::cos(angle) + axis.cross(n) * std::sin(angle);
    if (systematic_deg != 0.0) mu = systematic * mu;
    if (angle != 0.0 || systematic_deg != 0.0) mu.normalize();
    const double expected = std::max(noise.calibration * sigma, systematic_deg);
    for (int c = 0; c < 3; ++c) obs.mu.data[3 * p + c] = mu[c];
    obs.kappa.data[p] = kappa_for_expected_error(expected);
  }
  return obs;
}

Image8 shade_lambert(const ImageD& normals, const Camera& camera) {
  const Vec3 light = camera.R * Vec3(0.3, 0.2, 1.0).normalized();
  const Vec3 skin(0.87, 0.67, 0.55), background(0.35, 0.35, 0.38);
  Image8 out(normals.width, normals.height, 3, 0);
  for (std::size_t p = 0; p < normals.pixel_count(); ++p) {
    const Vec3 n(normals.data[3 * p], normals.data[3 * p + 1], normals.data[3 * p + 2]);
    Vec3 rgb = background;
    if (n.squaredNorm() > 0.0) rgb = skin * (0.25 + 0.75 * std::max(0.0, n.dot(light)));
    for (int c = 0; c < 3; ++c) out.data[3 * p + c] = to_byte(rgb[c]);
  }
  return out;
}

ViewLabels render_labels(const Mesh& gt_mesh, std::span<const int> keypoint_ids, const Camera& camera,
                         const NoiseModel& noise, std::mt19937_64& rng, double cutoff_height, double systematic_deg) {
  ViewLabels v;
  v.camera = camera;
  const Fragments frags = rasterize(gt_mesh, camera);
  v.normal_gt = to_float32_precision(render_normal_map(gt_mesh, camera, frags));
  v.height = to_float32_precision(render_height_map(gt_mesh, camera, frags));
  v.mask = render_mask(frags);
  std::size_t covered = 0, above = 0;
  for (std::size_t p = 0; p < frags.face.size(); ++p) {
    if (frags.face[p] < 0) continue;
    ++covered;
    if (v.height.data[p] > cutoff_height) ++above;
  }
  v.cutoff_fraction = covered == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(covered);

  NormalObservation obs = synthesize_kappa(v.normal_gt, noise, rng, systematic_deg);
  v.mu = to_float32_precision(obs.mu);
  v.kappa = to_float32_precision(obs.kappa);
  v.image = shade_lambert(v.normal_gt, camera);

  const std::vector<ProjectedKeypoint> kps = project_keypoints(gt_mesh, keypoint_ids, camera);
  std::normal_distribution<double> normal(0.0, 1.0);
  for (std::size_t i = 0; i < kps.size(); ++i) {
    KeypointLabel label;
    Vec2 pos = kps[i].position;
    bool occluded = true;
    if (kps[i].visible) {
      const int px = static_cast<int>(pos.x() * camera.width), py = static_cast<int>(pos.y() * camera.height);
      const std::size_t idx = static_cast<std::size_t>(py) * camera.width + px;
      const double depth = camera.to_camera(gt_mesh.vertices[keypoint_ids[i]]).z();
      occluded = frags.face[idx] < 0 || depth > frags.depth[idx] + 0.003;
    }
    if (noise.kp_noise > 0.0) pos += noise.kp_noise * Vec2(normal(rng), normal(rng));
    label.position = Vec2(round_f32(pos.x()), round_f32(pos.y()));
    if (std::abs(label.position.x()) < 1e-9) label.position.x() = 0.0;
    if (std::abs(label.position.y()) < 1e-9) label.position.y() = 0.0;
    label.sigma = Vec2::Constant(round_f32(noise.kp_sigma * (occluded ? 3.0 : 1.0)));
    label.visibility = kps[i].visible ? 1.0 : 0.0;
    v.keypoints.push_back(label);
  }
  return v;
}

Scene generate_scene(const SceneSpec& spec, const FootModel& model) {
  spec.validate();
  Scene scene;
  scene.spec = spec;
  scene.gt_mesh = forward_mesh(model, spec.gt);
  scene.views.resize(spec.views);
  std::vector<int> failed(spec.views, 0);
  parallel_for(
      static_cast<std::size_t>(spec.views),
      [&](std::size_t begin, std::size_t end) {
        for (std::size_t i = begin; i < end; ++i) {
          std::mt19937_64 rng(spec.seed ^ static_cast<std::uint64_t>(i));
          Camera camera;
          bool accepted = false;
          for (int attempt = 0; attempt < spec.max_attempts && !accepted; ++attempt) {
            camera = sample_arc(spec.arc, rng);
            accepted = cutoff_fraction(scene.gt_mesh, spec.cutoff_height, camera) <= spec.max_cutoff_fraction;
          }
          if (!accepted) {
            failed[i] = 1;
            continue;
          }
          const bool corrupted = std::find(spec.noise.corrupted_views.begin(), spec.noise.corrupted_views.end(),
                                           static_cast<int>(i)) != spec.noise.corrupted_views.end();
          scene.views[i] = render_labels(scene.gt_mesh, model.keypoint_ids, camera, spec.noise, rng,
                                         spec.cutoff_height, corrupted ? spec.noise.corruption_deg : 0.0);
        }
      },
      1);
  for (int i = 0; i < spec.views; ++i) {
    if (failed[i]) {
      throw ConfigError("view " + std::to_string(i) + ": no camera within the cutoff limit after " +
                        std::to_string(spec.max_attempts) + " attempts");
    }
  }
  return scene;
}

std::vector<ViewObservation> scene_observations(const Scene& scene) {
  std::vector<ViewObservation> out;
  for (const ViewLabels& v : scene.views) out.push_back({v.camera, {v.mu, v.kappa}, v.keypoints});
  return out;
}

// ---- scene IO --------------------------------------------------------------------------

namespace {

using json_util::json;

json keypoints_to_json(const KeypointObservation& kps) {
  json arr = json::array();
  for (std::size_t i = 0; i < kps.size(); ++i) {
    json k = {{"k", {kps[i].position.x(), kps[i].position.y()}},
              {"sigma", {kps[i].sigma.x(), kps[i].sigma.y()}},
              {"v", kps[i].visibility}};
    if (i < keypoint_names().size()) k["name"] = keypoint_names()[i];
    arr.push_back(std::move(k));
  }
  return arr;
}

KeypointObservation keypoints_from_json(const json& j) {
  if (!j.is_array()) throw std::runtime_error("expected an array");
  KeypointObservation out;
  for (const json& k : j) {
    KeypointLabel label;
    label.position = Vec2(k.at("k").at(0).get<double>(), k.at("k").at(1).get<double>());
    label.sigma = Vec2(k.at("sigma").at(0).get<double>(), k.at("sigma").at(1).get<double>());
    label.visibility = k.at("v").get<double>();
    out.push_back(label);
  }
  return out;
}

}  // namespace

void write_scene(const std::filesystem::path& dir, const Scene& scene) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw IoError("cannot create " + dir.string() + ": " + ec.message());
  json_util::save_file(dir / "scene.json", {{"spec", json_util::to_json(scene.spec)},
                                            {"view_count", scene.views.size()},
                                            {"floor", "z = 0"},
                                            {"lateral_axis", "x"}});
  std::vector<Camera> cams;
  for (const ViewLabels& v : scene.views) cams.push_back(v.camera);
  write_cameras_json(dir / "cameras.json", cams);
  if (!scene.gt_mesh.vertices.empty()) write_obj(dir / "gt_mesh.obj", scene.gt_mesh);
  for (std::size_t i = 0; i < scene.views.size(); ++i) {
    const ViewLabels& v = scene.views[i];
    const std::filesystem::path vd = dir / view_name(i);
    std::filesystem::create_directories(vd, ec);
    if (ec) throw IoError("cannot create " + vd.string() + ": " + ec.message());
    write_ppm(vd / "image.ppm", v.image);
    write_pfm(vd / "mu.pfm", v.mu);
    write_pfm(vd / "kappa.pfm", v.kappa);
    write_pgm(vd / "mask.pgm", v.mask);
    json_util::save_file(vd / "keypoints.json", keypoints_to_json(v.keypoints));
    if (!v.normal_gt.data.empty()) write_pfm(vd / "normal_gt.pfm", v.normal_gt);
    if (!v.height.data.empty()) write_pfm(vd / "height.pfm", v.height);
  }
}

Scene read_scene(const std::filesystem::path& dir) {
  Scene scene;
  const std::filesystem::path scene_json = dir / "scene.json";
  if (std::filesystem::exists(scene_json)) {
    const json j = json_util::load_file(scene_json, false);
    try {
      if (j.contains("spec")) json_util::from_json(j.at("spec"), scene.spec, "scene.json");
    } catch (const ConfigError& e) {
      throw IoError(std::string("malformed scene.json: ") + e.what());
    }
  }
  if (!std::filesystem::exists(dir / "cameras.json")) throw IoError("scene " + dir.string() + " has no cameras.json");
  const std::vector<Camera> cams = read_cameras_json(dir / "cameras.json");
  if (std::filesystem::exists(dir / "gt_mesh.obj")) scene.gt_mesh = read_obj(dir / "gt_mesh.obj");
  for (std::size_t i = 0; i < cams.size(); ++i) {
    const std::string name = view_name(i);
    const std::filesystem::path vd = dir / name;
    auto need = [&](const char* file) {
      const std::filesystem::path p = vd / file;
      if (!std::filesystem::exists(p)) throw IoError(name + ": missing " + file);
      return p;
    };
    ViewLabels v;
    v.camera = cams[i];
    try {
      v.image = read_ppm(need("image.ppm"));
      v.mu = read_pfm(need("mu.pfm"));
      v.kappa = read_pfm(need("kappa.pfm"));
      v.mask = read_pgm(need("mask.pgm"));
      if (std::filesystem::exists(vd / "normal_gt.pfm")) v.normal_gt = read_pfm(vd / "normal_gt.pfm");
      if (std::filesystem::exists(vd / "height.pfm")) v.height = read_pfm(vd / "height.pfm");
    } catch (const IoError& e) {
      const std::string msg = e.what();
      if (msg.rfind(name, 0) == 0) throw;
      throw IoError(name + ": " + msg);
    }
    try {
      v.keypoints = keypoints_from_json(json_util::load_file(need("keypoints.json"), false));
    } catch (const IoError& e) {
      const std::string msg = e.what();
      if (msg.rfind(name, 0) == 0) throw;
      throw IoError(name + ": " + msg);
    } catch (const std::exception& e) {
      throw IoError(name + ": malformed keypoints.json: " + e.what());
    }
    const auto check = [&](int w, int h, int c, const char* what, int want_c) {
      if (w != v.camera.width || h != v.camera.height || c != want_c) {
        throw IoError(name + ": " + what + " does not match the camera image size");
      }
    };
    check(v.mu.width, v.mu.height, v.mu.channels, "mu.pfm", 3);
    check(v.kappa.width, v.kappa.height, v.kappa.channels, "kappa.pfm", 1);
    check(v.mask.width, v.mask.height, v.mask.channels, "mask.pgm", 1);
    check(v.image.width, v.image.height, v.image.channels, "image.ppm", 3);
    if (!v.normal_gt.data.empty()) check(v.normal_gt.width, v.normal_gt.height, v.normal_gt.channels, "normal_gt.pfm", 3);
    if (!v.height.data.empty()) check(v.height.width, v.height.height, v.height.channels, "height.pfm", 1);
    std::size_t covered = 0, above = 0;
    for (std::size_t p = 0; p < v.mask.data.size() && !v.height.data.empty(); ++p) {
      if (!v.mask.data[p]) continue;
      ++covered;
      if (v.height.data[p] > scene.spec.cutoff_height) ++above;
    }
    v.cutoff_fraction = covered == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(covered);
    scene.views.push_back(std::move(v));
  }
  scene.spec.views = static_cast<int>(scene.views.size());
  return scene;
}

// ---- augmentation ----------------------------------------------------------------------

Image8 resize_bilinear(const Image8& image, int width, int height) {
  if (width <= 0 || height <= 0) throw std::invalid_argument("resize: empty target");
  Image8 out(width, height, image.channels, 0);
  const double sx = static_cast<double>(image.width) / width, sy = static_cast<double>(image.height) / height;
  for (int y = 0; y < height; ++y) {
    const double fy = std::clamp((y + 0.5) * sy - 0.5, 0.0, image.height - 1.0);
    const int y0 = static_cast<int>(fy), y1 = std::min(y0 + 1, image.height - 1);
    const double ty = fy - y0;
    for (int x = 0; x < width; ++x) {
      const double fx = std::clamp((x + 0.5) * sx - 0.5, 0.0, image.width - 1.0);
      const int x0 = static_cast<int>(fx), x1 = std::min(x0 + 1, image.width - 1);
      const double tx = fx - x0;
      for (int c = 0; c < image.channels; ++c) {
        const double top = (1 - tx) * image.at(x0, y0, c) + tx * image.at(x1, y0, c);
        const double bottom = (1 - tx) * image.at(x0, y1, c) + tx * image.at(x1, y1, c);
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor((1 - ty) * top + ty * bottom + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

Image8 downsample_upsample(const Image8& image, double ratio) {
  if (!(ratio > 0.0 && ratio <= 1.0)) throw std::invalid_argument("downsample ratio must be in (0, 1]");
  const int w = std::max(1, static_cast<int>(std::lround(image.width * ratio)));
  const int h = std::max(1, static_cast<int>(std::lround(image.height * ratio)));
  return resize_bilinear(resize_bilinear(image, w, h), image.width, image.height);
}

namespace {

template <class T>
Image<T> mirror(const Image<T>& img) {
  Image<T> out = img;
  for (int y = 0; y < img.height; ++y) {
    for (int x = 0; x < img.width; ++x) {
      for (int c = 0; c < img.channels; ++c) out.at(img.width - 1 - x, y, c) = img.at(x, y, c);
    }
  }
  return out;
}

ImageD mirror_normals(const ImageD& img) {
  ImageD out = mirror(img);
  if (out.channels == 3) {
    for (std::size_t p = 0; p < out.pixel_count(); ++p) out.data[3 * p] = -out.data[3 * p];
  }
  return out;
}

}  // namespace

ViewLabels flip_horizontal(const ViewLabels& view) {
  ViewLabels out = view;
  out.image = mirror(view.image);
  out.normal_gt = mirror_normals(view.normal_gt);
  out.mu = mirror_normals(view.mu);
  out.kappa = mirror(view.kappa);
  out.height = mirror(view.height);
  out.mask = mirror(view.mask);
  if (view.keypoints.size() == static_cast<std::size_t>(kNumKeypoints)) {
    for (int k = 0; k < kNumKeypoints; ++k) {
      KeypointLabel label = view.keypoints[k];
      label.position.x() = 1.0 - label.position.x();
      out.keypoints[flipped_keypoint(k)] = label;
    }
  } else {
    for (KeypointLabel& label : out.keypoints) label.position.x() = 1.0 - label.position.x();
  }
  return out;
}

Image8 gaussian_blur(const Image8& image, double sigma) {
  if (!(sigma > 0.0)) throw std::invalid_argument("blur sigma must be positive");
  double kernel[7];
  double total = 0.0;
  for (int i = 0; i < 7; ++i) {
    kernel[i] = std::exp(-0.5 * (i - 3) * (i - 3) / (sigma * sigma));
    total += kernel[i];
  }
  for (double& k : kernel) k /= total;
  const int W = image.width, H = image.height, C = image.channels;
  std::vector<double> tmp(image.data.size());
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < 7; ++i) acc += kernel[i] * image.at(std::clamp(x + i - 3, 0, W - 1), y, c);
        tmp[image.index(x, y, c)] = acc;
      }
    }
  }
  Image8 out(W, H, C, 0);
  for (int y = 0; y < H; ++y) {
    for (int x = 0; x < W; ++x) {
      for (int c = 0; c < C; ++c) {
        double acc = 0.0;
        for (int i = 0; i < 7; ++i) acc += kernel[i] * tmp[image.index(x, std::clamp(y + i - 3, 0, H - 1), c)];
        out.at(x, y, c) = static_cast<std::uint8_t>(std::clamp(std::floor(acc + 0.5), 0.0, 255.0));
      }
    }
  }
  return out;
}

Image8 add_gaussian_noise(const Image8& image, double sigma, std::mt19937_64& rng) {
  std::normal_distribution<double> normal(0.0, sigma);
  Image8 out = image;
  for (auto& v : out.data) v = to_byte(v / 255.0 + normal(rng));
  return out;
}

namespace {

Vec3 rgb_to_hsv(const Vec3& c) {
  const double mx = c.maxCoeff(), mn = c.minCoeff(), d = mx - mn;
  double h = 0.0;
  if (d > 0.0) {
    if (mx == c.x()) {
      h = std::fmod((c.y() - c.z()) / d, 6.0);
    } else if (mx == c.y()) {
      h = (c.z() - c.x()) / d + 2.0;
    } else {
      h = (c.x() - c.y()) / d + 4.0;
    }
    h /= 6.0;
    if (h < 0.0) h += 1.0;
  }
  return {h, mx > 0.0 ? d / mx : 0.0, mx};
}

Vec3 hsv_to_rgb(const Vec3& hsv) {
  const double h = hsv.x() * 6.0, s = hsv.y(), v = hsv.z();
  const int i = static_cast<int>(std::floor(h)) % 6;
  const double f = h - std::floor(h);
  const double p = v * (1 - s), q = v * (1 - s * f), t = v * (1 - s * (1 - f));
  switch (i) {
    case 0: return {v, t, p};
    case 1: return {q, v, p};
    case 2: return {p, v, t};
    case 3: return {p, q, v};
    case 4: return {t, p, v};
    default: return {v, p, q};
  }
}

double luma(const Vec3& c) { return 0.299 * c.x() + 0.587 * c.y() + 0.114 * c.z(); }

}  // namespace

Image8 color_jitter(const Image8& image, double brightness, double contrast, double saturation, double hue,
                    std::mt19937_64& rng) {
  if (image.channels != 3) throw std::invalid_argument("color_jitter needs an RGB image");
  std::uniform_real_distribution<double> ub(1.0 - brightness, 1.0 + brightness);
  std::uniform_real_distribution<double> uc(1.0 - contrast, 1.0 + contrast);
  std::uniform_real_distribution<double> us(1.0 - saturation, 1.0 + saturation);
  std::uniform_real_distribution<double> uh(-hue, hue);
  const double fb = ub(rng), fc = uc(rng), fs = us(rng), fh = uh(rng);
  const std::size_t n = image.pixel_count();
  std::vector<Vec3> px(n);
  for (std::size_t p = 0; p < n; ++p) {
    px[p] = Vec3(image.data[3 * p], image.data[3 * p + 1], image.data[3 * p + 2]) / 255.0;
  }
  double mean = 0.0;
  for (Vec3& c : px) {
    c = (c * fb).cwiseMax(0.0).cwiseMin(1.0);
    mean += luma(c);
  }
  mean /= static_cast<double>(std::max<std::size_t>(1, n));
  Image8 out(image.width, image.height, 3, 0);
  for (std::size_t p = 0; p < n; ++p) {
    Vec3 c = (mean + fc * (px[p].array() - mean)).matrix().cwiseMax(0.0).cwiseMin(1.0);
    c = (luma(c) + fs * (c.array() - luma(c))).matrix().cwiseMax(0.0).cwiseMin(1.0);
    Vec3 hsv = rgb_to_hsv(c);
    hsv.x() = hsv.x() + fh - std::floor(hsv.x() + fh);
    c = hsv_to_rgb(hsv);
    for (int k = 0; k < 3; ++k) out.data[3 * p + k] = to_byte(c[k]);
  }
  return out;
}

Image8 to_grayscale(const Image8& image) {
  if (image.channels != 3) return image;
  Image8 out = image;
  for (std::size_t p = 0; p < image.pixel_count(); ++p) {
    const Vec3 c(image.data[3 * p], image.data[3 * p + 1], image.data[3 * p + 2]);
    const std::uint8_t g = static_cast<std::uint8_t>(std::clamp(std::floor(luma(c) + 0.5), 0.0, 255.0));
    for (int k = 0; k < 3; ++k) out.data[3 * p + k] = g;
  }
  return out;
}

ViewLabels augment(const ViewLabels& view, const AugmentContext& context, const AugmentOptions& options,
                   std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  const auto happens = [&](double p) { return u01(rng) < p; };
  const double deg = kPi / 180.0;
  ViewLabels out = view;
  if (happens(options.p_perspective)) {
    if (context.gt_mesh == nullptr) throw std::invalid_argument("perspective augmentation needs the GT mesh");
    std::uniform_real_distribution<double> small(-20.0 * deg, 20.0 * deg), roll(-kPi, kPi);
    const double yaw = small(rng), pitch = small(rng), r = roll(rng);
    const Camera cam = rotate_camera(view.camera, yaw, pitch, r);
    out = render_labels(*context.gt_mesh, context.keypoint_ids, cam, context.noise, rng, context.cutoff_height);
  }
  if (happens(options.p_flip)) out = flip_horizontal(out);
  if (happens(options.p_downsample)) {
    std::uniform_real_distribution<double> ratio(0.2, 1.0);
    out.image = downsample_upsample(out.image, ratio(rng));
  }
  if (happens(options.p_blur)) {
    std::uniform_real_distribution<double> sigma(0.1, 10.0);
    out.image = gaussian_blur(out.image, sigma(rng));
  }
  if (happens(options.p_noise)) out.image = add_gaussian_noise(out.image, 0.01, rng);
  if (happens(options.p_jitter)) out.image = color_jitter(out.image, 0.5, 0.5, 0.5, 0.1, rng);
  if (happens(options.p_grayscale)) out.image = to_grayscale(out.image);
  return out;
}

}  // namespace footfit
