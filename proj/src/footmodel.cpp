#include "footfit/footmodel.hpp"

#include "footfit/error.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <random>
#include <set>
#include <stdexcept>

namespace footfit {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

const std::vector<std::string>& keypoint_names() {
  static const std::vector<std::string> names = {
      "toe_big",     "toe_second", "toe_third",  "toe_fourth", "toe_little", "width_inner",
      "width_outer", "heel_back",  "heel_floor", "arch_rear",  "arch_apex",  "arch_front"};
  return names;
}

int flipped_keypoint(int k) {
  if (k < 0 || k >= kNumKeypoints) throw std::out_of_range("keypoint index out of range");
  if (k < 5) return 4 - k;
  if (k == 5) return 6;
  if (k == 6) return 5;
  return k;
}

// ---- deformation field ---------------------------------------------------------------

void DeformationField::validate() const {
  if (shape_dim < 0 || pose_dim < 0) throw std::invalid_argument("negative code dimension");
  if (layers.empty()) throw std::invalid_argument("deformation field has no layers");
  int width = input_dim();
  for (std::size_t l = 0; l < layers.size(); ++l) {
    const DenseLayer& layer = layers[l];
    if (layer.in != width || layer.out <= 0) {
      throw std::invalid_argument("deformation field layer " + std::to_string(l) + " has inconsistent shape");
    }
    if (layer.weight.size() != static_cast<std::size_t>(layer.in) * layer.out ||
        layer.bias.size() != static_cast<std::size_t>(layer.out)) {
      throw std::invalid_argument("deformation field layer " + std::to_string(l) + " has wrong weight count");
    }
    for (double w : layer.weight) {
      if (!std::isfinite(w)) throw std::invalid_argument("non-finite deformation field weight");
    }
    for (double b : layer.bias) {
      if (!std::isfinite(b)) throw std::invalid_argument("non-finite deformation field bias");
    }
    width = layer.out;
  }
  if (width != 3) throw std::invalid_argument("deformation field must output 3 values");
}

std::vector<Vec3> DeformationField::evaluate(std::span<const Vec3> points, std::span<const double> z_shape,
                                             std::span<const double> z_pose) const {
  if (z_shape.size() != static_cast<std::size_t>(shape_dim) || z_pose.size() != static_cast<std::size_t>(pose_dim)) {
    throw DimensionError("code length does not match the deformation field");
  }
  const Eigen::Index n = static_cast<Eigen::Index>(points.size());
  RowMat h(n, input_dim());
  for (Eigen::Index i = 0; i < n; ++i) {
    h(i, 0) = points[i].x();
    h(i, 1) = points[i].y();
    h(i, 2) = points[i].z();
    for (int k = 0; k < shape_dim; ++k) h(i, 3 + k) = z_shape[k];
    for (int k = 0; k < pose_dim; ++k) h(i, 3 + shape_dim + k) = z_pose[k];
  }
  for (const DenseLayer& layer : layers) {
    const Eigen::Map<const RowMat> w(layer.weight.data(), layer.in, layer.out);
    const Eigen::Map<const Eigen::RowVectorXd> b(layer.bias.data(), layer.out);
    RowMat next = h * w;
    next.rowwise() += b;
    if (layer.activation == Activation::kTanh) next = next.array().tanh().matrix();
    h = std::move(next);
  }
  std::vector<Vec3> out(points.size());
  for (Eigen::Index i = 0; i < n; ++i) out[i] = Vec3(h(i, 0), h(i, 1), h(i, 2));
  return out;
}

void FootModel::validate() const {
  footfit::validate(template_mesh);
  if (!is_watertight(template_mesh)) throw std::invalid_argument("template mesh is not watertight");
  if (keypoint_ids.size() != static_cast<std::size_t>(kNumKeypoints)) {
    throw std::invalid_argument("model needs exactly 12 keypoint ids");
  }
  for (int id : keypoint_ids) {
    if (id < 0 || static_cast<std::size_t>(id) >= template_mesh.vertices.size()) {
      throw std::invalid_argument("keypoint id out of range");
    }
  }
  field.validate();
  for (const auto& b : blendshapes) {
    if (b.size() != template_mesh.vertices.size()) throw std::invalid_argument("blendshape size mismatch");
  }
}

FootParams FootParams::identity(const FootModel& model) {
  FootParams p;
  p.z_shape.assign(model.field.shape_dim, 0.0);
  p.z_pose.assign(model.field.pose_dim, 0.0);
  return p;
}

// ---- differentiable forward -----------------------------------------------------------

namespace {

ad::Tensor vec3_tensor(const Vec3& v) { return ad::Tensor::vector({v.x(), v.y(), v.z()}); }

ad::Tensor points_tensor(std::span<const Vec3> pts) {
  ad::Tensor t({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = pts[i][k];
  }
  return t;
}

void check_scale(const ad::Var& s) {
  for (double v : s.value().data) {
    if (!(v > 0.0)) throw std::invalid_argument("scale must be positive");
  }
}

}  // namespace

ParamVars make_param_vars(ad::Tape& tape, const FootParams& params, const std::array<bool, 5>& free) {
  ParamVars v;
  v.r = tape.leaf(vec3_tensor(params.r), free[0]);
  v.t = tape.leaf(vec3_tensor(params.t), free[1]);
  v.s = tape.leaf(vec3_tensor(params.s), free[2]);
  v.z_shape = tape.leaf(ad::Tensor::vector(params.z_shape), free[3]);
  v.z_pose = tape.leaf(ad::Tensor::vector(params.z_pose), free[4]);
  return v;
}

ad::Var euler_rotation(const ad::Var& r) {
  if (r.shape() != ad::Shape{3}) throw DimensionError("euler_rotation expects 3 angles");
  const Vec3 angles(r.value()[0], r.value()[1], r.value()[2]);
  const Mat3 R = footfit::euler_rotation(angles);
  ad::Tensor out({3, 3});
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[3 * i + j] = R(i, j);
  }
  const auto dR = euler_rotation_derivatives(angles);
  return r.tape()->record({r}, std::move(out),
                          [dR](const ad::Tape&, const ad::Tensor&, std::span<const double> g,
                               std::span<const ad::GradSpan> gin) {
                            for (int k = 0; k < 3; ++k) {
                              double acc = 0.0;
                              for (int i = 0; i < 3; ++i) {
                                for (int j = 0; j < 3; ++j) acc += g[3 * i + j] * dR[k](i, j);
                              }
                              gin[0][k] += acc;
                            }
                          });
}

ad::Var register_points(const ad::Var& points, const ad::Var& r, const ad::Var& t, const ad::Var& s) {
  check_scale(s);
  const ad::Var R = euler_rotation(r);
  return ad::matmul(points, ad::transpose(R)) * s + t;
}

ad::Var deform(const FootModel& model, const ad::Var& z_shape, const ad::Var& z_pose) {
  const DeformationField& field = model.field;
  if (z_shape.size() != static_cast<std::size_t>(field.shape_dim) ||
      z_pose.size() != static_cast<std::size_t>(field.pose_dim)) {
    throw DimensionError("code length does not match the deformation field");
  }
  ad::Tape& tape = *z_shape.tape();
  const auto& verts = model.template_mesh.vertices;
  const std::size_t nv = verts.size();
  const ad::Var x = tape.constant(points_tensor(verts));

  // First layer split into its position rows (constant) and code rows.
  const DenseLayer& first = field.layers.front();
  const std::size_t width = first.out;
  ad::Tensor xw({nv, width});
  ad::Tensor wz({static_cast<std::size_t>(first.in - 3), width});
  {
    const Eigen::Map<const RowMat> w(first.weight.data(), first.in, first.out);
    Eigen::Map<RowMat> out(xw.data.data(), nv, width);
    const Eigen::Map<const RowMat> xm(x.value().data.data(), nv, 3);
    out.noalias() = xm * w.topRows(3);
    Eigen::Map<RowMat>(wz.data.data(), first.in - 3, width) = w.bottomRows(first.in - 3);
  }
  std::vector<ad::Var> codes = {z_shape, z_pose};
  const ad::Var z = ad::concat(codes);
  ad::Var h = tape.constant(std::move(xw));
  if (z.size() > 0) {
    h = h + (ad::matmul(z, tape.constant(std::move(wz))) + tape.constant(ad::Tensor::vector(first.bias)));
  } else {
    h = h + tape.constant(ad::Tensor::vector(first.bias));
  }
  if (first.activation == Activation::kTanh) h = ad::tanh(h);

  for (std::size_t l = 1; l < field.layers.size(); ++l) {
    const DenseLayer& layer = field.layers[l];
    const ad::Var w = tape.constant(ad::Tensor::matrix(layer.in, layer.out, layer.weight));
    h = ad::matmul(h, w) + tape.constant(ad::Tensor::vector(layer.bias));
    if (layer.activation == Activation::kTanh) h = ad::tanh(h);
  }
  return x + h;
}

ad::Var forward(const FootModel& model, const ParamVars& params) {
  check_scale(params.s);
  return register_points(deform(model, params.z_shape, params.z_pose), params.r, params.t, params.s);
}

Mesh forward_mesh(const FootModel& model, const FootParams& params) {
  ad::Tape tape;
  const ParamVars vars = make_param_vars(tape, params, {false, false, false, false, false});
  const ad::Tensor& v = forward(model, vars).value();
  Mesh mesh;
  mesh.faces = model.template_mesh.faces;
  mesh.vertices.resize(v.shape[0]);
  for (std::size_t i = 0; i < mesh.vertices.size(); ++i) mesh.vertices[i] = Vec3(v[3 * i], v[3 * i + 1], v[3 * i + 2]);
  return mesh;
}

Mesh blendshape_forward(const FootModel& model, std::span<const double> coeffs, const FootParams& params) {
  if (coeffs.size() != model.blendshapes.size()) {
    throw DimensionError("expected " + std::to_string(model.blendshapes.size()) + " blendshape coefficients, got " +
                         std::to_string(coeffs.size()));
  }
  for (int k = 0; k < 3; ++k) {
    if (!(params.s[k] > 0.0)) throw std::invalid_argument("scale must be positive");
  }
  const Mat3 R = footfit::euler_rotation(params.r);
  Mesh mesh;
  mesh.faces = model.template_mesh.faces;
  mesh.vertices = model.template_mesh.vertices;
  for (std::size_t k = 0; k < coeffs.size(); ++k) {
    for (std::size_t i = 0; i < mesh.vertices.size(); ++i) mesh.vertices[i] += coeffs[k] * model.blendshapes[k][i];
  }
  for (Vec3& v : mesh.vertices) v = params.s.cwiseProduct(R * v) + params.t;
  return mesh;
}

// ---- procedural template --------------------------------------------------------------

namespace {

struct Blob {
  Vec3 center, axes;
  double exponent;

  double distance(const Vec3& p) const {
    const Vec3 q = (p - center).cwiseQuotient(axes).cwiseAbs();
    const double rho = std::pow(std::pow(q.x(), exponent) + std::pow(q.y(), exponent) + std::pow(q.z(), exponent),
                                1.0 / exponent);
    return (rho - 1.0) * axes.minCoeff();
  }
};

const std::vector<Blob>& foot_blobs() {
  static const std::vector<Blob> blobs = {
      {{0.000, 0.000, 0.035}, {0.100, 0.045, 0.035}, 2.5},   // body
      {{-0.085, -0.002, 0.032}, {0.035, 0.032, 0.032}, 2.2},  // heel
      {{0.055, 0.003, 0.025}, {0.040, 0.050, 0.025}, 2.5},   // forefoot
      {{-0.020, 0.000, 0.060}, {0.060, 0.038, 0.040}, 2.2},  // dorsum
      {{-0.060, 0.000, 0.150}, {0.035, 0.032, 0.120}, 2.5},  // ankle and leg
      {{0.112, 0.030, 0.018}, {0.022, 0.014, 0.014}, 2.2},   // toes, big to little
      {{0.106, 0.009, 0.016}, {0.016, 0.009, 0.011}, 2.2},
      {{0.098, -0.008, 0.015}, {0.015, 0.008, 0.010}, 2.2},
      {{0.089, -0.023, 0.014}, {0.014, 0.008, 0.009}, 2.2},
      {{0.078, -0.036, 0.013}, {0.013, 0.008, 0.009}, 2.2},
  };
  return blobs;
}

double foot_distance(const Vec3& p) {
  constexpr double k = 0.004;
  const auto& blobs = foot_blobs();
  double d[16];
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < blobs.size(); ++i) {
    d[i] = blobs[i].distance(p);
    m = std::min(m, d[i]);
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < blobs.size(); ++i) acc += std::exp(-(d[i] - m) / k);
  return m - k * std::log(acc);
}

}  // namespace

TemplateAsset make_template_foot(int subdivision) {
  const Mesh sphere = make_icosphere(subdivision, 1.0);
  const Vec3 origin(-0.02, 0.0, 0.05);
  const Vec3 stretch(0.13, 0.05, 0.12);

  TemplateAsset asset;
  asset.mesh.faces = sphere.faces;
  asset.mesh.vertices.resize(sphere.vertices.size());
  for (std::size_t i = 0; i < sphere.vertices.size(); ++i) {
    const Vec3 dir = sphere.vertices[i].cwiseProduct(stretch).normalized();
    constexpr double step = 0.001;
    double inside = 0.0, outside = step;
    while (foot_distance(origin + outside * dir) < 0.0) {
      inside = outside;
      outside += step;
      if (outside > 0.5) throw std::logic_error("template ray march did not leave the surface");
    }
    for (int it = 0; it < 50; ++it) {
      const double mid = 0.5 * (inside + outside);
      (foot_distance(origin + mid * dir) < 0.0 ? inside : outside) = mid;
    }
    asset.mesh.vertices[i] = origin + 0.5 * (inside + outside) * dir;
  }

  // Keypoint targets in the construction frame.
  const auto& blobs = foot_blobs();
  std::vector<Vec3> targets;
  for (int toe = 0; toe < 5; ++toe) {
    const Blob& b = blobs[5 + toe];
    targets.push_back(b.center + Vec3(b.axes.x(), 0.0, 0.0));
  }
  targets.push_back({0.055, 0.060, 0.020});
  targets.push_back({0.035, -0.055, 0.020});
  targets.push_back({-0.130, 0.000, 0.030});
  targets.push_back({-0.090, 0.000, -0.010});
  targets.push_back({-0.060, 0.035, 0.005});
  targets.push_back({-0.010, 0.045, 0.010});
  targets.push_back({0.040, 0.050, 0.005});
  KdTree tree(asset.mesh.vertices);
  for (const Vec3& target : targets) asset.keypoint_ids.push_back(static_cast<int>(tree.nearest(target).index));

  // Sole on z = 0, centred in x and y.
  Vec3 lo = asset.mesh.vertices.front(), hi = lo;
  for (const Vec3& v : asset.mesh.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  const Vec3 shift(-0.5 * (lo.x() + hi.x()), -0.5 * (lo.y() + hi.y()), -lo.z());
  for (Vec3& v : asset.mesh.vertices) v += shift;

  // Medial arch: lift the inner sole; the map z -> z + lift (1 - z / h) is monotone for lift < h.
  const double arch_x = -0.01 + shift.x();
  for (Vec3& v : asset.mesh.vertices) {
    constexpr double h = 0.02, lift = 0.008;
    if (v.z() >= h || v.y() <= 0.0) continue;
    const double along = std::exp(-std::pow((v.x() - arch_x) / 0.035, 2.0));
    const double side = std::min(1.0, v.y() / 0.03);
    const double across = side * side * (3.0 - 2.0 * side);
    v.z() += lift * along * across * (1.0 - v.z() / h);
  }

  std::set<int> unique(asset.keypoint_ids.begin(), asset.keypoint_ids.end());
  if (unique.size() != asset.keypoint_ids.size()) throw std::logic_error("template keypoints are not distinct");
  return asset;
}

// ---- default model ---------------------------------------------------------------------

FootModel make_default_model(const ModelOptions& options) {
  if (options.shape_dim < 0 || options.pose_dim < 0 || options.hidden <= 0 || options.hidden_layers < 1) {
    throw ConfigError("invalid model options");
  }
  TemplateAsset asset = make_template_foot();
  FootModel model;
  model.template_mesh = std::move(asset.mesh);
  model.keypoint_ids = std::move(asset.keypoint_ids);
  model.field.shape_dim = options.shape_dim;
  model.field.pose_dim = options.pose_dim;

  std::mt19937_64 rng(options.seed);
  std::normal_distribution<double> normal(0.0, 1.0);
  const int codes = options.shape_dim + options.pose_dim;
  int in = 3 + codes;
  for (int l = 0; l <= options.hidden_layers; ++l) {
    DenseLayer layer;
    layer.in = in;
    layer.out = l == options.hidden_layers ? 3 : options.hidden;
    layer.activation = l == options.hidden_layers ? Activation::kLinear : Activation::kTanh;
    layer.weight.resize(static_cast<std::size_t>(layer.in) * layer.out);
    layer.bias.assign(layer.out, 0.0);
    for (int i = 0; i < layer.in; ++i) {
      double stddev = 1.0 / std::sqrt(static_cast<double>(layer.in));
      if (l == 0) stddev = i < 3 ? 15.0 : 1.0 / std::sqrt(std::max(1, codes));
      for (int o = 0; o < layer.out; ++o) layer.weight[static_cast<std::size_t>(i) * layer.out + o] = stddev * normal(rng);
    }
    if (l < options.hidden_layers) {
      for (double& b : layer.bias) b = 0.1 * normal(rng);
    }
    model.field.layers.push_back(std::move(layer));
    in = options.hidden;
  }

  // Scale the output layer so unit-variance codes move vertices by the requested RMS.
  const auto& verts = model.template_mesh.vertices;
  const std::vector<double> zero_s(options.shape_dim, 0.0), zero_p(options.pose_dim, 0.0);
  const std::vector<Vec3> base = model.field.evaluate(verts, zero_s, zero_p);
  double sum2 = 0.0;
  std::size_t count = 0;
  if (codes > 0) {
    for (int trial = 0; trial < 8; ++trial) {
      std::vector<double> zs(options.shape_dim), zp(options.pose_dim);
      for (double& v : zs) v = normal(rng);
      for (double& v : zp) v = normal(rng);
      const std::vector<Vec3> moved = model.field.evaluate(verts, zs, zp);
      for (std::size_t i = 0; i < verts.size(); ++i) {
        sum2 += (moved[i] - base[i]).squaredNorm();
        ++count;
      }
    }
  }
  const double rms = count > 0 ? std::sqrt(sum2 / static_cast<double>(count)) : 0.0;
  const double gain = rms > 0.0 ? options.displacement_rms / rms : options.displacement_rms;
  for (double& w : model.field.layers.back().weight) w *= gain;

  const int basis = std::min(options.blendshapes, options.shape_dim);
  for (int k = 0; k < basis; ++k) {
    std::vector<double> plus(options.shape_dim, 0.0), minus(options.shape_dim, 0.0);
    plus[k] = 1.0;
    minus[k] = -1.0;
    const std::vector<Vec3> a = model.field.evaluate(verts, plus, zero_p);
    const std::vector<Vec3> b = model.field.evaluate(verts, minus, zero_p);
    std::vector<Vec3> field(verts.size());
    for (std::size_t i = 0; i < verts.size(); ++i) field[i] = 0.5 * (a[i] - b[i]);
    model.blendshapes.push_back(std::move(field));
  }
  model.validate();
  return model;
}

// ---- model file ------------------------------------------------------------------------

namespace {

template <class T>
T to_little(T v) {
  if constexpr (std::endian::native == std::endian::big) {
    unsigned char bytes[sizeof(T)];
    std::memcpy(bytes, &v, sizeof(T));
    std::reverse(bytes, bytes + sizeof(T));
    std::memcpy(&v, bytes, sizeof(T));
  }
  return v;
}

class Writer {
 public:
  explicit Writer(const std::filesystem::path& path) : out_(path, std::ios::binary), path_(path) {
    if (!out_) throw IoError("cannot open " + path.string() + " for writing");
  }
  template <class T>
  void put(T v) {
    v = to_little(v);
    out_.write(reinterpret_cast<const char*>(&v), sizeof(T));
  }
  void u32(std::size_t v) { put(static_cast<std::uint32_t>(v)); }
  void finish() {
    out_.flush();
    if (!out_) throw IoError("failed writing " + path_.string());
  }
  std::ofstream& stream() { return out_; }

 private:
  std::ofstream out_;
  std::filesystem::path path_;
};

class Reader {
 public:
  explicit Reader(const std::filesystem::path& path) : in_(path, std::ios::binary), path_(path) {
    if (!in_) throw IoError("cannot open " + path.string());
  }
  template <class T>
  T get() {
    T v;
    in_.read(reinterpret_cast<char*>(&v), sizeof(T));
    if (in_.gcount() != static_cast<std::streamsize>(sizeof(T))) throw IoError("truncated model file " + path_.string());
    return to_little(v);
  }
  std::size_t count(std::size_t limit) {
    const std::uint32_t n = get<std::uint32_t>();
    if (n > limit) throw IoError("implausible count in model file " + path_.string());
    return n;
  }
  bool at_end() { return in_.peek() == std::char_traits<char>::eof(); }
  std::ifstream& stream() { return in_; }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::ifstream in_;
  std::filesystem::path path_;
};

constexpr std::size_t kMaxCount = 1u << 26;

}  // namespace

void save_model(const std::filesystem::path& path, const FootModel& model) {
  model.validate();
  Writer w(path);
  w.stream().write("FMDL", 4);
  w.u32(kModelVersion);
  w.u32(model.template_mesh.vertices.size());
  for (const Vec3& v : model.template_mesh.vertices) {
    for (int k = 0; k < 3; ++k) w.put<double>(v[k]);
  }
  w.u32(model.template_mesh.faces.size());
  for (const Face& f : model.template_mesh.faces) {
    for (int k = 0; k < 3; ++k) w.put<std::int32_t>(f[k]);
  }
  w.u32(model.keypoint_ids.size());
  for (int id : model.keypoint_ids) w.put<std::int32_t>(id);
  w.u32(model.field.shape_dim);
  w.u32(model.field.pose_dim);
  w.u32(model.field.layers.size());
  for (const DenseLayer& l : model.field.layers) {
    w.u32(l.in);
    w.u32(l.out);
    w.put<std::uint32_t>(static_cast<std::uint32_t>(l.activation));
  }
  for (const DenseLayer& l : model.field.layers) {
    for (double v : l.weight) w.put<double>(v);
    for (double v : l.bias) w.put<double>(v);
  }
  w.u32(model.blendshapes.size());
  for (const auto& b : model.blendshapes) {
    for (const Vec3& v : b) {
      for (int k = 0; k < 3; ++k) w.put<double>(v[k]);
    }
  }
  w.finish();
}

FootModel load_model(const std::filesystem::path& path, int expected_shape_dim, int expected_pose_dim) {
  Reader r(path);
  char magic[4] = {};
  r.stream().read(magic, 4);
  if (r.stream().gcount() != 4 || std::memcmp(magic, "FMDL", 4) != 0) {
    throw IoError("not a model file (bad magic): " + path.string());
  }
  const std::uint32_t version = r.get<std::uint32_t>();
  if (version != kModelVersion) {
    throw IoError("unsupported model version " + std::to_string(version) + " in " + path.string());
  }
  FootModel model;
  model.template_mesh.vertices.resize(r.count(kMaxCount));
  for (Vec3& v : model.template_mesh.vertices) {
    for (int k = 0; k < 3; ++k) v[k] = r.get<double>();
  }
  model.template_mesh.faces.resize(r.count(kMaxCount));
  for (Face& f : model.template_mesh.faces) {
    for (int k = 0; k < 3; ++k) f[k] = r.get<std::int32_t>();
  }
  model.keypoint_ids.resize(r.count(1024));
  for (int& id : model.keypoint_ids) id = r.get<std::int32_t>();
  model.field.shape_dim = static_cast<int>(r.count(4096));
  model.field.pose_dim = static_cast<int>(r.count(4096));
  if ((expected_shape_dim >= 0 && expected_shape_dim != model.field.shape_dim) ||
      (expected_pose_dim >= 0 && expected_pose_dim != model.field.pose_dim)) {
    throw DimensionError("model code dimensions (" + std::to_string(model.field.shape_dim) + ", " +
                         std::to_string(model.field.pose_dim) + ") differ from the expected (" +
                         std::to_string(expected_shape_dim) + ", " + std::to_string(expected_pose_dim) + ")");
  }
  model.field.layers.resize(r.count(64));
  for (DenseLayer& l : model.field.layers) {
    l.in = static_cast<int>(r.count(1 << 16));
    l.out = static_cast<int>(r.count(1 << 16));
    const std::uint32_t act = r.get<std::uint32_t>();
    if (act > 1) throw IoError("unknown activation in " + path.string());
    l.activation = static_cast<Activation>(act);
  }
  for (DenseLayer& l : model.field.layers) {
    l.weight.resize(static_cast<std::size_t>(l.in) * l.out);
    l.bias.resize(l.out);
    for (double& v : l.weight) v = r.get<double>();
    for (double& v : l.bias) v = r.get<double>();
  }
  model.blendshapes.resize(r.count(4096));
  for (auto& b : model.blendshapes) {
    b.resize(model.template_mesh.vertices.size());
    for (Vec3& v : b) {
      for (int k = 0; k < 3; ++k) v[k] = r.get<double>();
    }
  }
  if (!r.at_end()) throw IoError("trailing bytes in model file " + path.string());
  try {
    model.validate();
  } catch (const std::invalid_argument& e) {
    throw IoError("invalid model file " + path.string() + ": " + e.what());
  }
  return model;
}

}  // namespace footfit
