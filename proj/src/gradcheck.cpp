#include "footfit/gradcheck.hpp"

#include "footfit/losses.hpp"
#include "footfit/renderer.hpp"

#include <chrono>
#include <functional>
#include <random>

namespace footfit {

namespace {

using ad::Tape;
using ad::Tensor;
using ad::Var;
using Fn = std::function<Var(Tape&, std::span<const Var>)>;

Tensor uniform(ad::Shape shape, double lo, double hi, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(lo, hi);
  Tensor t(std::move(shape));
  for (double& v : t.data) v = u(rng);
  return t;
}

Tensor unit_rows(std::size_t rows, std::mt19937_64& rng) {
  std::normal_distribution<double> n(0.0, 1.0);
  Tensor t({rows, 3});
  for (std::size_t i = 0; i < rows; ++i) {
    Vec3 v(n(rng), n(rng), n(rng));
    v.normalize();
    for (int k = 0; k < 3; ++k) t[3 * i + k] = v[k];
  }
  return t;
}

Camera test_camera(int size, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  const Vec3 eye = Vec3(u(rng), u(rng), u(rng)).normalized() * 0.35;
  const Vec3 up = std::abs(eye.normalized().z()) > 0.9 ? Vec3::UnitX() : Vec3::UnitZ();
  return look_at(eye, Vec3::Zero(), up, make_intrinsics(30.0, 36.0, size, size));
}

Mesh test_blob(std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.8, 1.2);
  Mesh m = make_icosphere(2, 0.05);
  const Vec3 stretch(u(rng), u(rng) * 0.8, u(rng) * 0.6);
  for (Vec3& v : m.vertices) v = v.cwiseProduct(stretch);
  return m;
}

Tensor mesh_tensor(const Mesh& m) {
  Tensor t({m.vertices.size(), 3});
  for (std::size_t i = 0; i < m.vertices.size(); ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = m.vertices[i][k];
  }
  return t;
}

struct Check {
  std::string name;
  // Builds the function and its inputs for one configuration.
  std::function<std::pair<Fn, std::vector<Tensor>>(std::mt19937_64&)> make;
  double step = 1e-5;
};

std::vector<Check> build_checks(const FootModel& model) {
  std::vector<Check> checks;

  checks.push_back({"angmf_nll", [](std::mt19937_64& rng) {
                      const std::size_t p = 12;
                      auto gt = std::make_shared<Tensor>(unit_rows(p, rng));
                      Fn f = [gt](Tape& tape, std::span<const Var> in) {
                        return angmf_nll(ad::row_normalize(in[0]), in[1], tape.constant(*gt));
                      };
                      return std::make_pair(f, std::vector<Tensor>{unit_rows(p, rng), uniform({p}, 0.1, 20.0, rng)});
                    }});

  checks.push_back({"kp_train_nll", [](std::mt19937_64& rng) {
                      const std::size_t m = 2 * kNumKeypoints;
                      auto gt = std::make_shared<Tensor>(uniform({m, 2}, 0.0, 1.0, rng));
                      auto vis = std::make_shared<Tensor>(uniform({m}, 0.0, 1.0, rng));
                      for (double& v : vis->data) v = v < 0.7 ? 1.0 : 0.0;
                      Fn f = [gt, vis](Tape&, std::span<const Var> in) {
                        return kp_train_nll(in[0], in[1], *gt, *vis, 2);
                      };
                      return std::make_pair(
                          f, std::vector<Tensor>{uniform({m, 2}, 0.0, 1.0, rng), uniform({m, 2}, 0.02, 0.2, rng)});
                    }});

  checks.push_back({"kp_fit_loss", [](std::mt19937_64& rng) {
                      const std::size_t views = 3, k = kNumKeypoints;
                      auto obs = std::make_shared<std::vector<KeypointObservation>>(views);
                      std::uniform_real_distribution<double> u(0.0, 1.0);
                      for (auto& o : *obs) {
                        o.resize(k);
                        for (auto& l : o) {
                          l.position = Vec2(u(rng), u(rng));
                          l.sigma = Vec2(0.02 + 0.1 * u(rng), 0.02 + 0.1 * u(rng));
                          l.visibility = u(rng) < 0.8 ? 1.0 : 0.0;
                        }
                      }
                      Fn f = [obs](Tape&, std::span<const Var> in) { return kp_fit_loss(in, *obs); };
                      std::vector<Tensor> inputs;
                      for (std::size_t v = 0; v < views; ++v) inputs.push_back(uniform({k, 2}, 0.0, 1.0, rng));
                      return std::make_pair(f, inputs);
                    }});

  checks.push_back({"normal_fit_loss", [](std::mt19937_64& rng) {
                      const std::size_t p = 16;
                      auto mu = std::make_shared<Tensor>(unit_rows(p, rng));
                      auto kappa = std::make_shared<Tensor>(uniform({p}, 0.0, 50.0, rng));
                      Fn f = [mu, kappa](Tape&, std::span<const Var> in) {
                        return normal_fit_loss(ad::row_normalize(in[0]), *mu, *kappa);
                      };
                      return std::make_pair(f, std::vector<Tensor>{unit_rows(p, rng)});
                    }});

  checks.push_back({"silhouette_l2", [](std::mt19937_64& rng) {
                      auto target = std::make_shared<Tensor>(uniform({8, 10}, 0.0, 1.0, rng));
                      for (double& v : target->data) v = v < 0.5 ? 0.0 : 1.0;
                      Fn f = [target](Tape&, std::span<const Var> in) { return silhouette_l2(in[0], *target); };
                      return std::make_pair(f, std::vector<Tensor>{uniform({8, 10}, 0.0, 1.0, rng)});
                    }});

  checks.push_back({"model_forward", [&model](std::mt19937_64& rng) {
                      const std::size_t nv = model.template_mesh.vertices.size();
                      auto w = std::make_shared<Tensor>(uniform({nv, 3}, -1.0, 1.0, rng));
                      Fn f = [&model, w, nv](Tape& tape, std::span<const Var> in) {
                        const ParamVars p{in[0], in[1], in[2], in[3], in[4]};
                        return ad::dot(forward(model, p), tape.constant(*w)) * (1.0 / static_cast<double>(nv));
                      };
                      const auto ns = static_cast<std::size_t>(model.field.shape_dim);
                      const auto np = static_cast<std::size_t>(model.field.pose_dim);
                      return std::make_pair(
                          f, std::vector<Tensor>{uniform({3}, -0.4, 0.4, rng), uniform({3}, -0.05, 0.05, rng),
                                                 uniform({3}, 0.8, 1.2, rng), uniform({ns}, -1.0, 1.0, rng),
                                                 uniform({np}, -1.0, 1.0, rng)});
                    }});

  checks.push_back({"keypoint_projection", [](std::mt19937_64& rng) {
                      auto cam = std::make_shared<Camera>(test_camera(64, rng));
                      auto w = std::make_shared<Tensor>(uniform({kNumKeypoints, 2}, -1.0, 1.0, rng));
                      Fn f = [cam, w](Tape& tape, std::span<const Var> in) {
                        const Var rot = euler_rotation(in[1]);
                        const Var world = ad::matmul(in[0], ad::transpose(rot));
                        return ad::dot(project_normalized(to_camera_frame(world, *cam), *cam), tape.constant(*w));
                      };
                      return std::make_pair(f, std::vector<Tensor>{uniform({kNumKeypoints, 3}, -0.06, 0.06, rng),
                                                                   uniform({3}, -0.3, 0.3, rng)});
                    }});

  checks.push_back({"rendered_normals", [](std::mt19937_64& rng) {
                      const Mesh blob = test_blob(rng);
                      const Camera cam = test_camera(32, rng);
                      auto faces = std::make_shared<std::vector<Face>>(blob.faces);
                      auto frags = std::make_shared<Fragments>(rasterize(blob, cam));
                      auto pixels = std::make_shared<std::vector<std::size_t>>(frags->covered_pixels());
                      auto w = std::make_shared<Tensor>(uniform({pixels->size(), 3}, -1.0, 1.0, rng));
                      Fn f = [cam, faces, frags, pixels, w](Tape& tape, std::span<const Var> in) {
                        const Var vn = vertex_normals(to_camera_frame(in[0], cam), *faces);
                        const Var n = interpolate_normals(vn, *faces, *frags, *pixels);
                        return ad::dot(n, tape.constant(*w)) * (1.0 / static_cast<double>(pixels->size()));
                      };
                      return std::make_pair(f, std::vector<Tensor>{mesh_tensor(blob)});
                    }});

  checks.push_back({"soft_silhouette", [](std::mt19937_64& rng) {
                      const Mesh blob = test_blob(rng);
                      const Camera cam = test_camera(32, rng);
                      std::uniform_real_distribution<double> sharp(2.0, 40.0);
                      const double sharpness = sharp(rng);
                      auto faces = std::make_shared<std::vector<Face>>(blob.faces);
                      auto topo = std::make_shared<EdgeTopology>(build_edge_topology(blob.faces));
                      auto frags = std::make_shared<Fragments>(rasterize(blob, cam));
                      auto w = std::make_shared<Tensor>(uniform({32, 32}, -1.0, 1.0, rng));
                      Fn f = [cam, faces, topo, frags, w, sharpness](Tape& tape, std::span<const Var> in) {
                        const Var soft =
                            soft_silhouette(to_camera_frame(in[0], cam), *faces, *topo, cam, *frags, sharpness);
                        return ad::dot(soft, tape.constant(*w));
                      };
                      return std::make_pair(f, std::vector<Tensor>{mesh_tensor(blob)});
                    },
                    // Small step: contour membership and nearest-edge choice change for near edge-on faces.
                    1e-7});

  return checks;
}

}  // namespace

std::vector<GradCheckResult> run_gradient_suite(int configs, std::uint64_t seed, const FootModel* model) {
  FootModel fallback;
  if (model == nullptr) {
    fallback = make_default_model();
    model = &fallback;
  }
  std::vector<GradCheckResult> results;
  for (const Check& check : build_checks(*model)) {
    const auto start = std::chrono::steady_clock::now();
    GradCheckResult r;
    r.name = check.name;
    r.configs = configs;
    for (int c = 0; c < configs; ++c) {
      std::mt19937_64 rng(seed ^ static_cast<std::uint64_t>(c));
      auto [f, inputs] = check.make(rng);
      r.max_error = std::max(r.max_error, ad::grad_check(f, inputs, check.step));
    }
    r.seconds = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    results.push_back(r);
  }
  return results;
}

}  // namespace footfit
