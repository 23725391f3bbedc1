// Acceptance suite: one PASS/FAIL line per criterion on stdout, timing and
// details on the same line. Exit status is the number of failed criteria.

#include "footfit/evalign.hpp"
#include "footfit/fitting.hpp"
#include "footfit/gradcheck.hpp"
#include "footfit/synth.hpp"

#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <random>
#include <sstream>
#include <string>

using namespace footfit;
namespace fs = std::filesystem;

namespace {

int failures = 0;

void report(bool pass, const std::string& name, const std::string& detail) {
  std::printf("%s %s: %s\n", pass ? "PASS" : "FAIL", name.c_str(), detail.c_str());
  std::fflush(stdout);
  failures += !pass;
}

class Stopwatch {
 public:
  double seconds() const { return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count(); }

 private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

std::string fmt(const char* f, auto... args) {
  char buf[512];
  std::snprintf(buf, sizeof buf, f, args...);
  return buf;
}

double closed_form_error_deg(double kappa) {
  const double e = std::exp(-kappa * kPi);
  return (kPi * e / (1.0 + e) + 2.0 * kappa / (1.0 + kappa * kappa)) * kDegPerRad;
}

ChamferStats fit_and_score(const FootModel& model, const Scene& scene, const std::vector<std::size_t>& selected,
                           const FitConfig& cfg) {
  const auto all = scene_observations(scene);
  std::vector<ViewObservation> views;
  for (std::size_t i : selected) views.push_back(all[i]);
  const FitResult r = fit(model, views, cfg);
  return eval_3d(forward_mesh(model, r.params), scene.gt_mesh);
}

std::vector<std::size_t> first_n(std::size_t n) {
  std::vector<std::size_t> v(n);
  for (std::size_t i = 0; i < n; ++i) v[i] = i;
  return v;
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), {}};
}

void gradient_suite(const FootModel& model) {
  Stopwatch sw;
  const auto results = run_gradient_suite(20, 0, &model);
  bool ok = true;
  double worst = 0.0;
  std::string worst_name;
  for (const auto& r : results) {
    ok = ok && r.passed() && r.configs == 20;
    if (r.max_error >= worst) {
      worst = r.max_error;
      worst_name = r.name;
    }
  }
  const double t = sw.seconds();
  report(ok && t < 120.0, "gradient_suite",
         fmt("%zu checks x 20 configs, max rel error %.2e (%s) < 1e-4, %.1f s < 120 s", results.size(), worst,
             worst_name.c_str(), t));
}

void angmf_oracle() {
  const double e0 = expected_angular_error(0.0);
  std::mt19937_64 rng(2024);
  std::uniform_real_distribution<double> u(0.0, 100.0);
  double worst_lookup = 0.0, worst_quad = 0.0;
  for (int i = 0; i < 1000; ++i) {
    const double k = u(rng);
    const double exact = expected_angular_error_exact(k);
    worst_lookup = std::max(worst_lookup, std::abs(expected_angular_error(k) - exact));
    worst_quad = std::max(worst_quad, std::abs(exact - closed_form_error_deg(k)));
  }
  bool monotone = true;
  double prev = e0;
  for (int i = 1; i <= 100000; ++i) {
    const double e = expected_angular_error(100.0 * i / 100000.0);
    monotone = monotone && e < prev;
    prev = e;
  }
  report(e0 == 90.0 && worst_lookup < 0.1 && monotone && worst_quad < 1e-6, "angmf_oracle",
         fmt("E(0) = %.17g, max |lookup - quadrature| %.2e deg < 0.1 over 1000 kappa, quadrature vs closed form "
             "%.1e deg, strictly decreasing on 1e5-point grid: %s",
             e0, worst_lookup, worst_quad, monotone ? "yes" : "no"));
}

void closed_form_losses() {
  ad::Tape tape;
  auto rows = [](const Vec3& v) { return ad::Tensor::matrix(1, 3, {v.x(), v.y(), v.z()}); };
  const double a = angmf_nll(tape.leaf(rows(Vec3::UnitX())), tape.leaf(ad::Tensor::vector({0.0})),
                             tape.constant(rows(Vec3::UnitY())))
                       .item();
  const double b = angmf_nll(tape.leaf(rows(Vec3::UnitZ())), tape.leaf(ad::Tensor::vector({1.0})),
                             tape.constant(rows(Vec3::UnitZ())))
                       .item();
  KeypointObservation obs(kNumKeypoints);
  for (auto& l : obs) l.visibility = 0.0;
  obs[0] = {Vec2(0.5, 0.5), Vec2(0.1, 0.1), 1.0};
  ad::Tensor proj({kNumKeypoints, 2}, 0.0);
  proj[0] = 0.6;
  proj[1] = 0.5;
  const std::vector<ad::Var> p{tape.leaf(proj)};
  const std::vector<KeypointObservation> o{obs};
  const double c = kp_fit_loss(p, o).item();
  const double ea = std::abs(a - std::log(2.0)), eb = std::abs(b - std::log((1 + std::exp(-kPi)) / 2)),
               ec = std::abs(c - 1.0 / 12.0);
  report(ea <= 1e-12 && eb <= 1e-12 && ec <= 1e-12, "closed_form_losses",
         fmt("|nll(k=0) - ln 2| %.1e, |nll(k=1,theta=0) - ln((1+e^-pi)/2)| %.1e, |kp single - 1/12| %.1e (tol 1e-12)",
             ea, eb, ec));
}

void registration_round_trip(const FootModel& model) {
  Stopwatch sw;
  double dt = 0.0, dr = 0.0, ds = 0.0;
  const int scenes = 5;
  for (int s = 0; s < scenes; ++s) {
    SceneSpec spec;
    spec.views = 8;
    spec.seed = static_cast<std::uint64_t>(s);
    spec.gt = random_gt_params(model, 100 + s, 0.0);
    const Scene scene = generate_scene(spec, model);
    FitConfig cfg;
    cfg.stage1_epochs = 5000;
    const FitResult r = fit_stage1(model, scene_observations(scene), cfg, FootParams::identity(model));
    const Mat3 dR = euler_rotation(r.params.r).transpose() * euler_rotation(spec.gt.r);
    dr = std::max(dr, std::acos(std::clamp((dR.trace() - 1.0) / 2.0, -1.0, 1.0)) * kDegPerRad);
    dt = std::max(dt, (r.params.t - spec.gt.t).cwiseAbs().maxCoeff());
    ds = std::max(ds, (r.params.s.cwiseQuotient(spec.gt.s) - Vec3::Ones()).cwiseAbs().maxCoeff());
  }
  const double t = sw.seconds();
  report(dt < 1e-3 && dr < 0.5 && ds < 0.005 && t < 180.0, "registration_round_trip",
         fmt("%d scenes, 8 views 120x160, stage 1 from identity (5000 epochs): max |dt| %.4f mm < 1, rotation %.4f "
             "deg < 0.5, max |ds| %.4f%% < 0.5; %.1f s < 180 s",
             scenes, dt * 1e3, dr, ds * 100, t));
}

struct FullRun {
  Scene scene;
  ChamferStats full;
};

FullRun full_round_trip(const FootModel& model) {
  Stopwatch sw;
  SceneSpec spec;
  spec.views = 8;
  spec.seed = 7;
  spec.noise.sigma_view_deg = 5.0;
  spec.gt = random_gt_params(model, 7, 0.5);
  FullRun run{generate_scene(spec, model), {}};
  run.full = fit_and_score(model, run.scene, first_n(8), FitConfig{});
  const double t = sw.seconds();
  double code_norm = 0.0;
  for (double z : spec.gt.z_shape) code_norm += z * z;
  report(run.full.mean_distance < 2e-3 && run.full.mean_angle_deg < 5.0 && t < 600.0 && code_norm > 0.0,
         "full_round_trip",
         fmt("8 views, sigma 5 deg, GT |z_s| %.2f: chamfer mean %.3f mm < 2, NN normal error mean %.3f deg < 5; "
             "%.1f s < 600 s",
             std::sqrt(code_norm), run.full.mean_distance * 1e3, run.full.mean_angle_deg, t));
  return run;
}

void few_view_trend(const FootModel& model) {
  SceneSpec spec;
  spec.views = 20;
  spec.seed = 11;
  spec.gt = random_gt_params(model, 11, 0.5);
  const Scene scene = generate_scene(spec, model);
  std::vector<Camera> cams;
  for (const auto& v : scene.views) cams.push_back(v.camera);
  const FitConfig cfg;
  const double c20 = fit_and_score(model, scene, select_views(cams, 20), cfg).mean_distance;
  const double c3 = fit_and_score(model, scene, select_views(cams, 3), cfg).mean_distance;
  const double c2 = fit_and_score(model, scene, select_views(cams, 2), cfg).mean_distance;
  report(c3 <= 1.5 * c20 && std::isfinite(c2), "few_view_trend",
         fmt("chamfer 20 views %.3f mm, 3 views %.3f mm <= 1.5 x 20-view = %.3f mm, 2 views %.3f mm (finite)",
             c20 * 1e3, c3 * 1e3, 1.5 * c20 * 1e3, c2 * 1e3));
}

void ablations(const FootModel& model, const FullRun& base) {
  FitConfig no_norm;
  no_norm.weights.norm = 0.0;
  const ChamferStats nn = fit_and_score(model, base.scene, first_n(8), no_norm);

  SceneSpec spec;
  spec.views = 8;
  spec.seed = 7;
  spec.gt = random_gt_params(model, 7, 0.5);
  spec.noise.corrupted_views = {2};
  const Scene corrupted = generate_scene(spec, model);
  const ChamferStats weighted = fit_and_score(model, corrupted, first_n(8), FitConfig{});
  FitConfig uniform;
  uniform.uniform_kappa = true;
  const ChamferStats flat = fit_and_score(model, corrupted, first_n(8), uniform);

  report(nn.mean_angle_deg >= base.full.mean_angle_deg && flat.mean_distance >= weighted.mean_distance,
         "ablation_direction",
         fmt("normal error w_norm=0 %.3f deg >= full %.3f deg; one corrupted view: equal-kappa chamfer %.3f mm >= "
             "weighted %.3f mm",
             nn.mean_angle_deg, base.full.mean_angle_deg, flat.mean_distance * 1e3, weighted.mean_distance * 1e3));
}

void alignment(const FootModel& model) {
  const Mesh foot = model.template_mesh;
  Vec3 lo = foot.vertices[0], hi = foot.vertices[0];
  for (const Vec3& v : foot.vertices) {
    lo = lo.cwiseMin(v);
    hi = hi.cwiseMax(v);
  }
  lo -= Vec3::Constant(0.03);
  hi += Vec3::Constant(0.03);
  std::mt19937_64 rng(31);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  auto outliers = [&](std::size_t n) {
    std::vector<Vec3> pts(n);
    for (Vec3& p : pts) p = lo + (hi - lo).cwiseProduct(Vec3(u(rng), u(rng), u(rng)));
    return pts;
  };
  const std::size_t n = 4000;
  std::vector<Vec3> source = sample_surface(foot, n, 1).points;
  for (const Vec3& p : outliers(n / 9)) source.push_back(p);  // 10% of the final cloud
  Vec3 pivot = Vec3::Zero();
  for (const Vec3& p : source) pivot += p / static_cast<double>(source.size());
  const AlignParams truth{(u(rng) - 0.5) * 0.8, (u(rng) - 0.5) * 0.04, (u(rng) - 0.5) * 0.04, 0.9 + 0.2 * u(rng)};
  std::vector<Vec3> target;
  for (const Vec3& p : sample_surface(foot, n, 2).points) target.push_back(apply_align(truth, pivot, p));
  for (const Vec3& p : outliers(n / 9)) target.push_back(apply_align(truth, pivot, p));

  const AlignResult r = align_4param(source, target);
  const double dth = std::abs(r.params.theta - truth.theta) * kDegPerRad;
  const double dtr = std::max(std::abs(r.params.tx - truth.tx), std::abs(r.params.ty - truth.ty));
  const double dsc = std::abs(r.params.s / truth.s - 1.0);

  const Vec3 normal = Vec3(u(rng) - 0.5, u(rng) - 0.5, 3.0).normalized();
  const Vec3 a = normal.unitOrthogonal(), b = normal.cross(a);
  std::vector<Vec3> floor;
  for (int i = 0; i < 3000; ++i) {
    floor.push_back(i < 300 ? Vec3(u(rng) - 0.5, u(rng) - 0.5, 0.2 * u(rng) + 0.01)
                            : a * (u(rng) - 0.5) + b * (u(rng) - 0.5) + normal * 0.02);
  }
  const FloorFit f = fit_floor(floor);
  const double dn = angle_deg(f.plane.normal, normal);

  report(dth < 0.5 && dtr < 1e-3 && dsc < 0.005 && dn < 0.5, "alignment",
         fmt("4-param with 10%% outliers (theta %.2f deg, t %.1f/%.1f mm, s %.3f): |dtheta| %.4f deg < 0.5, |dt| %.4f "
             "mm < 1, |ds| %.4f%% < 0.5; floor RANSAC 10%% outliers normal error %.4f deg < 0.5",
             truth.theta * kDegPerRad, truth.tx * 1e3, truth.ty * 1e3, truth.s, dth, dtr * 1e3, dsc * 100, dn));
}

void thresholding(const FootModel& model) {
  std::size_t background = 0, bg_included = 0, foreground = 0, fg_excluded = 0;
  for (double sigma : {5.0, 0.0}) {
    SceneSpec spec;
    spec.views = 4;
    spec.seed = 3;
    spec.noise.sigma_view_deg = sigma;
    spec.gt = random_gt_params(model, 3);
    const Scene scene = generate_scene(spec, model);
    for (const ViewLabels& v : scene.views) {
      const Image8 sil = silhouette_from_uncertainty(v.kappa, 30.0);
      for (std::size_t p = 0; p < v.mask.data.size(); ++p) {
        if (v.mask.data[p] == 0) {
          ++background;
          bg_included += sil.data[p] != 0;
        } else if (sigma == 0.0) {
          ++foreground;
          fg_excluded += sil.data[p] == 0;
        }
      }
    }
  }
  report(bg_included == 0 && fg_excluded == 0 && background > 0 && foreground > 0, "thresholding",
         fmt("30 deg threshold: %zu/%zu background (kappa = 0) pixels included, %zu/%zu noiseless foreground pixels "
             "excluded",
             bg_included, background, fg_excluded, foreground));
}

void determinism(const FootModel& model) {
  const fs::path root = fs::temp_directory_path() / "footfit_acceptance_det";
  fs::remove_all(root);
  std::vector<std::string> blobs;
  for (const char* threads : {"1", "4", "1"}) {
    setenv("FOOTFIT_THREADS", threads, 1);
    const fs::path dir = root / (std::string("run_") + std::to_string(blobs.size()));
    SceneSpec spec;
    spec.views = 3;
    spec.seed = 42;
    spec.gt = random_gt_params(model, 42);
    const Scene scene = generate_scene(spec, model);
    write_scene(dir / "scene", scene);
    FitConfig cfg;
    cfg.stage2_epochs = 20;
    const Scene back = read_scene(dir / "scene");
    const FitResult r = fit(model, scene_observations(back), cfg);
    write_params_json(dir / "params.json", r.params);
    write_trace_csv(dir / "trace.csv", r.trace);
    std::vector<Vec3> pts = sample_surface(scene.gt_mesh, 2000, 5).points;
    const FloorFit f = fit_floor(std::vector<Vec3>(pts.begin(), pts.end()), FloorConfig{200, 0.003, 0.01, 9});
    std::ostringstream os;
    os.precision(17);
    os << f.plane.normal.transpose() << ' ' << f.plane.d << ' ' << f.inliers.size();
    std::string blob;
    for (const char* file : {"scene/view_000/mu.pfm", "scene/view_001/kappa.pfm", "scene/view_002/keypoints.json",
                             "scene/cameras.json", "scene/gt_mesh.obj", "params.json", "trace.csv"}) {
      blob += slurp(dir / file);
    }
    blobs.push_back(blob + os.str());
  }
  unsetenv("FOOTFIT_THREADS");
  fs::remove_all(root);
  const bool same = blobs[0] == blobs[1] && blobs[1] == blobs[2];
  report(same, "determinism",
         fmt("scene files, fitted params, trace and RANSAC floor bit-identical across runs with 1, 4, 1 threads "
             "(%zu bytes compared per run)",
             blobs[0].size()));
}

}  // namespace

int main() {
  const FootModel model = make_default_model();
  gradient_suite(model);
  angmf_oracle();
  closed_form_losses();
  registration_round_trip(model);
  const FullRun base = full_round_trip(model);
  few_view_trend(model);
  ablations(model, base);
  alignment(model);
  thresholding(model);
  determinism(model);
  std::printf("%d criteria failed\n", failures);
  return failures == 0 ? 0 : 1;
}
