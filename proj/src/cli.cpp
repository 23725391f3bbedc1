#include "footfit/cli.hpp"

#include "footfit/error.hpp"
#include "footfit/evalign.hpp"
#include "footfit/fitting.hpp"
#include "footfit/footmodel.hpp"
#include "footfit/gradcheck.hpp"
#include "footfit/mesh_io.hpp"
#include "footfit/synth.hpp"
#include "json_util.hpp"

#include "CLI11.hpp"

#include <filesystem>
#include <fstream>
#include <functional>
#include <memory>
#include <optional>
#include <sstream>

namespace footfit {

namespace {

namespace fs = std::filesystem;
using json_util::json;

// ---- config resolution ---------------------------------------------------------------

/// Recursive merge; keys absent from `base` are rejected. A null default accepts any value.
void merge(json& base, const json& patch, const std::string& where) {
  if (!patch.is_object()) throw ConfigError(where + ": expected an object");
  for (auto it = patch.begin(); it != patch.end(); ++it) {
    if (!base.contains(it.key())) throw ConfigError(where + ": unknown key '" + it.key() + "'");
    json& slot = base[it.key()];
    if (slot.is_object() && it.value().is_object()) {
      merge(slot, it.value(), where + "." + it.key());
    } else {
      slot = it.value();
    }
  }
}

/// Flags overlay the merged config only when passed on the command line.
class FlagSet {
 public:
  explicit FlagSet(CLI::App* app) : app_(app) {}

  template <class T>
  CLI::Option* option(const std::string& flag, const std::string& pointer, const std::string& help) {
    auto value = std::make_shared<T>();
    CLI::Option* opt = app_->add_option(flag, *value, help);
    overlays_.push_back([opt, value, pointer](json& j) {
      if (opt->count() > 0) j[json::json_pointer(pointer)] = *value;
    });
    return opt;
  }

  CLI::Option* flag(const std::string& flag, const std::string& pointer, const std::string& help) {
    CLI::Option* opt = app_->add_flag(flag, help);
    overlays_.push_back([opt, pointer](json& j) {
      if (opt->count() > 0) j[json::json_pointer(pointer)] = true;
    });
    return opt;
  }

  void apply(json& j) const {
    for (const auto& f : overlays_) f(j);
  }

 private:
  CLI::App* app_;
  std::vector<std::function<void(json&)>> overlays_;
};

struct RunResult {
  json summary;
  int code = kExitOk;
};

struct Context {
  std::ostream& err;
  bool quiet = false;

  void progress(const std::string& line) const {
    if (!quiet) err << line << "\n" << std::flush;
  }
};

struct Subcommand {
  CLI::App* app = nullptr;
  std::unique_ptr<FlagSet> flags;
  std::string config_path;
  json defaults;
  std::function<RunResult(const json&, const Context&)> run;
};

template <class T>
T get(const json& cfg, const char* key) {
  try {
    return cfg.at(key).get<T>();
  } catch (const json::exception&) {
    throw ConfigError(std::string("bad value for '") + key + "'");
  }
}

std::optional<std::string> get_path(const json& cfg, const char* key) {
  if (!cfg.contains(key) || cfg.at(key).is_null()) return std::nullopt;
  return get<std::string>(cfg, key);
}

std::string require_path(const json& cfg, const char* key, const std::string& command) {
  const auto p = get_path(cfg, key);
  if (!p || p->empty()) throw ConfigError(command + ": --" + key + " is required");
  return *p;
}

fs::path prepare_out(const json& cfg, const std::string& command) {
  const fs::path out = require_path(cfg, "out", command);
  std::error_code ec;
  fs::create_directories(out, ec);
  if (ec) throw IoError("cannot create " + out.string() + ": " + ec.message());
  return out;
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream f(path);
  if (!f) throw IoError("cannot open " + path.string() + " for writing");
  f << text;
  if (!f) throw IoError("failed writing " + path.string());
}

FootModel load_or_default_model(const json& cfg) {
  if (const auto path = get_path(cfg, "model")) return load_model(*path);
  return make_default_model();
}

json report_json(const NormalEvalReport& r) {
  return {{"mean_deg", r.mean_deg}, {"median_deg", r.median_deg}, {"rmse_deg", r.rmse_deg},
          {"pct_11_25", r.pct_11_25}, {"pct_22_5", r.pct_22_5}, {"pct_30", r.pct_30}, {"pixels", r.pixels}};
}

json report_json(const ChamferStats& s) {
  return {{"mean_mm", s.mean_distance * 1000.0},
          {"median_mm", s.median_distance * 1000.0},
          {"mean_angle_deg", s.mean_angle_deg},
          {"median_angle_deg", s.median_angle_deg}};
}

json align_json(const AlignParams& p) {
  return {{"theta", p.theta}, {"tx", p.tx}, {"ty", p.ty}, {"s", p.s}};
}

// ---- synth ------------------------------------------------------------------------------

Subcommand make_synth(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("synth", "Generate a synthetic multi-view scene");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--model", "/model", "Model file (default: built-in model)");
  sc.flags->option<int>("--views", "/views", "Number of views");
  sc.flags->option<std::string>("--out", "/out", "Scene directory");
  sc.flags->option<double>("--noise", "/noise/sigma_view_deg", "Normal noise scale (deg); 0 gives exact normals");
  sc.flags->option<double>("--code-std", "/code_std", "Std of random ground-truth codes");
  sc.flags->option<std::vector<int>>("--corrupt", "/noise/corrupted_views", "Views with systematic normal error");
  sc.defaults = json_util::to_json(SceneSpec{});
  sc.defaults["gt"] = nullptr;
  sc.defaults["model"] = nullptr;
  sc.defaults["out"] = nullptr;
  sc.defaults["code_std"] = 0.5;
  sc.run = [](const json& cfg, const Context& ctx) {
    const fs::path out = require_path(cfg, "out", "synth");
    const FootModel model = load_or_default_model(cfg);
    json scene_cfg = cfg;
    for (const char* k : {"gt", "model", "out", "code_std"}) scene_cfg.erase(k);
    SceneSpec spec;
    json_util::from_json(scene_cfg, spec, "synth");
    const double code_std = get<double>(cfg, "code_std");
    if (!(code_std >= 0.0)) throw ConfigError("synth: code_std must be >= 0");
    if (cfg.at("gt").is_null()) {
      spec.gt = random_gt_params(model, spec.seed, code_std);
    } else {
      spec.gt = FootParams::identity(model);
      json_util::from_json(cfg.at("gt"), spec.gt, "synth.gt");
    }
    if (spec.gt.z_shape.size() != static_cast<std::size_t>(model.field.shape_dim) ||
        spec.gt.z_pose.size() != static_cast<std::size_t>(model.field.pose_dim)) {
      throw ConfigError("synth: ground-truth code sizes do not match the model");
    }
    spec.validate();
    ctx.progress("[synth] generating " + std::to_string(spec.views) + " views");
    const Scene scene = generate_scene(spec, model);
    prepare_out(cfg, "synth");
    write_scene(out, scene);
    json echo = cfg;
    echo["gt"] = json_util::to_json(spec.gt);
    json_util::save_file(out / "config.json", echo);
    RunResult r;
    r.summary = {{"command", "synth"}, {"out", out.string()}, {"views", spec.views}, {"seed", spec.seed}};
    return r;
  };
  return sc;
}

// ---- fit --------------------------------------------------------------------------------

Subcommand make_fit(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("fit", "Fit the foot model to a scene");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--scene", "/scene", "Scene directory");
  sc.flags->option<std::string>("--model", "/model", "Model file (default: built-in model)");
  sc.flags->option<std::string>("--out", "/out", "Output directory");
  sc.flags->option<int>("--views", "/views", "Number of views to fit");
  sc.flags->option<int>("--stage1-epochs", "/stage1_epochs", "Registration epochs");
  sc.flags->option<int>("--stage2-epochs", "/stage2_epochs", "Deformation epochs");
  sc.flags->option<double>("--lr", "/lr", "Adam learning rate");
  sc.flags->option<double>("--w-kp", "/weights/kp", "Keypoint loss weight");
  sc.flags->option<double>("--w-sil", "/weights/sil", "Silhouette loss weight");
  sc.flags->option<double>("--w-norm", "/weights/norm", "Normal loss weight");
  sc.flags->option<double>("--code-prior", "/code_prior", "Code prior weight");
  sc.flags->flag("--uniform-kappa", "/uniform_kappa", "Ignore per-pixel uncertainty in the normal loss");
  sc.defaults = json_util::to_json(FitConfig{});
  sc.defaults["scene"] = nullptr;
  sc.defaults["model"] = nullptr;
  sc.defaults["out"] = nullptr;
  sc.defaults["views"] = 8;
  sc.run = [](const json& cfg, const Context& ctx) {
    const std::string scene_dir = require_path(cfg, "scene", "fit");
    require_path(cfg, "out", "fit");
    json fit_cfg = cfg;
    for (const char* k : {"scene", "model", "out", "views"}) fit_cfg.erase(k);
    FitConfig config;
    json_util::from_json(fit_cfg, config, "fit");
    config.validate();
    const int views = get<int>(cfg, "views");
    if (views < 1) throw ConfigError("fit: --views must be >= 1");

    const FootModel model = load_or_default_model(cfg);
    const Scene scene = read_scene(scene_dir);
    std::vector<Camera> cameras;
    for (const ViewLabels& v : scene.views) cameras.push_back(v.camera);
    const std::vector<std::size_t> selected = select_views(cameras, static_cast<std::size_t>(views));
    const std::vector<ViewObservation> all = scene_observations(scene);
    std::vector<ViewObservation> obs;
    for (std::size_t i : selected) obs.push_back(all[i]);

    const fs::path out = prepare_out(cfg, "fit");
    json_util::save_file(out / "config.json", cfg);
    const FitResult result = fit(model, obs, config, [&ctx](const FitEpoch& e) {
      if (e.epoch % 50 == 0) {
        std::ostringstream s;
        s << "[fit] stage " << e.stage << " epoch " << e.epoch << " kp " << e.kp << " sil " << e.sil << " norm "
          << e.norm << " total " << e.total;
        ctx.progress(s.str());
      }
    });
    write_obj(out / "fitted.obj", forward_mesh(model, result.params));
    write_params_json(out / "params.json", result.params);
    write_trace_csv(out / "trace.csv", result.trace);

    RunResult r;
    const FitEpoch last = result.trace.epochs.empty() ? FitEpoch{} : result.trace.epochs.back();
    r.summary = {{"command", "fit"},
                 {"out", out.string()},
                 {"views", selected},
                 {"seed", config.seed},
                 {"final", {{"kp", last.kp}, {"sil", last.sil}, {"norm", last.norm}, {"total", last.total}}}};
    return r;
  };
  return sc;
}

// ---- eval-normals -----------------------------------------------------------------------

ImageD stack_rows(const std::vector<ImageD>& parts) {
  ImageD out(parts.front().width, 0, parts.front().channels);
  for (const ImageD& p : parts) {
    if (p.width != out.width || p.channels != out.channels) throw DimensionError("views differ in size");
    out.data.insert(out.data.end(), p.data.begin(), p.data.end());
    out.height += p.height;
  }
  return out;
}

Image8 stack_rows(const std::vector<Image8>& parts) {
  Image8 out(parts.front().width, 0, parts.front().channels);
  for (const Image8& p : parts) {
    if (p.width != out.width || p.channels != out.channels) throw DimensionError("views differ in size");
    out.data.insert(out.data.end(), p.data.begin(), p.data.end());
    out.height += p.height;
  }
  return out;
}

Subcommand make_eval_normals(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("eval-normals", "Angular error of normal predictions against a scene's GT normals");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--scene", "/scene", "Scene directory");
  sc.flags->option<std::string>("--pred", "/pred", "Directory of view_NNN/mu.pfm predictions (default: scene mu)");
  sc.flags->option<double>("--cutoff", "/cutoff", "Leg cutoff height (m)");
  sc.flags->option<std::string>("--out", "/out", "Report directory");
  sc.flags->flag("--csv", "/csv", "Also write report.csv");
  sc.defaults = {{"scene", nullptr}, {"pred", nullptr}, {"cutoff", 0.20}, {"out", "."}, {"csv", false}, {"seed", 0}};
  sc.run = [](const json& cfg, const Context& ctx) {
    const fs::path scene_dir = require_path(cfg, "scene", "eval-normals");
    const auto pred_dir = get_path(cfg, "pred");
    const double cutoff = get<double>(cfg, "cutoff");
    const Scene scene = read_scene(scene_dir);
    if (scene.views.empty()) throw IoError("eval-normals: scene has no views");

    std::vector<std::pair<std::string, NormalEvalReport>> rows;
    std::vector<ImageD> mus, gts, heights;
    std::vector<Image8> masks;
    for (std::size_t i = 0; i < scene.views.size(); ++i) {
      const ViewLabels& v = scene.views[i];
      char name[32];
      std::snprintf(name, sizeof name, "view_%03zu", i);
      if (v.normal_gt.data.empty()) throw IoError(std::string(name) + ": missing normal_gt.pfm");
      if (v.height.data.empty()) throw IoError(std::string(name) + ": missing height.pfm");
      ImageD mu = v.mu;
      if (pred_dir) {
        const fs::path p = fs::path(*pred_dir) / name / "mu.pfm";
        if (!fs::exists(p)) throw IoError(std::string(name) + ": missing prediction " + p.string());
        mu = read_pfm(p);
      }
      rows.emplace_back(name, eval_normals(mu, v.normal_gt, v.mask, v.height, cutoff));
      mus.push_back(std::move(mu));
      gts.push_back(v.normal_gt);
      heights.push_back(v.height);
      masks.push_back(v.mask);
    }
    const NormalEvalReport all =
        eval_normals(stack_rows(mus), stack_rows(gts), stack_rows(masks), stack_rows(heights), cutoff);
    rows.emplace_back("all", all);

    const fs::path out = prepare_out(cfg, "eval-normals");
    json_util::save_file(out / "config.json", cfg);
    json report = {{"cutoff", cutoff}, {"views", json::array()}, {"all", report_json(all)}};
    for (std::size_t i = 0; i + 1 < rows.size(); ++i) {
      json row = report_json(rows[i].second);
      row["name"] = rows[i].first;
      report["views"].push_back(row);
    }
    json_util::save_file(out / "report.json", report);
    const std::string table = normal_report_table(rows);
    write_text(out / "report.txt", table);
    if (get<bool>(cfg, "csv")) write_text(out / "report.csv", normal_report_csv(rows));
    ctx.progress(table);
    RunResult r;
    r.summary = {{"command", "eval-normals"}, {"out", out.string()}, {"all", report_json(all)}};
    return r;
  };
  return sc;
}

// ---- eval3d -----------------------------------------------------------------------------

Subcommand make_eval3d(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("eval3d", "Chamfer statistics between a fitted mesh and a GT mesh");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--fitted", "/fitted", "Fitted mesh (.obj/.ply)");
  sc.flags->option<std::string>("--gt", "/gt", "Ground-truth mesh (.obj/.ply)");
  sc.flags->option<int>("--samples", "/samples", "Surface samples per mesh");
  sc.flags->option<std::string>("--out", "/out", "Report directory");
  sc.flags->flag("--csv", "/csv", "Also write eval3d.csv");
  sc.defaults = {{"fitted", nullptr}, {"gt", nullptr}, {"samples", 10000}, {"out", "."}, {"csv", false}, {"seed", 0}};
  sc.run = [](const json& cfg, const Context& ctx) {
    const Mesh fitted = read_mesh(require_path(cfg, "fitted", "eval3d"));
    const Mesh gt = read_mesh(require_path(cfg, "gt", "eval3d"));
    const int samples = get<int>(cfg, "samples");
    if (samples < 1) throw ConfigError("eval3d: --samples must be >= 1");
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const ChamferStats stats = eval_3d(fitted, gt, static_cast<std::size_t>(samples), seed);

    const fs::path out = prepare_out(cfg, "eval3d");
    json_util::save_file(out / "config.json", cfg);
    json_util::save_file(out / "eval3d.json", report_json(stats));
    const std::vector<std::pair<std::string, ChamferStats>> rows = {{"fitted_vs_gt", stats}};
    const std::string table = chamfer_report_table(rows);
    write_text(out / "eval3d.txt", table);
    if (get<bool>(cfg, "csv")) write_text(out / "eval3d.csv", chamfer_report_csv(rows));
    ctx.progress(table);
    RunResult r;
    r.summary = report_json(stats);
    r.summary["command"] = "eval3d";
    r.summary["seed"] = seed;
    return r;
  };
  return sc;
}

// ---- align ------------------------------------------------------------------------------

std::vector<Vec3> cloud_of(const Mesh& mesh, std::size_t samples, std::uint64_t seed) {
  if (mesh.faces.empty()) return mesh.vertices;
  return sample_surface(mesh, samples, seed).points;
}

Subcommand make_align(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("align", "Four-parameter chamfer alignment of a source cloud to a target cloud");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--source", "/source", "Source mesh or point cloud (.obj/.ply)");
  sc.flags->option<std::string>("--target", "/target", "Target mesh or point cloud (.obj/.ply)");
  sc.flags->option<int>("--samples", "/samples", "Surface samples for inputs with faces");
  sc.flags->option<std::string>("--out", "/out", "Report directory");
  sc.flags->flag("--floor", "/floor", "Detect, remove and level the floor in both clouds first");
  sc.flags->flag("--csv", "/csv", "Also write align.csv");
  const FloorConfig fc;
  const AlignConfig ac;
  sc.defaults = {{"source", nullptr},
                 {"target", nullptr},
                 {"samples", 10000},
                 {"out", "."},
                 {"floor", false},
                 {"csv", false},
                 {"seed", 0},
                 {"floor_config",
                  {{"iterations", fc.iterations},
                   {"threshold", fc.threshold},
                   {"min_inlier_fraction", fc.min_inlier_fraction}}},
                 {"align_config",
                  {{"lr", ac.lr},
                   {"steps", ac.steps},
                   {"reassociate_every", ac.reassociate_every},
                   {"outlier_factor", ac.outlier_factor}}},
                 {"init", align_json(AlignParams{})}};
  sc.run = [](const json& cfg, const Context& ctx) {
    const auto seed = get<std::uint64_t>(cfg, "seed");
    const int samples = get<int>(cfg, "samples");
    if (samples < 1) throw ConfigError("align: --samples must be >= 1");
    std::vector<Vec3> source = cloud_of(read_mesh(require_path(cfg, "source", "align")), samples, seed);
    std::vector<Vec3> target = cloud_of(read_mesh(require_path(cfg, "target", "align")), samples, seed ^ 1U);

    const json& fj = cfg.at("floor_config");
    FloorConfig floor;
    floor.iterations = get<int>(fj, "iterations");
    floor.threshold = get<double>(fj, "threshold");
    floor.min_inlier_fraction = get<double>(fj, "min_inlier_fraction");
    floor.seed = seed;
    const json& aj = cfg.at("align_config");
    AlignConfig align;
    align.lr = get<double>(aj, "lr");
    align.steps = get<int>(aj, "steps");
    align.reassociate_every = get<int>(aj, "reassociate_every");
    align.outlier_factor = get<double>(aj, "outlier_factor");
    const json& ij = cfg.at("init");
    AlignParams init{get<double>(ij, "theta"), get<double>(ij, "tx"), get<double>(ij, "ty"), get<double>(ij, "s")};

    json floors = json::object();
    if (get<bool>(cfg, "floor")) {
      for (auto* cloud : {&source, &target}) {
        const FloorFit ff = fit_floor(*cloud, floor);
        floors[cloud == &source ? "source" : "target"] = {
            {"normal", json_util::vec3(ff.plane.normal)}, {"d", ff.plane.d}, {"inliers", ff.inliers.size()}};
        *cloud = level_to_floor(remove_floor(*cloud, ff), ff.plane);
      }
      ctx.progress("[align] floors removed");
    }
    const AlignResult res = align_4param(source, target, init, align);

    const fs::path out = prepare_out(cfg, "align");
    json_util::save_file(out / "config.json", cfg);
    Mesh aligned;
    for (const Vec3& p : source) aligned.vertices.push_back(apply_align(res.params, res.pivot, p));
    write_obj(out / "aligned_source.obj", aligned);
    json report = {{"params", align_json(res.params)},
                   {"pivot", json_util::vec3(res.pivot)},
                   {"initial_objective", res.initial_objective},
                   {"final_objective", res.final_objective},
                   {"source_kept", res.source_kept},
                   {"target_kept", res.target_kept},
                   {"floors", floors}};
    json_util::save_file(out / "align.json", report);
    std::ostringstream table;
    table << "theta_deg  tx_mm  ty_mm  scale  objective_mm\n";
    char line[160];
    std::snprintf(line, sizeof line, "%9.4f  %5.3f  %5.3f  %5.4f  %12.4f\n", res.params.theta * kDegPerRad,
                  res.params.tx * 1000.0, res.params.ty * 1000.0, res.params.s, res.final_objective * 1000.0);
    table << line;
    write_text(out / "align.txt", table.str());
    if (get<bool>(cfg, "csv")) {
      std::ostringstream c;
      c.precision(17);
      c << "theta,tx,ty,s,final_objective\n"
        << res.params.theta << "," << res.params.tx << "," << res.params.ty << "," << res.params.s << ","
        << res.final_objective << "\n";
      write_text(out / "align.csv", c.str());
    }
    ctx.progress(table.str());
    RunResult r;
    r.summary = report;
    r.summary["command"] = "align";
    r.summary["seed"] = seed;
    return r;
  };
  return sc;
}

// ---- gradcheck --------------------------------------------------------------------------

Subcommand make_gradcheck(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("gradcheck", "Finite-difference gradient suite");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<int>("--configs", "/configs", "Random configurations per check");
  sc.flags->option<std::string>("--model", "/model", "Model file (default: built-in model)");
  sc.flags->option<std::string>("--out", "/out", "Report directory");
  sc.defaults = {{"configs", 20}, {"model", nullptr}, {"out", "."}, {"seed", 0}};
  sc.run = [](const json& cfg, const Context& ctx) {
    const int configs = get<int>(cfg, "configs");
    if (configs < 1) throw ConfigError("gradcheck: --configs must be >= 1");
    const FootModel model = load_or_default_model(cfg);
    const auto results = run_gradient_suite(configs, get<std::uint64_t>(cfg, "seed"), &model);
    const fs::path out = prepare_out(cfg, "gradcheck");
    json_util::save_file(out / "config.json", cfg);
    json checks = json::array();
    bool ok = true;
    std::ostringstream table;
    for (const GradCheckResult& g : results) {
      ok = ok && g.passed();
      checks.push_back({{"name", g.name}, {"max_error", g.max_error}, {"seconds", g.seconds}, {"passed", g.passed()}});
      char line[160];
      std::snprintf(line, sizeof line, "%-20s %.3e %s\n", g.name.c_str(), g.max_error, g.passed() ? "ok" : "FAIL");
      table << line;
    }
    json_util::save_file(out / "gradcheck.json", {{"tolerance", kGradTolerance}, {"checks", checks}});
    ctx.progress(table.str());
    RunResult r;
    r.summary = {{"command", "gradcheck"}, {"passed", ok}, {"checks", results.size()}};
    r.code = ok ? kExitOk : kExitNumerical;
    return r;
  };
  return sc;
}

// ---- init-model -------------------------------------------------------------------------

Subcommand make_init_model(CLI::App& root) {
  Subcommand sc;
  sc.app = root.add_subcommand("init-model", "Write the procedural template with a seeded deformation field");
  sc.flags = std::make_unique<FlagSet>(sc.app);
  sc.flags->option<std::string>("--out", "/out", "Output directory (model.fmdl)");
  sc.flags->option<int>("--shape-dim", "/shape_dim", "Shape code size");
  sc.flags->option<int>("--pose-dim", "/pose_dim", "Pose code size");
  const ModelOptions mo;
  sc.defaults = {{"out", nullptr},           {"seed", mo.seed},       {"shape_dim", mo.shape_dim},
                 {"pose_dim", mo.pose_dim},  {"hidden", mo.hidden},   {"hidden_layers", mo.hidden_layers},
                 {"displacement_rms", mo.displacement_rms},            {"blendshapes", mo.blendshapes}};
  sc.run = [](const json& cfg, const Context& ctx) {
    ModelOptions mo;
    mo.seed = get<std::uint64_t>(cfg, "seed");
    mo.shape_dim = get<int>(cfg, "shape_dim");
    mo.pose_dim = get<int>(cfg, "pose_dim");
    mo.hidden = get<int>(cfg, "hidden");
    mo.hidden_layers = get<int>(cfg, "hidden_layers");
    mo.displacement_rms = get<double>(cfg, "displacement_rms");
    mo.blendshapes = get<int>(cfg, "blendshapes");
    if (!(mo.displacement_rms >= 0.0) || mo.blendshapes < 0) {
      throw ConfigError("init-model: displacement_rms and blendshapes must be >= 0");
    }
    const fs::path out = prepare_out(cfg, "init-model");
    ctx.progress("[init-model] building template");
    const FootModel model = make_default_model(mo);
    save_model(out / "model.fmdl", model);
    json_util::save_file(out / "config.json", cfg);
    RunResult r;
    r.summary = {{"command", "init-model"},
                 {"model", (out / "model.fmdl").string()},
                 {"vertices", model.template_mesh.vertices.size()},
                 {"seed", mo.seed}};
    return r;
  };
  return sc;
}

json error_line(int code, const std::string& message) {
  return {{"status", "error"}, {"exit_code", code}, {"message", message}};
}

}  // namespace

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App root("Multi-view foot reconstruction from normals, uncertainty and keypoints", "footfit");
  root.require_subcommand(1);
  std::vector<Subcommand> subs;
  subs.push_back(make_synth(root));
  subs.push_back(make_fit(root));
  subs.push_back(make_eval_normals(root));
  subs.push_back(make_eval3d(root));
  subs.push_back(make_align(root));
  subs.push_back(make_gradcheck(root));
  subs.push_back(make_init_model(root));
  std::vector<std::shared_ptr<bool>> quiet;
  for (Subcommand& sc : subs) {
    sc.app->add_option("--config", sc.config_path, "JSON config file; flags override its values");
    sc.flags->option<std::uint64_t>("--seed", "/seed", "Random seed");
    auto q = std::make_shared<bool>(false);
    sc.app->add_flag("--quiet", *q, "Suppress progress output");
    quiet.push_back(q);
  }

  try {
    root.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    if (e.get_exit_code() == 0) {
      out << root.help();
      return kExitOk;
    }
    err << "error: " << e.what() << "\n";
    out << error_line(kExitConfig, e.what()).dump() << "\n";
    return kExitConfig;
  }

  int code = kExitOk;
  std::string message;
  try {
    for (std::size_t i = 0; i < subs.size(); ++i) {
      Subcommand& sc = subs[i];
      if (!sc.app->parsed()) continue;
      json cfg = sc.defaults;
      if (!sc.config_path.empty()) merge(cfg, json_util::load_file(sc.config_path, true), sc.config_path);
      sc.flags->apply(cfg);
      const Context ctx{err, *quiet[i]};
      RunResult r = sc.run(cfg, ctx);
      r.summary["status"] = r.code == kExitOk ? "ok" : "failed";
      out << r.summary.dump() << "\n";
      return r.code;
    }
    return kExitConfig;
  } catch (const ConfigError& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const IoError& e) {
    code = kExitIo;
    message = e.what();
  } catch (const NumericalError& e) {
    code = kExitNumerical;
    message = e.what();
  } catch (const fs::filesystem_error& e) {
    code = kExitIo;
    message = e.what();
  } catch (const std::invalid_argument& e) {
    code = kExitConfig;
    message = e.what();
  } catch (const std::exception& e) {
    code = 1;
    message = e.what();
  }
  err << "error: " << message << "\n";
  out << error_line(code, message).dump() << "\n";
  return code;
}

}  // namespace footfit
