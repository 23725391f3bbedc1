#include "footfit/renderer.hpp"

#include "footfit/parallel.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <stdexcept>

namespace footfit {

namespace {

constexpr double kNearPlane = 1e-6;

double cross2(const Vec2& a, const Vec2& b) { return a.x() * b.y() - a.y() * b.x(); }

Vec2 to_pixel(const Camera& c, const Vec3& p) { return Vec2(c.fx * p.x() / p.z() + c.cx, c.fy * p.y() / p.z() + c.cy); }

struct ScreenFace {
  bool active = false;
  std::array<Vec2, 3> p;
  std::array<double, 3> inv_z{};
  double inv_area2 = 0.0;
  int x0 = 0, x1 = -1, y0 = 0, y1 = -1;
};

bool front_facing(const Vec3& a, const Vec3& b, const Vec3& c) { return (b - a).cross(c - a).dot(a) < 0.0; }

std::vector<Vec3> rows_to_points(const ad::Tensor& t) {
  std::vector<Vec3> pts(t.shape.at(0));
  for (std::size_t i = 0; i < pts.size(); ++i) pts[i] = Vec3(t[3 * i], t[3 * i + 1], t[3 * i + 2]);
  return pts;
}

void require_points(const ad::Var& v, const char* what) {
  if (v.shape().size() != 2 || v.shape()[1] != 3) {
    throw std::invalid_argument(std::string(what) + ": expected an (N x 3) tensor, got " +
                                ad::shape_string(v.shape()));
  }
}

}  // namespace

EdgeTopology build_edge_topology(std::span<const Face> faces) {
  std::map<std::pair<int, int>, std::size_t> lookup;
  EdgeTopology topo;
  for (std::size_t f = 0; f < faces.size(); ++f) {
    for (int k = 0; k < 3; ++k) {
      const int a = faces[f][k], b = faces[f][(k + 1) % 3];
      const auto key = std::make_pair(std::min(a, b), std::max(a, b));
      auto it = lookup.find(key);
      if (it == lookup.end()) {
        lookup.emplace(key, topo.edges.size());
        topo.edges.push_back({key.first, key.second});
        topo.faces.push_back({static_cast<int>(f), -1});
      } else if (topo.faces[it->second][1] < 0) {
        topo.faces[it->second][1] = static_cast<int>(f);
      }
    }
  }
  return topo;
}

std::size_t Fragments::covered_count() const {
  return static_cast<std::size_t>(std::count_if(face.begin(), face.end(), [](int f) { return f >= 0; }));
}

std::vector<std::size_t> Fragments::covered_pixels() const {
  std::vector<std::size_t> out;
  for (std::size_t p = 0; p < face.size(); ++p) {
    if (face[p] >= 0) out.push_back(p);
  }
  return out;
}

Fragments rasterize(std::span<const Vec3> cv, std::span<const Face> faces, const Camera& camera) {
  const int W = camera.width, H = camera.height;
  Fragments frags;
  frags.width = W;
  frags.height = H;
  const std::size_t n = static_cast<std::size_t>(W) * H;
  frags.face.assign(n, -1);
  frags.bary.assign(n, {0.0, 0.0, 0.0});
  frags.depth.assign(n, std::numeric_limits<double>::infinity());

  std::vector<ScreenFace> screen(faces.size());
  parallel_for(faces.size(), [&](std::size_t b, std::size_t e) {
    for (std::size_t f = b; f < e; ++f) {
      const Vec3& a = cv[faces[f][0]];
      const Vec3& bb = cv[faces[f][1]];
      const Vec3& c = cv[faces[f][2]];
      if (a.z() <= kNearPlane || bb.z() <= kNearPlane || c.z() <= kNearPlane) continue;
      if (!front_facing(a, bb, c)) continue;
      ScreenFace& s = screen[f];
      s.p = {to_pixel(camera, a), to_pixel(camera, bb), to_pixel(camera, c)};
      const double area2 = cross2(s.p[1] - s.p[0], s.p[2] - s.p[0]);
      if (area2 == 0.0 || !std::isfinite(area2)) continue;
      s.inv_area2 = 1.0 / area2;
      s.inv_z = {1.0 / a.z(), 1.0 / bb.z(), 1.0 / c.z()};
      const double minx = std::min({s.p[0].x(), s.p[1].x(), s.p[2].x()});
      const double maxx = std::max({s.p[0].x(), s.p[1].x(), s.p[2].x()});
      const double miny = std::min({s.p[0].y(), s.p[1].y(), s.p[2].y()});
      const double maxy = std::max({s.p[0].y(), s.p[1].y(), s.p[2].y()});
      s.x0 = std::max(0, static_cast<int>(std::ceil(minx - 0.5)));
      s.x1 = std::min(W - 1, static_cast<int>(std::floor(maxx - 0.5)));
      s.y0 = std::max(0, static_cast<int>(std::ceil(miny - 0.5)));
      s.y1 = std::min(H - 1, static_cast<int>(std::floor(maxy - 0.5)));
      s.active = s.x0 <= s.x1 && s.y0 <= s.y1;
    }
  });

  parallel_for(
      static_cast<std::size_t>(H),
      [&](std::size_t row_begin, std::size_t row_end) {
        const int yb = static_cast<int>(row_begin), ye = static_cast<int>(row_end);
        for (std::size_t f = 0; f < screen.size(); ++f) {
          const ScreenFace& s = screen[f];
          if (!s.active || s.y1 < yb || s.y0 >= ye) continue;
          for (int y = std::max(s.y0, yb); y <= std::min(s.y1, ye - 1); ++y) {
            for (int x = s.x0; x <= s.x1; ++x) {
              const Vec2 q(x + 0.5, y + 0.5);
              const double w0 = cross2(s.p[2] - s.p[1], q - s.p[1]) * s.inv_area2;
              const double w1 = cross2(s.p[0] - s.p[2], q - s.p[2]) * s.inv_area2;
              const double w2 = cross2(s.p[1] - s.p[0], q - s.p[0]) * s.inv_area2;
              if (w0 < 0.0 || w1 < 0.0 || w2 < 0.0) continue;
              const double b0 = w0 * s.inv_z[0], b1 = w1 * s.inv_z[1], b2 = w2 * s.inv_z[2];
              const double denom = b0 + b1 + b2;
              const double depth = 1.0 / denom;
              const std::size_t p = static_cast<std::size_t>(y) * W + x;
              if (depth < frags.depth[p]) {
                frags.depth[p] = depth;
                frags.face[p] = static_cast<int>(f);
                frags.bary[p] = {b0 / denom, b1 / denom, b2 / denom};
              }
            }
          }
        }
      },
      8);
  for (std::size_t p = 0; p < n; ++p) {
    if (frags.face[p] < 0) frags.depth[p] = 0.0;
  }
  return frags;
}

std::vector<Vec3> camera_vertices(const Mesh& mesh, const Camera& camera) {
  std::vector<Vec3> cv(mesh.vertices.size());
  for (std::size_t i = 0; i < cv.size(); ++i) cv[i] = camera.to_camera(mesh.vertices[i]);
  return cv;
}

Fragments rasterize(const Mesh& mesh, const Camera& camera) {
  return rasterize(camera_vertices(mesh, camera), mesh.faces, camera);
}

// ---- non-differentiable renders ---------------------------------------------------

namespace {

ad::Tensor points_tensor(std::span<const Vec3> pts) {
  ad::Tensor t({pts.size(), 3});
  for (std::size_t i = 0; i < pts.size(); ++i) {
    for (int k = 0; k < 3; ++k) t[3 * i + k] = pts[i][k];
  }
  return t;
}

}  // namespace

ImageD render_normal_map(const Mesh& mesh, const Camera& camera, const Fragments& fragments) {
  ImageD out(camera.width, camera.height, 3, 0.0);
  const auto pixels = fragments.covered_pixels();
  if (pixels.empty()) return out;
  ad::Tape tape;
  const ad::Var cam = tape.constant(points_tensor(camera_vertices(mesh, camera)));
  const ad::Var normals = interpolate_normals(vertex_normals(cam, mesh.faces), mesh.faces, fragments, pixels);
  const ad::Tensor& n = normals.value();
  for (std::size_t i = 0; i < pixels.size(); ++i) {
    for (int k = 0; k < 3; ++k) out.data[pixels[i] * 3 + k] = n[3 * i + k];
  }
  return out;
}

ImageD render_normal_map(const Mesh& mesh, const Camera& camera) {
  return render_normal_map(mesh, camera, rasterize(mesh, camera));
}

Image8 render_mask(const Fragments& fragments) {
  Image8 mask(fragments.width, fragments.height, 1, 0);
  for (std::size_t p = 0; p < fragments.face.size(); ++p) {
    if (fragments.face[p] >= 0) mask.data[p] = 255;
  }
  return mask;
}

ImageD render_height_map(const Mesh& mesh, const Camera& camera, const Fragments& fragments) {
  ImageD out(camera.width, camera.height, 1, 0.0);
  for (std::size_t p = 0; p < fragments.face.size(); ++p) {
    const int f = fragments.face[p];
    if (f < 0) continue;
    const auto& b = fragments.bary[p];
    const Face& tri = mesh.faces[f];
    out.data[p] = b[0] * mesh.vertices[tri[0]].z() + b[1] * mesh.vertices[tri[1]].z() +
                  b[2] * mesh.vertices[tri[2]].z();
  }
  return out;
}

std::vector<ProjectedKeypoint> project_keypoints(const Mesh& mesh, std::span<const int> vertex_ids,
                                                 const Camera& camera) {
  ad::Tape tape;
  const ad::Var world = tape.constant(points_tensor(mesh.vertices));
  const RenderedView view = render_view(world, mesh.faces, EdgeTopology{}, vertex_ids, camera,
                                        RenderOptions{40.0, false, false});
  std::vector<ProjectedKeypoint> out(vertex_ids.size());
  const ad::Tensor& k = view.keypoints.value();
  for (std::size_t i = 0; i < out.size(); ++i) {
    out[i].position = Vec2(k[2 * i], k[2 * i + 1]);
    out[i].visible = view.keypoint_visible[i];
  }
  return out;
}

double cutoff_fraction(const Mesh& mesh, double cutoff_height, const Camera& camera) {
  const Fragments frags = rasterize(mesh, camera);
  const ImageD height = render_height_map(mesh, camera, frags);
  std::size_t covered = 0, above = 0;
  for (std::size_t p = 0; p < frags.face.size(); ++p) {
    if (frags.face[p] < 0) continue;
    ++covered;
    if (height.data[p] > cutoff_height) ++above;
  }
  return covered == 0 ? 0.0 : static_cast<double>(above) / static_cast<double>(covered);
}

// ---- differentiable building blocks ---------------------------------------------------

ad::Var to_camera_frame(const ad::Var& world_vertices, const Camera& camera) {
  require_points(world_vertices, "to_camera_frame");
  ad::Tape& tape = *world_vertices.tape();
  ad::Tensor rt({3, 3});
  for (int r = 0; r < 3; ++r) {
    for (int c = 0; c < 3; ++c) rt[3 * r + c] = camera.R(c, r);
  }
  const ad::Var rot = tape.constant(std::move(rt));
  const ad::Var trans = tape.constant(ad::Tensor::vector({camera.t.x(), camera.t.y(), camera.t.z()}));
  return ad::matmul(world_vertices, rot) + trans;
}

ad::Var vertex_normals(const ad::Var& vertices, std::span<const Face> faces) {
  require_points(vertices, "vertex_normals");
  ad::Tape& tape = *vertices.tape();
  const ad::Tensor& x = vertices.value();
  const std::size_t nv = x.shape[0];
  auto pt = [&x](int i) { return Vec3(x[3 * i], x[3 * i + 1], x[3 * i + 2]); };

  std::vector<Vec3> acc(nv, Vec3::Zero());
  for (const Face& f : faces) {
    const Vec3 n = (pt(f[1]) - pt(f[0])).cross(pt(f[2]) - pt(f[0]));
    for (int v : f) acc[v] += n;
  }
  std::vector<double> len(nv);
  ad::Tensor out({nv, 3});
  for (std::size_t v = 0; v < nv; ++v) {
    len[v] = acc[v].norm();
    if (len[v] > 0.0) {
      for (int k = 0; k < 3; ++k) out[3 * v + k] = acc[v][k] / len[v];
    }
  }
  std::vector<Face> face_copy(faces.begin(), faces.end());
  const std::size_t in_id = vertices.id();
  return tape.record(
      {vertices}, std::move(out),
      [in_id, face_copy = std::move(face_copy), len = std::move(len)](
          const ad::Tape& t, const ad::Tensor& y, std::span<const double> g, std::span<const ad::GradSpan> gin) {
        const ad::Tensor& x = t.value(in_id);
        auto pt = [&x](int i) { return Vec3(x[3 * i], x[3 * i + 1], x[3 * i + 2]); };
        const std::size_t nv = len.size();
        std::vector<Vec3> g_acc(nv, Vec3::Zero());
        for (std::size_t v = 0; v < nv; ++v) {
          if (len[v] == 0.0) continue;
          const Vec3 gy(g[3 * v], g[3 * v + 1], g[3 * v + 2]);
          const Vec3 n(y[3 * v], y[3 * v + 1], y[3 * v + 2]);
          g_acc[v] = (gy - n * n.dot(gy)) / len[v];
        }
        for (const Face& f : face_copy) {
          const Vec3 gn = g_acc[f[0]] + g_acc[f[1]] + g_acc[f[2]];
          const Vec3 e1 = pt(f[1]) - pt(f[0]);
          const Vec3 e2 = pt(f[2]) - pt(f[0]);
          const Vec3 g_e1 = e2.cross(gn);
          const Vec3 g_e2 = gn.cross(e1);
          for (int k = 0; k < 3; ++k) {
            gin[0][3 * f[1] + k] += g_e1[k];
            gin[0][3 * f[2] + k] += g_e2[k];
            gin[0][3 * f[0] + k] -= g_e1[k] + g_e2[k];
          }
        }
      });
}

ad::Var interpolate_normals(const ad::Var& vertex_normals, std::span<const Face> faces, const Fragments& fragments,
                            std::span<const std::size_t> pixels) {
  require_points(vertex_normals, "interpolate_normals");
  ad::Tape& tape = *vertex_normals.tape();
  const ad::Tensor& vn = vertex_normals.value();
  const std::size_t np = pixels.size();

  struct Sample {
    std::array<int, 3> v;
    std::array<double, 3> b;
    double len;
  };
  std::vector<Sample> samples(np);
  ad::Tensor out({np, 3});
  for (std::size_t i = 0; i < np; ++i) {
    const std::size_t p = pixels[i];
    const int f = fragments.face.at(p);
    if (f < 0) throw std::invalid_argument("interpolate_normals: pixel is not covered");
    Sample& s = samples[i];
    s.v = faces[f];
    s.b = fragments.bary[p];
    Vec3 m = Vec3::Zero();
    for (int k = 0; k < 3; ++k) m += s.b[k] * Vec3(vn[3 * s.v[k]], vn[3 * s.v[k] + 1], vn[3 * s.v[k] + 2]);
    s.len = m.norm();
    if (s.len > 0.0) {
      for (int c = 0; c < 3; ++c) out[3 * i + c] = m[c] / s.len;
    }
  }
  return tape.record({vertex_normals}, std::move(out),
                     [samples = std::move(samples)](const ad::Tape&, const ad::Tensor& y, std::span<const double> g,
                                                    std::span<const ad::GradSpan> gin) {
                       for (std::size_t i = 0; i < samples.size(); ++i) {
                         const Sample& s = samples[i];
                         if (s.len == 0.0) continue;
                         const Vec3 gy(g[3 * i], g[3 * i + 1], g[3 * i + 2]);
                         const Vec3 n(y[3 * i], y[3 * i + 1], y[3 * i + 2]);
                         const Vec3 gm = (gy - n * n.dot(gy)) / s.len;
                         for (int k = 0; k < 3; ++k) {
                           for (int c = 0; c < 3; ++c) gin[0][3 * s.v[k] + c] += s.b[k] * gm[c];
                         }
                       }
                     });
}

ad::Var project_normalized(const ad::Var& camera_points, const Camera& camera) {
  require_points(camera_points, "project_normalized");
  ad::Tape& tape = *camera_points.tape();
  const ad::Tensor& x = camera_points.value();
  const std::size_t n = x.shape[0];
  const double W = camera.width, H = camera.height;
  ad::Tensor out({n, 2});
  for (std::size_t i = 0; i < n; ++i) {
    const double z = x[3 * i + 2];
    if (z == 0.0) continue;
    out[2 * i] = (camera.fx * x[3 * i] / z + camera.cx) / W;
    out[2 * i + 1] = (camera.fy * x[3 * i + 1] / z + camera.cy) / H;
  }
  const std::size_t in_id = camera_points.id();
  const double ax = camera.fx / W, ay = camera.fy / H;
  return tape.record({camera_points}, std::move(out),
                     [in_id, n, ax, ay](const ad::Tape& t, const ad::Tensor&, std::span<const double> g,
                                        std::span<const ad::GradSpan> gin) {
                       const ad::Tensor& x = t.value(in_id);
                       for (std::size_t i = 0; i < n; ++i) {
                         const double X = x[3 * i], Y = x[3 * i + 1], Z = x[3 * i + 2];
                         if (Z == 0.0) continue;
                         const double gu = g[2 * i], gv = g[2 * i + 1];
                         gin[0][3 * i] += gu * ax / Z;
                         gin[0][3 * i + 1] += gv * ay / Z;
                         gin[0][3 * i + 2] += -(gu * ax * X + gv * ay * Y) / (Z * Z);
                       }
                     });
}

ad::Var soft_silhouette(const ad::Var& camera_vertices, std::span<const Face> faces, const EdgeTopology& topology,
                        const Camera& camera, const Fragments& fragments, double sharpness) {
  require_points(camera_vertices, "soft_silhouette");
  if (!(sharpness > 0.0)) throw std::invalid_argument("soft_silhouette: sharpness must be positive");
  ad::Tape& tape = *camera_vertices.tape();
  const ad::Tensor& x = camera_vertices.value();
  const int W = fragments.width, H = fragments.height;
  const std::size_t npix = static_cast<std::size_t>(W) * H;
  auto pt = [&x](int i) { return Vec3(x[3 * i], x[3 * i + 1], x[3 * i + 2]); };

  std::vector<char> front(faces.size(), 0);
  for (std::size_t f = 0; f < faces.size(); ++f) {
    front[f] = front_facing(pt(faces[f][0]), pt(faces[f][1]), pt(faces[f][2]));
  }

  // Hard-mask boundary pixels: covered state differs from some 8-neighbour.
  std::vector<char> boundary(npix, 0);
  for (int y = 0; y < H; ++y) {
    for (int xpix = 0; xpix < W; ++xpix) {
      const bool c = fragments.face[static_cast<std::size_t>(y) * W + xpix] >= 0;
      bool diff = false;
      for (int dy = -1; dy <= 1 && !diff; ++dy) {
        for (int dx = -1; dx <= 1 && !diff; ++dx) {
          const int nx = xpix + dx, ny = y + dy;
          if (nx < 0 || ny < 0 || nx >= W || ny >= H) continue;
          diff = (fragments.face[static_cast<std::size_t>(ny) * W + nx] >= 0) != c;
        }
      }
      boundary[static_cast<std::size_t>(y) * W + xpix] = diff;
    }
  }

  const double band = 30.0 / sharpness;
  std::vector<double> best(npix, std::numeric_limits<double>::infinity());
  std::vector<int> best_edge(npix, -1);
  struct Contour {
    int a, b;
    Vec2 pa, pb;
  };
  std::vector<Contour> contours;
  for (std::size_t e = 0; e < topology.edges.size(); ++e) {
    const auto& adj = topology.faces[e];
    const bool is_contour =
        adj[1] < 0 ? static_cast<bool>(front[adj[0]]) : front[adj[0]] != front[adj[1]];
    if (!is_contour) continue;
    const int a = topology.edges[e][0], b = topology.edges[e][1];
    if (x[3 * a + 2] <= kNearPlane || x[3 * b + 2] <= kNearPlane) continue;
    contours.push_back({a, b, to_pixel(camera, pt(a)), to_pixel(camera, pt(b))});
  }
  for (std::size_t ci = 0; ci < contours.size(); ++ci) {
    const Contour& c = contours[ci];
    const int x0 = std::max(0, static_cast<int>(std::floor(std::min(c.pa.x(), c.pb.x()) - band - 0.5)));
    const int x1 = std::min(W - 1, static_cast<int>(std::ceil(std::max(c.pa.x(), c.pb.x()) + band - 0.5)));
    const int y0 = std::max(0, static_cast<int>(std::floor(std::min(c.pa.y(), c.pb.y()) - band - 0.5)));
    const int y1 = std::min(H - 1, static_cast<int>(std::ceil(std::max(c.pa.y(), c.pb.y()) + band - 0.5)));
    const Vec2 ab = c.pb - c.pa;
    const double ab2 = ab.squaredNorm();
    for (int y = y0; y <= y1; ++y) {
      for (int xpix = x0; xpix <= x1; ++xpix) {
        const std::size_t p = static_cast<std::size_t>(y) * W + xpix;
        if (!boundary[p]) continue;
        const Vec2 q(xpix + 0.5, y + 0.5);
        const double tpar = ab2 > 0.0 ? std::clamp((q - c.pa).dot(ab) / ab2, 0.0, 1.0) : 0.0;
        const double d = (q - (c.pa + tpar * ab)).norm();
        if (d < best[p]) {
          best[p] = d;
          best_edge[p] = static_cast<int>(ci);
        }
      }
    }
  }

  struct SoftPixel {
    std::size_t pixel;
    int contour;
    double sign;
  };
  std::vector<SoftPixel> soft;
  ad::Tensor out({static_cast<std::size_t>(H), static_cast<std::size_t>(W)});
  for (std::size_t p = 0; p < npix; ++p) {
    const bool covered = fragments.face[p] >= 0;
    if (best_edge[p] >= 0 && best[p] < band) {
      const double sign = covered ? 1.0 : -1.0;
      const double z = sharpness * sign * best[p];
      out[p] = z >= 0.0 ? 1.0 / (1.0 + std::exp(-z)) : std::exp(z) / (1.0 + std::exp(z));
      soft.push_back({p, best_edge[p], sign});
    } else {
      out[p] = covered ? 1.0 : 0.0;
    }
  }

  const std::size_t in_id = camera_vertices.id();
  const double fx = camera.fx, fy = camera.fy;
  return tape.record(
      {camera_vertices}, std::move(out),
      [in_id, W, sharpness, fx, fy, soft = std::move(soft), contours = std::move(contours)](
          const ad::Tape& t, const ad::Tensor& y, std::span<const double> g, std::span<const ad::GradSpan> gin) {
        const ad::Tensor& x = t.value(in_id);
        auto chain = [&](int v, const Vec2& g_px) {
          const double X = x[3 * v], Y = x[3 * v + 1], Z = x[3 * v + 2];
          gin[0][3 * v] += g_px.x() * fx / Z;
          gin[0][3 * v + 1] += g_px.y() * fy / Z;
          gin[0][3 * v + 2] += -(g_px.x() * fx * X + g_px.y() * fy * Y) / (Z * Z);
        };
        for (const SoftPixel& s : soft) {
          const double gy = g[s.pixel];
          if (gy == 0.0) continue;
          const Contour& c = contours[s.contour];
          const Vec2 q(static_cast<double>(s.pixel % W) + 0.5, static_cast<double>(s.pixel / W) + 0.5);
          const Vec2 ab = c.pb - c.pa;
          const double ab2 = ab.squaredNorm();
          const double tpar = ab2 > 0.0 ? std::clamp((q - c.pa).dot(ab) / ab2, 0.0, 1.0) : 0.0;
          const Vec2 diff = q - (c.pa + tpar * ab);
          const double d = diff.norm();
          if (d == 0.0) continue;
          const double val = y[s.pixel];
          const double g_d = gy * sharpness * s.sign * val * (1.0 - val);
          // d(dist)/d(endpoint): the projection parameter term vanishes by orthogonality.
          const Vec2 dir = -diff / d;
          chain(c.a, g_d * (1.0 - tpar) * dir);
          chain(c.b, g_d * tpar * dir);
        }
      });
}

RenderedView render_view(const ad::Var& world_vertices, std::span<const Face> faces, const EdgeTopology& topology,
                         std::span<const int> keypoint_ids, const Camera& camera, const RenderOptions& options) {
  require_points(world_vertices, "render_view");
  RenderedView view;
  const ad::Var cam = to_camera_frame(world_vertices, camera);
  if (options.normals || options.silhouette) {
    view.fragments = rasterize(rows_to_points(cam.value()), faces, camera);
  }
  if (options.normals) {
    view.pixels = view.fragments.covered_pixels();
    view.normals = interpolate_normals(vertex_normals(cam, faces), faces, view.fragments, view.pixels);
  }
  if (options.silhouette) {
    view.silhouette = soft_silhouette(cam, faces, topology, camera, view.fragments, options.sharpness);
  }
  if (!keypoint_ids.empty()) {
    const std::size_t nv = world_vertices.shape()[0];
    std::vector<std::size_t> ids;
    for (int id : keypoint_ids) {
      if (id < 0 || static_cast<std::size_t>(id) >= nv) throw std::invalid_argument("keypoint id out of range");
      ids.push_back(static_cast<std::size_t>(id));
    }
    const ad::Var kp_cam = ad::gather_rows(cam, ids);
    view.keypoints = project_normalized(kp_cam, camera);
    const ad::Tensor& kc = kp_cam.value();
    const ad::Tensor& kn = view.keypoints.value();
    view.keypoint_visible.resize(ids.size());
    for (std::size_t i = 0; i < ids.size(); ++i) {
      const double px = kn[2 * i] * camera.width, py = kn[2 * i + 1] * camera.height;
      view.keypoint_visible[i] = kc[3 * i + 2] > 0.0 && px >= 0.0 && px < camera.width && py >= 0.0 &&
                                 py < camera.height;
    }
  }
  return view;
}

}  // namespace footfit
