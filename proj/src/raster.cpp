#include "neoprint/raster.hpp"

#include <cmath>
#include <cstring>
#include <fstream>

#include "neoprint/rng.hpp"

namespace neoprint {

namespace {

void write_u32(std::ostream& os, uint32_t v) {
  unsigned char b[4] = {static_cast<unsigned char>(v), static_cast<unsigned char>(v >> 8),
                        static_cast<unsigned char>(v >> 16),
                        static_cast<unsigned char>(v >> 24)};
  os.write(reinterpret_cast<const char*>(b), 4);
}

uint32_t read_u32(std::istream& is) {
  unsigned char b[4];
  is.read(reinterpret_cast<char*>(b), 4);
  return uint32_t(b[0]) | (uint32_t(b[1]) << 8) | (uint32_t(b[2]) << 16) |
         (uint32_t(b[3]) << 24);
}

// one separable gaussian pass along rows (axis=0) or columns (axis=1)
void gauss_1d(std::vector<double>& field, int H, int W,
              const std::vector<double>& kernel, int radius, int axis) {
  std::vector<double> out(field.size(), 0.0);
  for (int i = 0; i < H; ++i) {
    for (int j = 0; j < W; ++j) {
      double acc = 0.0;
      for (int t = -radius; t <= radius; ++t) {
        int ii = i + (axis == 0 ? t : 0);
        int jj = j + (axis == 1 ? t : 0);
        if (ii < 0 || ii >= H || jj < 0 || jj >= W) continue;
        acc += kernel[t + radius] * field[ii * W + jj];
      }
      out[i * W + j] = acc;
    }
  }
  field.swap(out);
}

}  // namespace

double FeatureImage::coverage() const {
  if (mask.empty()) return 0.0;
  size_t n = 0;
  for (uint8_t m : mask) n += m != 0;
  return double(n) / mask.size();
}

const std::array<std::string, 4>& PartitionSet::labels() {
  static const std::array<std::string, 4> names = {"left-lateral", "left-medial",
                                                   "right-lateral", "right-medial"};
  return names;
}

FeatureImage rasterize(const PlanarMap& map, const TriMesh& mesh, int H, int W) {
  if (mesh.n_faces() == 0) throw RasterError("rasterize: mesh has zero faces");
  if (static_cast<int>(map.uv.size()) != mesh.n_vertices())
    throw RasterError("rasterize: map size does not match mesh");
  for (const auto& name : feature_channels())
    if (!mesh.has_feature(name))
      throw RasterError("rasterize: missing feature channel '" + name + "'");

  FeatureImage img;
  img.C = static_cast<int>(feature_channels().size());
  img.H = H;
  img.W = W;
  img.data.assign(size_t(img.C) * H * W, 0.0);
  img.mask.assign(size_t(H) * W, 0);

  // faces visited in index order and pixels claimed once: shared-edge ties
  // resolve to the lowest face index
  for (int f = 0; f < mesh.n_faces(); ++f) {
    const auto& t = mesh.faces[f];
    Eigen::Vector2d a = map.uv[t[0]], b = map.uv[t[1]], c = map.uv[t[2]];
    double det = (b.x() - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (b.y() - a.y());
    if (std::abs(det) < 1e-18) continue;
    double lo_u = std::min({a.x(), b.x(), c.x()}), hi_u = std::max({a.x(), b.x(), c.x()});
    double lo_v = std::min({a.y(), b.y(), c.y()}), hi_v = std::max({a.y(), b.y(), c.y()});
    int j0 = std::max(0, int(std::floor(lo_u * W - 0.5)));
    int j1 = std::min(W - 1, int(std::ceil(hi_u * W - 0.5)));
    int i0 = std::max(0, int(std::floor(lo_v * H - 0.5)));
    int i1 = std::min(H - 1, int(std::ceil(hi_v * H - 0.5)));
    for (int i = i0; i <= i1; ++i) {
      for (int j = j0; j <= j1; ++j) {
        if (img.mask[i * W + j]) continue;
        double u = (j + 0.5) / W, v = (i + 0.5) / H;
        double w1 = ((u - a.x()) * (c.y() - a.y()) - (c.x() - a.x()) * (v - a.y())) / det;
        double w2 = ((b.x() - a.x()) * (v - a.y()) - (u - a.x()) * (b.y() - a.y())) / det;
        double w0 = 1.0 - w1 - w2;
        if (w0 < -1e-12 || w1 < -1e-12 || w2 < -1e-12) continue;
        img.mask[i * W + j] = 1;
        for (int ch = 0; ch < img.C; ++ch) {
          const auto& field = mesh.feature(feature_channels()[ch]);
          img.at(ch, i, j) = w0 * field[t[0]] + w1 * field[t[1]] + w2 * field[t[2]];
        }
      }
    }
  }
  return img;
}

PartitionSet build_partitions(const TriMesh& left_sphere, const TriMesh& right_sphere,
                              int H, int W) {
  const std::array<const TriMesh*, 2> spheres = {&left_sphere, &right_sphere};
  const std::array<std::string, 2> side_names = {"left", "right"};
  for (int s = 0; s < 2; ++s)
    for (const auto& name : feature_channels())
      if (!spheres[s]->has_feature(name))
        throw RasterError("build_partitions: " + side_names[s] +
                          " sphere missing feature channel '" + name + "'");

  auto flatten_half = [&](const TriMesh& half, bool right_side) {
    auto loop = extract_boundary(half);
    std::vector<Eigen::Vector3d> lp;
    for (int v : loop) lp.push_back(half.vertices[v]);
    auto res = teichmuller_map(half, rectangle_boundary_conditions(loop, lp));
    if (right_side) {
      // a mirror-symmetric right sphere flattens to the transpose of the
      // left image; rotating uv a quarter turn turns that into the
      // conventional horizontal mirror
      for (auto& p : res.map.uv) p = Eigen::Vector2d(1.0 - p.y(), p.x());
    }
    return rasterize(res.map, half, H, W);
  };

  auto [lpos, lneg] = split_sphere(left_sphere);
  auto [rpos, rneg] = split_sphere(right_sphere);
  PartitionSet set;
  set.images[0] = flatten_half(lpos, false);  // left-lateral
  set.images[1] = flatten_half(lneg, false);  // left-medial
  set.images[2] = flatten_half(rneg, true);   // right-lateral
  set.images[3] = flatten_half(rpos, true);   // right-medial
  return set;
}

FeatureImage rotate_image(const FeatureImage& img, double degrees) {
  if (degrees == 0.0) return img;
  FeatureImage out;
  out.C = img.C;
  out.H = img.H;
  out.W = img.W;
  out.data.assign(img.data.size(), 0.0);
  out.mask.assign(img.mask.size(), 0);
  double rad = degrees * M_PI / 180.0;
  double ca = std::cos(rad), sa = std::sin(rad);
  double cx = img.W / 2.0, cy = img.H / 2.0;
  for (int i = 0; i < img.H; ++i) {
    for (int j = 0; j < img.W; ++j) {
      // inverse-rotate the target pixel center into source coordinates
      double x = j + 0.5 - cx, y = i + 0.5 - cy;
      double sx = ca * x + sa * y + cx - 0.5;
      double sy = -sa * x + ca * y + cy - 0.5;
      int j0 = int(std::floor(sx)), i0 = int(std::floor(sy));
      double fx = sx - j0, fy = sy - i0;
      double wgt[4] = {(1 - fx) * (1 - fy), fx * (1 - fy), (1 - fx) * fy, fx * fy};
      int jj[4] = {j0, j0 + 1, j0, j0 + 1};
      int ii[4] = {i0, i0, i0 + 1, i0 + 1};
      double mcov = 0.0;
      for (int k = 0; k < 4; ++k) {
        if (ii[k] < 0 || ii[k] >= img.H || jj[k] < 0 || jj[k] >= img.W) continue;
        if (img.covered(ii[k], jj[k])) mcov += wgt[k];
      }
      if (mcov < 0.5) continue;
      out.mask[i * out.W + j] = 1;
      for (int c = 0; c < img.C; ++c) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) {
          if (ii[k] < 0 || ii[k] >= img.H || jj[k] < 0 || jj[k] >= img.W) continue;
          acc += wgt[k] * img.at(c, ii[k], jj[k]);
        }
        out.at(c, i, j) = acc;
      }
    }
  }
  return out;
}

FeatureImage add_noise(const FeatureImage& img, double sigma, uint64_t seed) {
  if (sigma < 0) throw RasterError("add_noise: sigma must be >= 0");
  if (sigma == 0.0) return img;
  FeatureImage out = img;
  Rng rng(subseed(seed, "noise"));
  size_t npix = size_t(img.H) * img.W;
  for (int c = 0; c < img.C; ++c) {
    // per-channel std over covered pixels
    double sum = 0.0, sum2 = 0.0;
    size_t n = 0;
    for (size_t p = 0; p < npix; ++p) {
      if (!img.mask[p]) continue;
      double v = img.data[c * npix + p];
      sum += v;
      sum2 += v * v;
      ++n;
    }
    if (n == 0) continue;
    double mean = sum / n;
    double stdev = std::sqrt(std::max(0.0, sum2 / n - mean * mean));
    double amp = sigma * stdev;
    for (size_t p = 0; p < npix; ++p)
      if (img.mask[p]) out.data[c * npix + p] += amp * rng.gaussian();
  }
  return out;
}

FeatureImage gaussian_blur(const FeatureImage& img, double sigma) {
  if (sigma < 0) throw RasterError("gaussian_blur: sigma must be >= 0");
  if (sigma == 0.0) return img;
  int radius = int(std::ceil(3.0 * sigma));
  std::vector<double> kernel(2 * radius + 1);
  for (int t = -radius; t <= radius; ++t)
    kernel[t + radius] = std::exp(-0.5 * t * t / (sigma * sigma));

  size_t npix = size_t(img.H) * img.W;
  std::vector<double> mwt(npix);
  for (size_t p = 0; p < npix; ++p) mwt[p] = img.mask[p] ? 1.0 : 0.0;
  gauss_1d(mwt, img.H, img.W, kernel, radius, 0);
  gauss_1d(mwt, img.H, img.W, kernel, radius, 1);

  FeatureImage out = img;
  for (int c = 0; c < img.C; ++c) {
    std::vector<double> num(img.data.begin() + c * npix, img.data.begin() + (c + 1) * npix);
    for (size_t p = 0; p < npix; ++p)
      if (!img.mask[p]) num[p] = 0.0;
    gauss_1d(num, img.H, img.W, kernel, radius, 0);
    gauss_1d(num, img.H, img.W, kernel, radius, 1);
    // normalize by the blurred mask: kernel support restricted to covered pixels
    for (size_t p = 0; p < npix; ++p)
      out.data[c * npix + p] = img.mask[p] && mwt[p] > 0 ? num[p] / mwt[p] : 0.0;
  }
  return out;
}

std::pair<PartitionSet, PartitionSet> augment_pair(const PartitionSet& partitions,
                                                   const AugmentPolicy& policy,
                                                   uint64_t seed) {
  auto augment_view = [&](uint64_t view_seed) {
    Rng rng(view_seed);
    PartitionSet out = partitions;
    double rot = 0, nsig = 0, bsig = 0;
    uint64_t nseed = 0;
    auto draw = [&]() {
      rot = rng.uniform(policy.rotate_min, policy.rotate_max);
      nsig = rng.uniform(policy.noise_min, policy.noise_max);
      bsig = rng.uniform(policy.blur_min, policy.blur_max);
      nseed = rng.next_u64();
    };
    if (policy.shared_across_partitions) draw();
    for (int p = 0; p < 4; ++p) {
      if (!policy.shared_across_partitions) draw();
      FeatureImage im = rotate_image(out.images[p], rot);
      im = add_noise(im, nsig, nseed + p);
      out.images[p] = gaussian_blur(im, bsig);
    }
    return out;
  };
  return {augment_view(subseed(seed, "view0")), augment_view(subseed(seed, "view1"))};
}

ChannelStats compute_channel_stats(const std::vector<PartitionSet>& dataset) {
  if (dataset.empty()) throw RasterError("channel stats: empty dataset");
  int C = dataset[0].images[0].C;
  ChannelStats stats;
  stats.mean.assign(C, 0.0);
  stats.stdev.assign(C, 0.0);
  std::vector<double> sum(C, 0.0), sum2(C, 0.0);
  std::vector<size_t> count(C, 0);
  for (const auto& set : dataset) {
    for (const auto& img : set.images) {
      size_t npix = size_t(img.H) * img.W;
      for (int c = 0; c < C; ++c) {
        for (size_t p = 0; p < npix; ++p) {
          if (!img.mask[p]) continue;
          double v = img.data[c * npix + p];
          sum[c] += v;
          sum2[c] += v * v;
          ++count[c];
        }
      }
    }
  }
  for (int c = 0; c < C; ++c) {
    if (count[c] == 0) throw RasterError("channel stats: channel " + std::to_string(c) +
                                         " has no covered pixels");
    stats.mean[c] = sum[c] / count[c];
    double var = sum2[c] / count[c] - stats.mean[c] * stats.mean[c];
    stats.stdev[c] = std::sqrt(std::max(0.0, var));
    if (stats.stdev[c] < 1e-12)
      throw RasterError("channel stats: zero variance in channel " + std::to_string(c));
  }
  return stats;
}

void apply_channel_stats(PartitionSet& partitions, const ChannelStats& stats) {
  for (auto& img : partitions.images) {
    size_t npix = size_t(img.H) * img.W;
    for (int c = 0; c < img.C; ++c)
      for (size_t p = 0; p < npix; ++p)
        if (img.mask[p])
          img.data[c * npix + p] = (img.data[c * npix + p] - stats.mean[c]) / stats.stdev[c];
  }
}

void save_feature_image(const FeatureImage& img, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw RasterError("cannot open for writing: " + path);
  os.write("FIMG", 4);
  write_u32(os, 1);
  write_u32(os, img.C);
  write_u32(os, img.H);
  write_u32(os, img.W);
  for (double v : img.data) {
    float f = static_cast<float>(v);
    static_assert(sizeof(float) == 4);
    char b[4];
    std::memcpy(b, &f, 4);
    os.write(b, 4);
  }
  os.write(reinterpret_cast<const char*>(img.mask.data()),
           static_cast<std::streamsize>(img.mask.size()));
  if (!os) throw RasterError("write failed: " + path);
}

FeatureImage load_feature_image(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw RasterError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::strncmp(magic, "FIMG", 4) != 0)
    throw RasterError("not a FIMG file: " + path);
  uint32_t version = read_u32(is);
  if (version != 1) throw RasterError("unsupported FIMG version in " + path);
  FeatureImage img;
  img.C = static_cast<int>(read_u32(is));
  img.H = static_cast<int>(read_u32(is));
  img.W = static_cast<int>(read_u32(is));
  size_t n = size_t(img.C) * img.H * img.W;
  img.data.resize(n);
  for (size_t k = 0; k < n; ++k) {
    char b[4];
    is.read(b, 4);
    float f;
    std::memcpy(&f, b, 4);
    img.data[k] = f;
  }
  img.mask.resize(size_t(img.H) * img.W);
  is.read(reinterpret_cast<char*>(img.mask.data()),
          static_cast<std::streamsize>(img.mask.size()));
  if (!is) throw RasterError("truncated FIMG file: " + path);
  return img;
}

}  // namespace neoprint
