#include "neoprint/autodiff.hpp"

#include <Eigen/Dense>
#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_set>

#include "neoprint/rng.hpp"

namespace neoprint::ad {

namespace {

using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;

std::string shape_str(const std::vector<int>& s) {
  std::string out = "(";
  for (size_t i = 0; i < s.size(); ++i) out += (i ? "," : "") + std::to_string(s[i]);
  return out + ")";
}

void require(bool ok, const std::string& op, const std::string& what) {
  if (!ok) throw AutodiffError(op + ": " + what);
}

// gather conv patches: rows C_in*k*k, cols Ho*Wo, zero padding
Eigen::MatrixXd im2col(const std::vector<double>& in, int C, int H, int W, int k,
                       int stride, int pad, int Ho, int Wo) {
  Eigen::MatrixXd cols = Eigen::MatrixXd::Zero(C * k * k, Ho * Wo);
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      int col = oy * Wo + ox;
      for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= W) continue;
            cols((c * k + ky) * k + kx, col) = in[(c * H + iy) * W + ix];
          }
        }
      }
    }
  }
  return cols;
}

void col2im_add(const Eigen::MatrixXd& cols, std::vector<double>& dinput, int C, int H,
                int W, int k, int stride, int pad, int Ho, int Wo) {
  for (int oy = 0; oy < Ho; ++oy) {
    for (int ox = 0; ox < Wo; ++ox) {
      int col = oy * Wo + ox;
      for (int c = 0; c < C; ++c) {
        for (int ky = 0; ky < k; ++ky) {
          int iy = oy * stride + ky - pad;
          if (iy < 0 || iy >= H) continue;
          for (int kx = 0; kx < k; ++kx) {
            int ix = ox * stride + kx - pad;
            if (ix < 0 || ix >= W) continue;
            dinput[(c * H + iy) * W + ix] += cols((c * k + ky) * k + kx, col);
          }
        }
      }
    }
  }
}

}  // namespace

Value make_tensor(const std::vector<int>& shape, std::vector<double> data,
                  bool requires_grad) {
  auto node = std::make_shared<Node>();
  node->shape = shape;
  size_t n = 1;
  for (int d : shape) {
    require(d > 0, "make_tensor", "non-positive dimension in " + shape_str(shape));
    n *= size_t(d);
  }
  require(data.size() == n, "make_tensor",
          "data length " + std::to_string(data.size()) + " does not match shape " +
              shape_str(shape));
  node->data = std::move(data);
  node->requires_grad = requires_grad;
  return node;
}

Value make_tensor(const std::vector<int>& shape, double fill, bool requires_grad) {
  size_t n = 1;
  for (int d : shape) n *= size_t(d);
  return make_tensor(shape, std::vector<double>(n, fill), requires_grad);
}

Value conv2d(const Value& input, const Value& kernels, const Value& bias, int stride,
             int pad) {
  require(input->shape.size() == 3, "conv2d", "input must be CxHxW, got " +
                                                  shape_str(input->shape));
  require(kernels->shape.size() == 4, "conv2d",
          "kernels must be C_out x C_in x k x k, got " + shape_str(kernels->shape));
  require(kernels->shape[2] == kernels->shape[3], "conv2d", "kernel must be square");
  int Cin = input->shape[0], H = input->shape[1], W = input->shape[2];
  int Cout = kernels->shape[0], k = kernels->shape[2];
  require(kernels->shape[1] == Cin, "conv2d",
          "kernel C_in " + std::to_string(kernels->shape[1]) + " vs input C " +
              std::to_string(Cin));
  require(bias->shape == std::vector<int>{Cout}, "conv2d",
          "bias shape " + shape_str(bias->shape) + " vs C_out " + std::to_string(Cout));
  require(stride >= 1 && pad >= 0, "conv2d", "invalid stride/pad");
  int Ho = (H + 2 * pad - k) / stride + 1;
  int Wo = (W + 2 * pad - k) / stride + 1;
  require(Ho >= 1 && Wo >= 1, "conv2d", "kernel larger than padded input");

  Eigen::MatrixXd cols = im2col(input->data, Cin, H, W, k, stride, pad, Ho, Wo);
  Eigen::Map<const RowMat> K(kernels->data.data(), Cout, Cin * k * k);
  Eigen::MatrixXd R = K * cols;  // Cout x Ho*Wo

  auto out = make_tensor({Cout, Ho, Wo});
  for (int c = 0; c < Cout; ++c)
    for (int p = 0; p < Ho * Wo; ++p) out->data[c * Ho * Wo + p] = R(c, p) + bias->data[c];

  out->parents = {input, kernels, bias};
  Node* o = out.get();
  Value in = input, ker = kernels, bi = bias;
  out->backprop = [o, in, ker, bi, Cin, H, W, Cout, k, stride, pad, Ho, Wo]() {
    Eigen::Map<const RowMat> dOut(o->grad.data(), Cout, Ho * Wo);
    if (bi->requires_grad || !bi->parents.empty()) {
      bi->ensure_grad();
      // plain loop: a vectorized reduction over the (arbitrarily aligned)
      // grad buffer would make the summation order allocation-dependent
      for (int c = 0; c < Cout; ++c) {
        const double* g = o->grad.data() + size_t(c) * Ho * Wo;
        double acc = 0;
        for (int p = 0; p < Ho * Wo; ++p) acc += g[p];
        bi->grad[c] += acc;
      }
    }
    // the patch matrix is recomputed here instead of stored: keeps graph
    // memory proportional to activations, not activations x kernel area
    Eigen::MatrixXd cols2 = im2col(in->data, Cin, H, W, k, stride, pad, Ho, Wo);
    if (ker->requires_grad || !ker->parents.empty()) {
      ker->ensure_grad();
      Eigen::Map<RowMat> dK(ker->grad.data(), Cout, Cin * k * k);
      dK.noalias() += dOut * cols2.transpose();
    }
    if (in->requires_grad || !in->parents.empty()) {
      in->ensure_grad();
      Eigen::Map<const RowMat> K2(ker->data.data(), Cout, Cin * k * k);
      Eigen::MatrixXd dCols = K2.transpose() * dOut;
      col2im_add(dCols, in->grad, Cin, H, W, k, stride, pad, Ho, Wo);
    }
  };
  return out;
}

Value relu(const Value& x) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = std::max(0.0, x->data[i]);
  out->parents = {x};
  Node* o = out.get();
  Value xin = x;
  out->backprop = [o, xin]() {
    xin->ensure_grad();
    for (size_t i = 0; i < xin->data.size(); ++i)
      if (xin->data[i] > 0.0) xin->grad[i] += o->grad[i];
  };
  return out;
}

Value sigmoid(const Value& x) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = 1.0 / (1.0 + std::exp(-x->data[i]));
  out->parents = {x};
  Node* o = out.get();
  Value xin = x;
  out->backprop = [o, xin]() {
    xin->ensure_grad();
    for (size_t i = 0; i < xin->data.size(); ++i) {
      double s = o->data[i];
      xin->grad[i] += s * (1.0 - s) * o->grad[i];
    }
  };
  return out;
}

Value linear(const Value& W, const Value& x, const Value& b) {
  require(W->shape.size() == 2, "linear", "W must be a matrix, got " + shape_str(W->shape));
  require(x->shape.size() == 1, "linear", "x must be a vector, got " + shape_str(x->shape));
  int out_dim = W->shape[0], in_dim = W->shape[1];
  require(x->shape[0] == in_dim, "linear",
          "W in-dim " + std::to_string(in_dim) + " vs x dim " + std::to_string(x->shape[0]));
  require(b->shape == std::vector<int>{out_dim}, "linear",
          "bias shape " + shape_str(b->shape) + " vs out-dim " + std::to_string(out_dim));
  auto out = make_tensor({out_dim});
  Eigen::Map<const RowMat> Wm(W->data.data(), out_dim, in_dim);
  Eigen::Map<const Eigen::VectorXd> xv(x->data.data(), in_dim);
  Eigen::Map<Eigen::VectorXd> ov(out->data.data(), out_dim);
  ov.noalias() = Wm * xv;
  for (int i = 0; i < out_dim; ++i) out->data[i] += b->data[i];

  out->parents = {W, x, b};
  Node* o = out.get();
  Value Wv = W, xn = x, bn = b;
  out->backprop = [o, Wv, xn, bn, out_dim, in_dim]() {
    Eigen::Map<const Eigen::VectorXd> g(o->grad.data(), out_dim);
    Wv->ensure_grad();
    xn->ensure_grad();
    bn->ensure_grad();
    Eigen::Map<RowMat> dW(Wv->grad.data(), out_dim, in_dim);
    Eigen::Map<const Eigen::VectorXd> xv(xn->data.data(), in_dim);
    dW.noalias() += g * xv.transpose();
    Eigen::Map<const RowMat> Wm(Wv->data.data(), out_dim, in_dim);
    Eigen::Map<Eigen::VectorXd> dx(xn->grad.data(), in_dim);
    dx.noalias() += Wm.transpose() * g;
    for (int i = 0; i < out_dim; ++i) bn->grad[i] += o->grad[i];
  };
  return out;
}

Value max_pool(const Value& x) {
  require(x->shape.size() == 3, "max_pool", "input must be CxHxW, got " +
                                                shape_str(x->shape));
  int C = x->shape[0], H = x->shape[1], W = x->shape[2];
  require(H >= 2 && W >= 2, "max_pool", "spatial dims too small");
  int Ho = H / 2, Wo = W / 2;
  auto out = make_tensor({C, Ho, Wo});
  auto argmax = std::make_shared<std::vector<int>>(size_t(C) * Ho * Wo);
  for (int c = 0; c < C; ++c) {
    for (int oy = 0; oy < Ho; ++oy) {
      for (int ox = 0; ox < Wo; ++ox) {
        int best = (c * H + 2 * oy) * W + 2 * ox;
        for (int dy = 0; dy < 2; ++dy)
          for (int dx = 0; dx < 2; ++dx) {
            int idx = (c * H + 2 * oy + dy) * W + 2 * ox + dx;
            if (x->data[idx] > x->data[best]) best = idx;
          }
        out->data[(c * Ho + oy) * Wo + ox] = x->data[best];
        (*argmax)[(c * Ho + oy) * Wo + ox] = best;
      }
    }
  }
  out->parents = {x};
  Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn, argmax]() {
    xn->ensure_grad();
    for (size_t i = 0; i < o->data.size(); ++i) xn->grad[(*argmax)[i]] += o->grad[i];
  };
  return out;
}

Value global_avg_pool(const Value& x) {
  require(x->shape.size() == 3, "global_avg_pool",
          "input must be CxHxW, got " + shape_str(x->shape));
  int C = x->shape[0];
  int HW = x->shape[1] * x->shape[2];
  auto out = make_tensor({C});
  for (int c = 0; c < C; ++c) {
    double s = 0;
    for (int p = 0; p < HW; ++p) s += x->data[c * HW + p];
    out->data[c] = s / HW;
  }
  out->parents = {x};
  Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn, C, HW]() {
    xn->ensure_grad();
    for (int c = 0; c < C; ++c) {
      double g = o->grad[c] / HW;
      for (int p = 0; p < HW; ++p) xn->grad[c * HW + p] += g;
    }
  };
  return out;
}

Value concat(const std::vector<Value>& xs) {
  require(!xs.empty(), "concat", "empty input list");
  bool rank3 = xs[0]->shape.size() == 3;
  std::vector<int> shape;
  size_t total = 0;
  int C = 0;
  for (const auto& x : xs) {
    require(x->shape.size() == xs[0]->shape.size(), "concat", "mixed ranks");
    if (rank3) {
      require(x->shape[1] == xs[0]->shape[1] && x->shape[2] == xs[0]->shape[2], "concat",
              "spatial dims differ: " + shape_str(x->shape) + " vs " +
                  shape_str(xs[0]->shape));
      C += x->shape[0];
    } else {
      require(x->shape.size() == 1, "concat", "inputs must be CxHxW or vectors");
    }
    total += x->size();
  }
  shape = rank3 ? std::vector<int>{C, xs[0]->shape[1], xs[0]->shape[2]}
                : std::vector<int>{int(total)};
  auto out = make_tensor(shape);
  size_t off = 0;
  for (const auto& x : xs) {
    std::copy(x->data.begin(), x->data.end(), out->data.begin() + off);
    off += x->size();
  }
  out->parents = xs;
  Node* o = out.get();
  auto inputs = xs;
  out->backprop = [o, inputs]() {
    size_t off2 = 0;
    for (const auto& x : inputs) {
      x->ensure_grad();
      for (size_t i = 0; i < x->size(); ++i) x->grad[i] += o->grad[off2 + i];
      off2 += x->size();
    }
  };
  return out;
}

Value flatten(const Value& x) {
  auto out = make_tensor({int(x->size())}, x->data);
  out->parents = {x};
  Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn]() {
    xn->ensure_grad();
    for (size_t i = 0; i < xn->size(); ++i) xn->grad[i] += o->grad[i];
  };
  return out;
}

Value add(const Value& a, const Value& b) {
  require(a->shape == b->shape, "add",
          "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] + b->data[i];
  out->parents = {a, b};
  Node* o = out.get();
  Value an = a, bn = b;
  out->backprop = [o, an, bn]() {
    an->ensure_grad();
    bn->ensure_grad();
    for (size_t i = 0; i < o->data.size(); ++i) {
      an->grad[i] += o->grad[i];
      bn->grad[i] += o->grad[i];
    }
  };
  return out;
}

Value scalar_mul(const Value& x, double s) {
  auto out = make_tensor(x->shape);
  for (size_t i = 0; i < x->data.size(); ++i) out->data[i] = s * x->data[i];
  out->parents = {x};
  Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn, s]() {
    xn->ensure_grad();
    for (size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += s * o->grad[i];
  };
  return out;
}

Value elementwise_mul(const Value& a, const Value& b) {
  require(a->shape == b->shape, "elementwise_mul",
          "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  auto out = make_tensor(a->shape);
  for (size_t i = 0; i < a->data.size(); ++i) out->data[i] = a->data[i] * b->data[i];
  out->parents = {a, b};
  Node* o = out.get();
  Value an = a, bn = b;
  out->backprop = [o, an, bn]() {
    an->ensure_grad();
    bn->ensure_grad();
    for (size_t i = 0; i < o->data.size(); ++i) {
      an->grad[i] += bn->data[i] * o->grad[i];
      bn->grad[i] += an->data[i] * o->grad[i];
    }
  };
  return out;
}

Value euclidean_distance(const Value& a, const Value& b) {
  require(a->shape == b->shape, "euclidean_distance",
          "shape mismatch " + shape_str(a->shape) + " vs " + shape_str(b->shape));
  double s = 0;
  for (size_t i = 0; i < a->data.size(); ++i) {
    double d = a->data[i] - b->data[i];
    s += d * d;
  }
  auto out = make_tensor({1}, std::vector<double>{std::sqrt(s)});
  out->parents = {a, b};
  Node* o = out.get();
  Value an = a, bn = b;
  out->backprop = [o, an, bn]() {
    double d = o->data[0];
    if (d <= 0.0) return;  // subgradient 0 at coincident points
    an->ensure_grad();
    bn->ensure_grad();
    double g = o->grad[0] / d;
    for (size_t i = 0; i < an->data.size(); ++i) {
      double diff = an->data[i] - bn->data[i];
      an->grad[i] += g * diff;
      bn->grad[i] -= g * diff;
    }
  };
  return out;
}

Value sum(const Value& x) {
  double s = 0;
  for (double v : x->data) s += v;
  auto out = make_tensor({1}, std::vector<double>{s});
  out->parents = {x};
  Node* o = out.get();
  Value xn = x;
  out->backprop = [o, xn]() {
    xn->ensure_grad();
    for (size_t i = 0; i < xn->data.size(); ++i) xn->grad[i] += o->grad[0];
  };
  return out;
}

Value channel_scale(const Value& maps, const Value& weights) {
  require(maps->shape.size() == 3, "channel_scale",
          "maps must be CxHxW, got " + shape_str(maps->shape));
  require(weights->shape == std::vector<int>{maps->shape[0]}, "channel_scale",
          "weights shape " + shape_str(weights->shape) + " vs C " +
              std::to_string(maps->shape[0]));
  int C = maps->shape[0];
  int HW = maps->shape[1] * maps->shape[2];
  auto out = make_tensor(maps->shape);
  for (int c = 0; c < C; ++c)
    for (int p = 0; p < HW; ++p)
      out->data[c * HW + p] = maps->data[c * HW + p] * weights->data[c];
  out->parents = {maps, weights};
  Node* o = out.get();
  Value mn = maps, wn = weights;
  out->backprop = [o, mn, wn, C, HW]() {
    mn->ensure_grad();
    wn->ensure_grad();
    for (int c = 0; c < C; ++c) {
      double w = wn->data[c];
      double acc = 0;
      for (int p = 0; p < HW; ++p) {
        mn->grad[c * HW + p] += w * o->grad[c * HW + p];
        acc += mn->data[c * HW + p] * o->grad[c * HW + p];
      }
      wn->grad[c] += acc;
    }
  };
  return out;
}

namespace {

void backward_impl(const Value& root, const std::vector<double>& seed) {
  require(!root->backward_done, "backward", "already called on this node");
  require(seed.size() == root->data.size(), "backward", "seed size mismatch");
  // iterative post-order DFS: parents first, then the node
  std::vector<Node*> topo;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, size_t>> stack = {{root.get(), 0}};
  visited.insert(root.get());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->parents.size()) {
      Node* p = node->parents[next++].get();
      if (visited.insert(p).second) stack.push_back({p, 0});
    } else {
      topo.push_back(node);
      stack.pop_back();
    }
  }
  root->ensure_grad();
  for (size_t i = 0; i < seed.size(); ++i) root->grad[i] += seed[i];
  for (auto it = topo.rbegin(); it != topo.rend(); ++it)
    if ((*it)->backprop) (*it)->backprop();
  root->backward_done = true;
}

}  // namespace

void backward(const Value& loss) {
  require(loss->data.size() == 1, "backward",
          "loss must be scalar, got shape " + shape_str(loss->shape));
  backward_impl(loss, {1.0});
}

void backward_seeded(const Value& node, const std::vector<double>& seed) {
  backward_impl(node, seed);
}

Value ParamSet::add(const std::string& name, const std::vector<int>& shape,
                    std::vector<double> data) {
  if (params.count(name)) throw AutodiffError("ParamSet: duplicate name " + name);
  auto t = make_tensor(shape, std::move(data), true);
  t->name = name;
  params[name] = t;
  return t;
}

Value ParamSet::at(const std::string& name) const {
  auto it = params.find(name);
  if (it == params.end()) throw AutodiffError("ParamSet: unknown name " + name);
  return it->second;
}

void ParamSet::zero_grad() {
  for (auto& [name, p] : params) p->zero_grad();
}

std::vector<uint8_t> ParamSet::byte_image() const {
  std::vector<uint8_t> bytes;
  for (const auto& [name, p] : params) {
    size_t off = bytes.size();
    bytes.resize(off + p->data.size() * sizeof(double));
    std::memcpy(bytes.data() + off, p->data.data(), p->data.size() * sizeof(double));
  }
  return bytes;
}

uint64_t ParamSet::checksum() const {
  auto bytes = byte_image();
  return fnv1a(std::string_view(reinterpret_cast<const char*>(bytes.data()), bytes.size()));
}

void sgd_step(ParamSet& params, SgdState& state, double lr, double momentum,
              double weight_decay) {
  for (auto& [name, p] : params.params) {
    auto& v = state.velocity[name];
    if (v.size() != p->data.size()) v.assign(p->data.size(), 0.0);
    const bool has_grad = p->grad.size() == p->data.size();
    for (size_t i = 0; i < p->data.size(); ++i) {
      double g = (has_grad ? p->grad[i] : 0.0) + weight_decay * p->data[i];
      v[i] = momentum * v[i] + g;
      p->data[i] -= lr * v[i];
    }
  }
}

double grad_check(const std::function<Value(const ParamSet&)>& f, ParamSet& params,
                  double eps) {
  if (eps < 1e-7 || eps > 1e-3) throw AutodiffError("grad_check: eps out of [1e-7, 1e-3]");
  params.zero_grad();
  Value loss = f(params);
  backward(loss);
  double max_rel = 0.0;
  for (auto& [name, p] : params.params) {
    p->ensure_grad();
    for (size_t i = 0; i < p->data.size(); ++i) {
      double saved = p->data[i];
      p->data[i] = saved + eps;
      double lp = f(params)->data[0];
      p->data[i] = saved - eps;
      double lm = f(params)->data[0];
      p->data[i] = saved;
      double numeric = (lp - lm) / (2.0 * eps);
      double analytic = p->grad[i];
      double denom = std::max({1.0, std::abs(analytic), std::abs(numeric)});
      max_rel = std::max(max_rel, std::abs(analytic - numeric) / denom);
    }
  }
  return max_rel;
}

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

}  // namespace

void save_pset(const ParamSet& params, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw AutodiffError("cannot open for writing: " + path);
  os.write("PSET", 4);
  write_u32(os, static_cast<uint32_t>(params.params.size()));
  for (const auto& [name, p] : params.params) {
    write_u32(os, static_cast<uint32_t>(name.size()));
    os.write(name.data(), static_cast<std::streamsize>(name.size()));
    write_u32(os, static_cast<uint32_t>(p->shape.size()));
    for (int d : p->shape) write_u32(os, static_cast<uint32_t>(d));
    for (double v : p->data) {
      char b[8];
      std::memcpy(b, &v, 8);
      os.write(b, 8);
    }
  }
  if (!os) throw AutodiffError("write failed: " + path);
}

ParamSet load_pset(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw AutodiffError("cannot open: " + path);
  char magic[4];
  is.read(magic, 4);
  if (!is || std::strncmp(magic, "PSET", 4) != 0)
    throw AutodiffError("not a PSET file: " + path);
  ParamSet out;
  uint32_t count = read_u32(is);
  for (uint32_t t = 0; t < count; ++t) {
    uint32_t name_len = read_u32(is);
    std::string name(name_len, '\0');
    is.read(name.data(), name_len);
    uint32_t rank = read_u32(is);
    std::vector<int> shape(rank);
    size_t n = 1;
    for (uint32_t r = 0; r < rank; ++r) {
      shape[r] = static_cast<int>(read_u32(is));
      n *= size_t(shape[r]);
    }
    std::vector<double> data(n);
    for (size_t i = 0; i < n; ++i) {
      char b[8];
      is.read(b, 8);
      std::memcpy(&data[i], b, 8);
    }
    if (!is) throw AutodiffError("truncated PSET file: " + path);
    out.add(name, shape, std::move(data));
  }
  return out;
}

}  // namespace neoprint::ad
