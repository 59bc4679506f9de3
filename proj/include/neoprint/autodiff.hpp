#pragma once

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <stdexcept>
#include <string>
#include <vector>

namespace neoprint::ad {

struct AutodiffError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

// One dense tensor in the computation graph. Ops below return fresh nodes
// holding their parents and a closure that scatters the node's grad into
// the parents' grads. 64-bit floats throughout.
class Node {
 public:
  std::vector<int> shape;
  std::vector<double> data;
  std::vector<double> grad;
  bool requires_grad = false;
  std::string name;  // set for parameters

  std::vector<std::shared_ptr<Node>> parents;
  std::function<void()> backprop;  // accumulates into parents' grad
  bool backward_done = false;      // set on the loss node after backward()

  size_t size() const {
    size_t n = 1;
    for (int d : shape) n *= size_t(d);
    return n;
  }
  void ensure_grad() {
    if (grad.size() != data.size()) grad.assign(data.size(), 0.0);
  }
  void zero_grad() { grad.assign(data.size(), 0.0); }
};

using Value = std::shared_ptr<Node>;

Value make_tensor(const std::vector<int>& shape, std::vector<double> data,
                  bool requires_grad = false);
Value make_tensor(const std::vector<int>& shape, double fill = 0.0,
                  bool requires_grad = false);

// ---- operator set ----
// input: C_in x H x W; kernels: C_out x C_in x k x k; bias: C_out.
// output spatial size floor((H + 2 pad - k)/stride) + 1.
Value conv2d(const Value& input, const Value& kernels, const Value& bias, int stride = 1,
             int pad = 0);
Value relu(const Value& x);
Value sigmoid(const Value& x);
// W: (out x in), x: (in), b: (out) -> (out)
Value linear(const Value& W, const Value& x, const Value& b);
// 2x2 stride-2 max pooling on C x H x W
Value max_pool(const Value& x);
// C x H x W -> C
Value global_avg_pool(const Value& x);
// concatenate C_i x H x W tensors along channels, or plain vectors end-to-end
Value concat(const std::vector<Value>& xs);
Value flatten(const Value& x);
Value add(const Value& a, const Value& b);
Value scalar_mul(const Value& x, double s);
Value elementwise_mul(const Value& a, const Value& b);
// sqrt(sum((a-b)^2)) -> scalar; gradient defined as 0 at distance 0
Value euclidean_distance(const Value& a, const Value& b);
Value sum(const Value& x);
// scale channel c of maps (C x H x W) by weights[c] (C)
Value channel_scale(const Value& maps, const Value& weights);

// Populates grad on every requires_grad node reachable from loss.
// loss must be scalar; calling twice on the same loss node is an error.
void backward(const Value& loss);

// Backpropagate an externally supplied output gradient from a non-scalar
// node (used to stitch per-sample encoder graphs to a detached loss graph).
void backward_seeded(const Value& node, const std::vector<double>& seed);

// ---- parameters and optimizer ----
struct ParamSet {
  std::map<std::string, Value> params;  // name-sorted, names unique

  Value add(const std::string& name, const std::vector<int>& shape,
            std::vector<double> data);
  Value at(const std::string& name) const;
  void zero_grad();
  // raw little-endian byte image of all parameter values, name order
  std::vector<uint8_t> byte_image() const;
  uint64_t checksum() const;
};

struct SgdState {
  std::map<std::string, std::vector<double>> velocity;
};

// g <- grad + weight_decay * p;  v <- momentum * v + g;  p <- p - lr * v
void sgd_step(ParamSet& params, SgdState& state, double lr, double momentum,
              double weight_decay);

// Central-difference check of df/dparam for every coordinate; returns the
// max relative error with denominator max(1, |analytic|, |numeric|).
double grad_check(const std::function<Value(const ParamSet&)>& f, ParamSet& params,
                  double eps);

// "PSET" checkpoint: magic, u32 count, per tensor name/rank/dims/f64 data.
void save_pset(const ParamSet& params, const std::string& path);
ParamSet load_pset(const std::string& path);

}  // namespace neoprint::ad
