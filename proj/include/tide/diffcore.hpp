#pragma once

#include <cmath>
#include <cstdint>
#include <deque>
#include <functional>
#include <string>
#include <unordered_map>
#include <vector>

#include "tide/common.hpp"
#include "tide/tensor.hpp"

namespace tide {

/// A named trainable tensor. Value and gradient always share a shape; the
/// gradient buffer is zeroed at the start of every optimization step.
struct Param {
  std::string name;
  Tensor value;
  Tensor grad;
};

/// Registry of all trainable tensors of a model. Each tensor draws its
/// initial values from an RNG stream keyed by (seed, name), so registration
/// order never changes initialization.
class ParamStore {
 public:
  explicit ParamStore(std::uint64_t seed) : seed_(seed) {}

  Param& add_normal(const std::string& name, int rows, int cols,
                    double stddev) {
    Param& p = emplace(name, rows, cols);
    Rng rng(seed_ ^ fnv1a64(name));
    for (double& v : p.value.data) v = stddev * rng.normal();
    return p;
  }

  Param& add_constant(const std::string& name, int rows, int cols, double v) {
    Param& p = emplace(name, rows, cols);
    p.value.fill(v);
    return p;
  }

  Param& add_values(const std::string& name, Tensor t) {
    Param& p = emplace(name, t.rows, t.cols);
    p.value = std::move(t);
    return p;
  }

  Param& at(const std::string& name) {
    auto it = by_name_.find(name);
    if (it == by_name_.end()) {
      throw std::out_of_range("no parameter named '" + name + "'");
    }
    return *it->second;
  }
  const Param& at(const std::string& name) const {
    return const_cast<ParamStore*>(this)->at(name);
  }
  bool contains(const std::string& name) const {
    return by_name_.count(name) > 0;
  }

  void zero_grads() {
    for (Param* p : order_) p->grad.fill(0.0);
  }

  std::vector<Param*>& entries() { return order_; }
  const std::vector<Param*>& entries() const { return order_; }
  std::uint64_t seed() const { return seed_; }

  std::vector<Tensor> snapshot_values() const {
    std::vector<Tensor> out;
    out.reserve(order_.size());
    for (const Param* p : order_) out.push_back(p->value);
    return out;
  }

  void restore_values(const std::vector<Tensor>& snap) {
    if (snap.size() != order_.size()) {
      throw std::logic_error("snapshot size does not match parameter count");
    }
    for (size_t i = 0; i < snap.size(); ++i) {
      check_same_shape(order_[i]->value, snap[i], "restore_values");
      order_[i]->value = snap[i];
    }
  }

 private:
  Param& emplace(const std::string& name, int rows, int cols) {
    if (by_name_.count(name)) {
      throw std::logic_error("parameter '" + name + "' already registered");
    }
    params_.push_back(Param{name, Tensor(rows, cols), Tensor(rows, cols)});
    Param& p = params_.back();
    order_.push_back(&p);
    by_name_[name] = &p;
    return p;
  }

  std::uint64_t seed_;
  std::deque<Param> params_;  // deque keeps addresses stable
  std::vector<Param*> order_;
  std::unordered_map<std::string, Param*> by_name_;
};

/// Fixed sparse coefficient matrix (COO). Used for graph propagation where
/// the structure is frozen and only the dense operand carries gradients.
struct SparseCoeffs {
  int rows = 0;
  int cols = 0;
  struct Entry {
    int r;
    int c;
    double w;
  };
  std::vector<Entry> entries;
};

using VarId = std::int32_t;

/// Reverse-mode tape. Records primitive operations during a forward pass;
/// backward() replays them in exact reverse order, accumulating d(loss)/d(θ)
/// into every reachable Param. One forward pass pairs with at most one
/// backward pass.
class Tape {
 public:
  VarId leaf(Param& p) {
    Node n;
    n.op = Op::kLeaf;
    n.value = p.value;
    n.param = &p;
    return push(std::move(n));
  }

  VarId constant(Tensor t) {
    Node n;
    n.op = Op::kConst;
    n.value = std::move(t);
    return push(std::move(n));
  }

  VarId constant_scalar(double v) { return constant(Tensor::scalar(v)); }

  VarId add(VarId a, VarId b) { return binary_same(Op::kAdd, a, b); }
  VarId sub(VarId a, VarId b) { return binary_same(Op::kSub, a, b); }
  VarId mul(VarId a, VarId b) { return binary_same(Op::kMul, a, b); }
  VarId div(VarId a, VarId b) { return binary_same(Op::kDiv, a, b); }

  // scalar Var times tensor Var
  VarId smul(VarId s, VarId t) {
    require_scalar(s, "smul");
    Node n;
    n.op = Op::kSmul;
    n.a = s;
    n.b = t;
    const Tensor& tv = val(t);
    n.value = tv;
    const double sv = val(s)[0];
    for (double& x : n.value.data) x *= sv;
    return push(std::move(n));
  }

  VarId scale(VarId a, double c) {
    Node n;
    n.op = Op::kScale;
    n.a = a;
    n.c = c;
    n.value = val(a);
    for (double& x : n.value.data) x *= c;
    return push(std::move(n));
  }

  VarId offset(VarId a, double c) {
    Node n;
    n.op = Op::kOffset;
    n.a = a;
    n.c = c;
    n.value = val(a);
    for (double& x : n.value.data) x += c;
    return push(std::move(n));
  }

  VarId matvec(VarId m, VarId x) {
    const Tensor& mv = val(m);
    const Tensor& xv = val(x);
    if (!xv.is_vector() || mv.cols != xv.rows) {
      throw std::invalid_argument("matvec: shape mismatch " + mv.shape() +
                                  " vs " + xv.shape());
    }
    Node n;
    n.op = Op::kMatVec;
    n.a = m;
    n.b = x;
    n.value = Tensor(mv.rows, 1);
    for (int i = 0; i < mv.rows; ++i) {
      double acc = 0.0;
      for (int j = 0; j < mv.cols; ++j) acc += mv(i, j) * xv[j];
      n.value[i] = acc;
    }
    return push(std::move(n));
  }

  VarId matmat(VarId a, VarId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (av.cols != bv.rows) {
      throw std::invalid_argument("matmat: shape mismatch " + av.shape() +
                                  " vs " + bv.shape());
    }
    Node n;
    n.op = Op::kMatMat;
    n.a = a;
    n.b = b;
    n.value = Tensor(av.rows, bv.cols);
    for (int i = 0; i < av.rows; ++i) {
      for (int k = 0; k < av.cols; ++k) {
        const double aik = av(i, k);
        if (aik == 0.0) continue;
        for (int j = 0; j < bv.cols; ++j) n.value(i, j) += aik * bv(k, j);
      }
    }
    return push(std::move(n));
  }

  // out = C * X with C fixed; gradients flow only through X.
  // `coeffs` must outlive the tape.
  VarId propagate(const SparseCoeffs& coeffs, VarId x) {
    const Tensor& xv = val(x);
    if (coeffs.cols != xv.rows) {
      throw std::invalid_argument(
          "propagate: coefficient cols " + std::to_string(coeffs.cols) +
          " vs operand rows " + std::to_string(xv.rows));
    }
    Node n;
    n.op = Op::kPropagate;
    n.a = x;
    n.coeffs = &coeffs;
    n.value = Tensor(coeffs.rows, xv.cols);
    for (const auto& e : coeffs.entries) {
      for (int j = 0; j < xv.cols; ++j) n.value(e.r, j) += e.w * xv(e.c, j);
    }
    return push(std::move(n));
  }

  VarId concat(VarId a, VarId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    if (!av.is_vector() || !bv.is_vector()) {
      throw std::invalid_argument("concat: expects vectors, got " +
                                  av.shape() + " and " + bv.shape());
    }
    Node n;
    n.op = Op::kConcat;
    n.a = a;
    n.b = b;
    n.value = Tensor(av.rows + bv.rows, 1);
    std::copy(av.data.begin(), av.data.end(), n.value.data.begin());
    std::copy(bv.data.begin(), bv.data.end(), n.value.data.begin() + av.rows);
    return push(std::move(n));
  }

  VarId sum(VarId a) { return reduce(Op::kSum, a); }
  VarId mean(VarId a) { return reduce(Op::kMean, a); }

  VarId tanh(VarId a) { return unary(Op::kTanh, a); }
  VarId sigmoid(VarId a) { return unary(Op::kSigmoid, a); }
  VarId exp(VarId a) { return unary(Op::kExp, a); }
  VarId log(VarId a) { return unary(Op::kLog, a); }
  VarId sin(VarId a) { return unary(Op::kSin, a); }
  VarId cos(VarId a) { return unary(Op::kCos, a); }
  VarId sqrt(VarId a) { return unary(Op::kSqrt, a); }

  // max-subtraction stabilized; output sums to 1
  VarId softmax(VarId a) {
    const Tensor& av = val(a);
    if (!av.is_vector() || av.rows == 0) {
      throw std::invalid_argument("softmax: expects a non-empty vector");
    }
    Node n;
    n.op = Op::kSoftmax;
    n.a = a;
    n.value = Tensor(av.rows, 1);
    double mx = av[0];
    for (int i = 1; i < av.rows; ++i) mx = std::max(mx, av[i]);
    double s = 0.0;
    for (int i = 0; i < av.rows; ++i) {
      n.value[i] = std::exp(av[i] - mx);
      s += n.value[i];
    }
    for (int i = 0; i < av.rows; ++i) n.value[i] /= s;
    return push(std::move(n));
  }

  VarId dot(VarId a, VarId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    check_same_shape(av, bv, "dot");
    Node n;
    n.op = Op::kDot;
    n.a = a;
    n.b = b;
    double acc = 0.0;
    for (int i = 0; i < av.size(); ++i) acc += av.data[i] * bv.data[i];
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  VarId cosine(VarId a, VarId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    check_same_shape(av, bv, "cosine");
    double daa = 0.0, dbb = 0.0, dab = 0.0;
    for (int i = 0; i < av.size(); ++i) {
      daa += av.data[i] * av.data[i];
      dbb += bv.data[i] * bv.data[i];
      dab += av.data[i] * bv.data[i];
    }
    if (daa == 0.0 || dbb == 0.0) {
      throw std::invalid_argument("cosine: zero-norm operand");
    }
    Node n;
    n.op = Op::kCosine;
    n.a = a;
    n.b = b;
    n.value = Tensor::scalar(dab / std::sqrt(daa * dbb));
    return push(std::move(n));
  }

  VarId row(VarId m, int r) {
    const Tensor& mv = val(m);
    if (r < 0 || r >= mv.rows) {
      throw std::out_of_range("row: index " + std::to_string(r) +
                              " out of " + std::to_string(mv.rows));
    }
    Node n;
    n.op = Op::kRow;
    n.a = m;
    n.aux = r;
    n.value = Tensor(mv.cols, 1);
    for (int j = 0; j < mv.cols; ++j) n.value[j] = mv(r, j);
    return push(std::move(n));
  }

  VarId elem(VarId v, int i) {
    const Tensor& vv = val(v);
    if (i < 0 || i >= vv.size()) {
      throw std::out_of_range("elem: index " + std::to_string(i) +
                              " out of " + std::to_string(vv.size()));
    }
    Node n;
    n.op = Op::kElem;
    n.a = v;
    n.aux = i;
    n.value = Tensor::scalar(vv[i]);
    return push(std::move(n));
  }

  VarId gather(VarId v, std::vector<int> idx) {
    const Tensor& vv = val(v);
    for (int i : idx) {
      if (i < 0 || i >= vv.size()) {
        throw std::out_of_range("gather: index " + std::to_string(i) +
                                " out of " + std::to_string(vv.size()));
      }
    }
    Node n;
    n.op = Op::kGather;
    n.a = v;
    n.idx = std::move(idx);
    n.value = Tensor(static_cast<int>(n.idx.size()), 1);
    for (size_t j = 0; j < n.idx.size(); ++j) n.value[static_cast<int>(j)] = vv[n.idx[j]];
    return push(std::move(n));
  }

  const Tensor& value(VarId v) const { return nodes_[check(v)].value; }
  double scalar(VarId v) const {
    const Tensor& t = value(v);
    if (!t.is_scalar()) {
      throw std::logic_error("scalar: node has shape " + t.shape());
    }
    return t[0];
  }

  /// Accumulates d(loss)/d(θ) into every registered Param reachable from
  /// `loss`; parameters not on the tape keep whatever is already in their
  /// gradient buffer (exact zero after ParamStore::zero_grads).
  void backward(VarId loss) {
    if (consumed_) {
      throw std::logic_error("backward: tape already consumed");
    }
    const Tensor& lt = value(loss);
    if (!lt.is_scalar()) {
      throw std::invalid_argument("backward: loss must be scalar, got " +
                                  lt.shape());
    }
    if (!std::isfinite(lt[0])) {
      throw std::runtime_error("backward: non-finite loss value");
    }
    consumed_ = true;
    for (auto& n : nodes_) {
      n.grad = Tensor(n.value.rows, n.value.cols);
    }
    nodes_[static_cast<size_t>(loss)].grad[0] = 1.0;
    for (std::int32_t id = static_cast<std::int32_t>(nodes_.size()) - 1;
         id >= 0; --id) {
      step_back(nodes_[static_cast<size_t>(id)]);
    }
  }

  const Tensor& grad(VarId v) const { return nodes_[check(v)].grad; }

  std::size_t size() const { return nodes_.size(); }

  void clear() {
    nodes_.clear();
    consumed_ = false;
  }

 private:
  enum class Op : std::uint8_t {
    kLeaf,
    kConst,
    kAdd,
    kSub,
    kMul,
    kDiv,
    kSmul,
    kScale,
    kOffset,
    kMatVec,
    kMatMat,
    kPropagate,
    kConcat,
    kSum,
    kMean,
    kTanh,
    kSigmoid,
    kExp,
    kLog,
    kSin,
    kCos,
    kSqrt,
    kSoftmax,
    kDot,
    kCosine,
    kRow,
    kElem,
    kGather,
  };

  struct Node {
    Tensor value;
    Tensor grad;
    Op op = Op::kConst;
    VarId a = -1;
    VarId b = -1;
    int aux = 0;
    double c = 0.0;
    Param* param = nullptr;
    const SparseCoeffs* coeffs = nullptr;
    std::vector<int> idx;
  };

  size_t check(VarId v) const {
    if (v < 0 || static_cast<size_t>(v) >= nodes_.size()) {
      throw std::out_of_range("invalid tape variable id");
    }
    return static_cast<size_t>(v);
  }

  const Tensor& val(VarId v) const { return nodes_[check(v)].value; }

  void require_scalar(VarId v, const char* op) const {
    if (!val(v).is_scalar()) {
      throw std::invalid_argument(std::string(op) +
                                  ": expected scalar, got " + val(v).shape());
    }
  }

  VarId push(Node n) {
    if (consumed_) {
      throw std::logic_error("tape already consumed; clear() before reuse");
    }
    nodes_.push_back(std::move(n));
    return static_cast<VarId>(nodes_.size() - 1);
  }

  VarId binary_same(Op op, VarId a, VarId b) {
    const Tensor& av = val(a);
    const Tensor& bv = val(b);
    check_same_shape(av, bv, op_name(op));
    Node n;
    n.op = op;
    n.a = a;
    n.b = b;
    n.value = av;
    switch (op) {
      case Op::kAdd:
        for (int i = 0; i < av.size(); ++i) n.value.data[i] += bv.data[i];
        break;
      case Op::kSub:
        for (int i = 0; i < av.size(); ++i) n.value.data[i] -= bv.data[i];
        break;
      case Op::kMul:
        for (int i = 0; i < av.size(); ++i) n.value.data[i] *= bv.data[i];
        break;
      case Op::kDiv:
        for (int i = 0; i < av.size(); ++i) n.value.data[i] /= bv.data[i];
        break;
      default:
        throw std::logic_error("binary_same: bad op");
    }
    return push(std::move(n));
  }

  VarId reduce(Op op, VarId a) {
    const Tensor& av = val(a);
    if (av.size() == 0) {
      throw std::invalid_argument("reduce over empty tensor");
    }
    Node n;
    n.op = op;
    n.a = a;
    double acc = 0.0;
    for (double v : av.data) acc += v;
    if (op == Op::kMean) acc /= av.size();
    n.value = Tensor::scalar(acc);
    return push(std::move(n));
  }

  VarId unary(Op op, VarId a) {
    const Tensor& av = val(a);
    Node n;
    n.op = op;
    n.a = a;
    n.value = av;
    for (double& v : n.value.data) {
      switch (op) {
        case Op::kTanh:
          v = std::tanh(v);
          break;
        case Op::kSigmoid:
          v = 1.0 / (1.0 + std::exp(-v));
          break;
        case Op::kExp:
          v = std::exp(v);
          break;
        case Op::kLog:
          if (v <= 0.0) {
            throw std::domain_error("log of non-positive value " +
                                    std::to_string(v));
          }
          v = std::log(v);
          break;
        case Op::kSin:
          v = std::sin(v);
          break;
        case Op::kCos:
          v = std::cos(v);
          break;
        case Op::kSqrt:
          if (v < 0.0) {
            throw std::domain_error("sqrt of negative value " +
                                    std::to_string(v));
          }
          v = std::sqrt(v);
          break;
        default:
          throw std::logic_error("unary: bad op");
      }
    }
    return push(std::move(n));
  }

  static const char* op_name(Op op) {
    switch (op) {
      case Op::kAdd:
        return "add";
      case Op::kSub:
        return "sub";
      case Op::kMul:
        return "mul";
      case Op::kDiv:
        return "div";
      default:
        return "op";
    }
  }

  void step_back(Node& n) {
    Tensor& g = n.grad;
    switch (n.op) {
      case Op::kLeaf:
        for (int i = 0; i < g.size(); ++i) n.param->grad.data[i] += g.data[i];
        break;
      case Op::kConst:
        break;
      case Op::kAdd: {
        Tensor& ga = nodes_[check(n.a)].grad;
        Tensor& gb = nodes_[check(n.b)].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] += g.data[i];
        }
        break;
      }
      case Op::kSub: {
        Tensor& ga = nodes_[check(n.a)].grad;
        Tensor& gb = nodes_[check(n.b)].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i];
          gb.data[i] -= g.data[i];
        }
        break;
      }
      case Op::kMul: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        for (int i = 0; i < g.size(); ++i) {
          na.grad.data[i] += g.data[i] * nb.value.data[i];
          nb.grad.data[i] += g.data[i] * na.value.data[i];
        }
        break;
      }
      case Op::kDiv: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        for (int i = 0; i < g.size(); ++i) {
          const double bi = nb.value.data[i];
          na.grad.data[i] += g.data[i] / bi;
          nb.grad.data[i] -= g.data[i] * n.value.data[i] / bi;
        }
        break;
      }
      case Op::kSmul: {
        Node& ns = nodes_[check(n.a)];
        Node& nt = nodes_[check(n.b)];
        const double sv = ns.value[0];
        double acc = 0.0;
        for (int i = 0; i < g.size(); ++i) {
          acc += g.data[i] * nt.value.data[i];
          nt.grad.data[i] += sv * g.data[i];
        }
        ns.grad[0] += acc;
        break;
      }
      case Op::kScale: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (int i = 0; i < g.size(); ++i) ga.data[i] += n.c * g.data[i];
        break;
      }
      case Op::kOffset: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (int i = 0; i < g.size(); ++i) ga.data[i] += g.data[i];
        break;
      }
      case Op::kMatVec: {
        Node& nm = nodes_[check(n.a)];
        Node& nx = nodes_[check(n.b)];
        const Tensor& mv = nm.value;
        for (int i = 0; i < mv.rows; ++i) {
          const double gi = g[i];
          if (gi == 0.0) continue;
          for (int j = 0; j < mv.cols; ++j) {
            nm.grad(i, j) += gi * nx.value[j];
            nx.grad[j] += gi * mv(i, j);
          }
        }
        break;
      }
      case Op::kMatMat: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        const Tensor& av = na.value;
        const Tensor& bv = nb.value;
        for (int i = 0; i < av.rows; ++i) {
          for (int j = 0; j < bv.cols; ++j) {
            const double gij = g(i, j);
            if (gij == 0.0) continue;
            for (int k = 0; k < av.cols; ++k) {
              na.grad(i, k) += gij * bv(k, j);
              nb.grad(k, j) += gij * av(i, k);
            }
          }
        }
        break;
      }
      case Op::kPropagate: {
        Node& nx = nodes_[check(n.a)];
        const int cols = nx.value.cols;
        for (const auto& e : n.coeffs->entries) {
          for (int j = 0; j < cols; ++j) {
            nx.grad(e.c, j) += e.w * g(e.r, j);
          }
        }
        break;
      }
      case Op::kConcat: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        const int an = na.value.rows;
        for (int i = 0; i < an; ++i) na.grad[i] += g[i];
        for (int i = 0; i < nb.value.rows; ++i) nb.grad[i] += g[an + i];
        break;
      }
      case Op::kSum: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (double& v : ga.data) v += g[0];
        break;
      }
      case Op::kMean: {
        Tensor& ga = nodes_[check(n.a)].grad;
        const double s = g[0] / ga.size();
        for (double& v : ga.data) v += s;
        break;
      }
      case Op::kTanh: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += g.data[i] * (1.0 - y * y);
        }
        break;
      }
      case Op::kSigmoid: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (int i = 0; i < g.size(); ++i) {
          const double y = n.value.data[i];
          ga.data[i] += g.data[i] * y * (1.0 - y);
        }
        break;
      }
      case Op::kExp: {
        Tensor& ga = nodes_[check(n.a)].grad;
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += g.data[i] * n.value.data[i];
        }
        break;
      }
      case Op::kLog: {
        Node& na = nodes_[check(n.a)];
        for (int i = 0; i < g.size(); ++i) {
          na.grad.data[i] += g.data[i] / na.value.data[i];
        }
        break;
      }
      case Op::kSin: {
        Node& na = nodes_[check(n.a)];
        for (int i = 0; i < g.size(); ++i) {
          na.grad.data[i] += g.data[i] * std::cos(na.value.data[i]);
        }
        break;
      }
      case Op::kCos: {
        Node& na = nodes_[check(n.a)];
        for (int i = 0; i < g.size(); ++i) {
          na.grad.data[i] -= g.data[i] * std::sin(na.value.data[i]);
        }
        break;
      }
      case Op::kSqrt: {
        Node& na = nodes_[check(n.a)];
        for (int i = 0; i < g.size(); ++i) {
          na.grad.data[i] += g.data[i] / (2.0 * n.value.data[i]);
        }
        break;
      }
      case Op::kSoftmax: {
        Tensor& ga = nodes_[check(n.a)].grad;
        double gy = 0.0;
        for (int i = 0; i < g.size(); ++i) gy += g.data[i] * n.value.data[i];
        for (int i = 0; i < g.size(); ++i) {
          ga.data[i] += n.value.data[i] * (g.data[i] - gy);
        }
        break;
      }
      case Op::kDot: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        const double gv = g[0];
        for (int i = 0; i < na.value.size(); ++i) {
          na.grad.data[i] += gv * nb.value.data[i];
          nb.grad.data[i] += gv * na.value.data[i];
        }
        break;
      }
      case Op::kCosine: {
        Node& na = nodes_[check(n.a)];
        Node& nb = nodes_[check(n.b)];
        double daa = 0.0, dbb = 0.0;
        for (int i = 0; i < na.value.size(); ++i) {
          daa += na.value.data[i] * na.value.data[i];
          dbb += nb.value.data[i] * nb.value.data[i];
        }
        const double nanb = std::sqrt(daa * dbb);
        const double cv = n.value[0];
        const double gv = g[0];
        for (int i = 0; i < na.value.size(); ++i) {
          na.grad.data[i] +=
              gv * (nb.value.data[i] / nanb - cv * na.value.data[i] / daa);
          nb.grad.data[i] +=
              gv * (na.value.data[i] / nanb - cv * nb.value.data[i] / dbb);
        }
        break;
      }
      case Op::kRow: {
        Node& nm = nodes_[check(n.a)];
        for (int j = 0; j < g.size(); ++j) nm.grad(n.aux, j) += g[j];
        break;
      }
      case Op::kElem: {
        Node& nv = nodes_[check(n.a)];
        nv.grad.data[static_cast<size_t>(n.aux)] += g[0];
        break;
      }
      case Op::kGather: {
        Node& nv = nodes_[check(n.a)];
        for (size_t j = 0; j < n.idx.size(); ++j) {
          nv.grad.data[static_cast<size_t>(n.idx[j])] +=
              g[static_cast<int>(j)];
        }
        break;
      }
    }
  }

  std::vector<Node> nodes_;
  bool consumed_ = false;
};

struct GradCheckEntry {
  std::string name;
  int coords_checked = 0;
  double max_rel_err = 0.0;
  bool pass = true;
};

struct GradCheckReport {
  std::vector<GradCheckEntry> tensors;
  double max_rel_err = 0.0;
  bool all_pass = true;
};

/// Central-difference verification of the tape gradients.
///
/// `run(true)` must rebuild the forward pass from current store values,
/// call backward, and return the loss; `run(false)` returns the loss only.
/// Large tensors are sub-sampled to at most `max_coords` coordinates drawn
/// from a seeded stream, so reports are reproducible.
inline GradCheckReport grad_check(ParamStore& store,
                                  const std::function<double(bool)>& run,
                                  double step = 1e-4, double tol = 1e-3,
                                  int max_coords = 200,
                                  std::uint64_t probe_seed = 17) {
  store.zero_grads();
  run(true);

  GradCheckReport report;
  for (Param* p : store.entries()) {
    const Tensor analytic = p->grad;
    std::vector<int> coords;
    const int n = p->value.size();
    if (n <= max_coords) {
      coords.resize(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) coords[static_cast<size_t>(i)] = i;
    } else {
      Rng rng(probe_seed ^ fnv1a64(p->name));
      std::vector<int> all(static_cast<size_t>(n));
      for (int i = 0; i < n; ++i) all[static_cast<size_t>(i)] = i;
      rng.shuffle(all);
      coords.assign(all.begin(), all.begin() + max_coords);
    }

    GradCheckEntry entry;
    entry.name = p->name;
    entry.coords_checked = static_cast<int>(coords.size());
    for (int i : coords) {
      const double saved = p->value.data[static_cast<size_t>(i)];
      p->value.data[static_cast<size_t>(i)] = saved + step;
      const double f_plus = run(false);
      p->value.data[static_cast<size_t>(i)] = saved - step;
      const double f_minus = run(false);
      p->value.data[static_cast<size_t>(i)] = saved;
      const double numeric = (f_plus - f_minus) / (2.0 * step);
      const double a = analytic.data[static_cast<size_t>(i)];
      const double rel =
          std::abs(a - numeric) / std::max(1e-8, std::abs(a) + std::abs(numeric));
      entry.max_rel_err = std::max(entry.max_rel_err, rel);
    }
    entry.pass = entry.max_rel_err <= tol;
    report.max_rel_err = std::max(report.max_rel_err, entry.max_rel_err);
    report.all_pass = report.all_pass && entry.pass;
    report.tensors.push_back(std::move(entry));
  }
  return report;
}

}  // namespace tide
