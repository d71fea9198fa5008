#include "leaf/autodiff.hpp"

#include <algorithm>
#include <cmath>

#include "leaf/kernels.hpp"

namespace leaf {

namespace {

const kernels::Backend& K() { return kernels::active(); }

void require(bool cond, const char* msg) {
  if (!cond) throw std::invalid_argument(msg);
}

}  // namespace

Tape::Id Tape::emplace(Tensor value, bool requires_grad, const char* op) {
  if (!value.all_finite())
    throw NonFiniteError(std::string("non-finite values in output of ") + op);
  Node n;
  if (requires_grad) n.grad = Tensor(value.shape());
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  nodes_.push_back(std::move(n));
  return static_cast<Id>(nodes_.size() - 1);
}

void Tape::record(std::function<void(Tape&)> step) {
  steps_.push_back(std::move(step));
}

Tape::Id Tape::constant(Tensor v) { return emplace(std::move(v), false, "constant"); }

Tape::Id Tape::param(Parameter& p) {
  auto it = param_nodes_.find(&p);
  if (it != param_nodes_.end()) return it->second;
  Id id = emplace(p.value, true, p.name.c_str());
  node(id).owner = &p;
  param_nodes_.emplace(&p, id);
  return id;
}

Tape::Id Tape::add(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "add: shape mismatch");
  Tensor out(va.shape());
  K().add(va.data(), vb.data(), out.data(), out.storage().size());
  const bool req = requires_grad(a) || requires_grad(b);
  Id y = emplace(std::move(out), req, "add");
  if (req)
    record([a, b, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      if (t.requires_grad(a))
        K().axpy(1.0, gy.data(), t.grad_ref(a).data(), gy.storage().size());
      if (t.requires_grad(b))
        K().axpy(1.0, gy.data(), t.grad_ref(b).data(), gy.storage().size());
    });
  return y;
}

Tape::Id Tape::sub(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "sub: shape mismatch");
  Tensor out(va.shape());
  K().sub(va.data(), vb.data(), out.data(), out.storage().size());
  const bool req = requires_grad(a) || requires_grad(b);
  Id y = emplace(std::move(out), req, "sub");
  if (req)
    record([a, b, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      if (t.requires_grad(a))
        K().axpy(1.0, gy.data(), t.grad_ref(a).data(), gy.storage().size());
      if (t.requires_grad(b))
        K().axpy(-1.0, gy.data(), t.grad_ref(b).data(), gy.storage().size());
    });
  return y;
}

Tape::Id Tape::mul(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "mul: shape mismatch");
  Tensor out(va.shape());
  K().mul(va.data(), vb.data(), out.data(), out.storage().size());
  const bool req = requires_grad(a) || requires_grad(b);
  Id y = emplace(std::move(out), req, "mul");
  if (req)
    record([a, b, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      const size_t n = gy.storage().size();
      if (t.requires_grad(a)) {
        Tensor& ga = t.grad_ref(a);
        const double* pb = t.value(b).data();
        for (size_t i = 0; i < n; ++i) ga[static_cast<int64_t>(i)] += gy[static_cast<int64_t>(i)] * pb[i];
      }
      if (t.requires_grad(b)) {
        Tensor& gb = t.grad_ref(b);
        const double* pa = t.value(a).data();
        for (size_t i = 0; i < n; ++i) gb[static_cast<int64_t>(i)] += gy[static_cast<int64_t>(i)] * pa[i];
      }
    });
  return y;
}

Tape::Id Tape::scale(Id a, double s) {
  const Tensor& va = value(a);
  Tensor out(va.shape());
  K().scale(s, va.data(), out.data(), out.storage().size());
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "scale");
  if (req)
    record([a, s, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      K().axpy(s, gy.data(), t.grad_ref(a).data(), gy.storage().size());
    });
  return y;
}

Tape::Id Tape::add_scalar(Id a, double c) {
  const Tensor& va = value(a);
  Tensor out = va;
  for (double& x : out.storage()) x += c;
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "add_scalar");
  if (req)
    record([a, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      K().axpy(1.0, gy.data(), t.grad_ref(a).data(), gy.storage().size());
    });
  return y;
}

Tape::Id Tape::matmul(Id a, Id b) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.rank() == 2 && vb.rank() == 2, "matmul: operands must be rank-2");
  require(va.cols() == vb.rows(), "matmul: inner dimensions disagree");
  const long n = va.rows(), k = va.cols(), p = vb.cols();
  Tensor out({n, p});
  K().gemm_nn(va.data(), vb.data(), out.data(), n, k, p, false);
  const bool req = requires_grad(a) || requires_grad(b);
  Id y = emplace(std::move(out), req, "matmul");
  if (req)
    record([a, b, y, n, k, p](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      if (t.requires_grad(a))
        K().gemm_nt(gy.data(), t.value(b).data(), t.grad_ref(a).data(), n, p, k, true);
      if (t.requires_grad(b))
        K().gemm_tn(t.value(a).data(), gy.data(), t.grad_ref(b).data(), k, n, p, true);
    });
  return y;
}

Tape::Id Tape::transpose(Id a) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "transpose: rank-2 only");
  const int64_t n = va.rows(), m = va.cols();
  Tensor out({m, n});
  for (int64_t i = 0; i < n; ++i)
    for (int64_t j = 0; j < m; ++j) out.at(j, i) = va.at(i, j);
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "transpose");
  if (req)
    record([a, y, n, m](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      Tensor& ga = t.grad_ref(a);
      for (int64_t i = 0; i < n; ++i)
        for (int64_t j = 0; j < m; ++j) ga.at(i, j) += gy.at(j, i);
    });
  return y;
}

Tape::Id Tape::reshape(Id a, std::vector<int64_t> shape) {
  const Tensor& va = value(a);
  require(shape_numel(shape) == va.numel(), "reshape: element count mismatch");
  Tensor out(std::move(shape), va.storage());
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "reshape");
  if (req)
    record([a, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      K().axpy(1.0, gy.data(), t.grad_ref(a).data(), gy.storage().size());
    });
  return y;
}

Tape::Id Tape::relu(Id a) {
  const Tensor& va = value(a);
  Tensor out(va.shape());
  K().relu(va.data(), out.data(), out.storage().size());
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "relu");
  if (req)
    record([a, y](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      K().relu_backward(t.value(a).data(), gy.data(), t.grad_ref(a).data(),
                        gy.storage().size());
    });
  return y;
}

Tape::Id Tape::row_softmax(Id a) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "row_softmax: rank-2 only");
  const int64_t n = va.rows(), m = va.cols();
  Tensor out({n, m});
  for (int64_t i = 0; i < n; ++i) {
    const double* x = va.data() + i * m;
    double* y = out.data() + i * m;
    double mx = x[0];
    for (int64_t j = 1; j < m; ++j) mx = std::max(mx, x[j]);
    double s = 0.0;
    for (int64_t j = 0; j < m; ++j) {
      y[j] = std::exp(x[j] - mx);
      s += y[j];
    }
    for (int64_t j = 0; j < m; ++j) y[j] /= s;
  }
  const bool req = requires_grad(a);
  Id id = emplace(std::move(out), req, "row_softmax");
  if (req)
    record([a, id, n, m](Tape& t) {
      const Tensor& gy = t.grad_ref(id);
      const Tensor& y = t.value(id);
      Tensor& ga = t.grad_ref(a);
      for (int64_t i = 0; i < n; ++i) {
        const double* gyr = gy.data() + i * m;
        const double* yr = y.data() + i * m;
        double* gar = ga.data() + i * m;
        const double inner = K().dot(gyr, yr, static_cast<size_t>(m));
        for (int64_t j = 0; j < m; ++j) gar[j] += yr[j] * (gyr[j] - inner);
      }
    });
  return id;
}

Tape::Id Tape::add_row_bias(Id x, Id bias) {
  const Tensor& vx = value(x);
  const Tensor& vb = value(bias);
  require(vx.rank() == 2, "add_row_bias: x must be rank-2");
  require(vb.rank() == 1 && vb.numel() == vx.cols(),
          "add_row_bias: bias length must equal column count");
  const int64_t n = vx.rows(), m = vx.cols();
  Tensor out({n, m});
  for (int64_t i = 0; i < n; ++i)
    K().add(vx.data() + i * m, vb.data(), out.data() + i * m,
            static_cast<size_t>(m));
  const bool req = requires_grad(x) || requires_grad(bias);
  Id y = emplace(std::move(out), req, "add_row_bias");
  if (req)
    record([x, bias, y, n, m](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      if (t.requires_grad(x))
        K().axpy(1.0, gy.data(), t.grad_ref(x).data(), gy.storage().size());
      if (t.requires_grad(bias)) {
        Tensor& gb = t.grad_ref(bias);
        for (int64_t i = 0; i < n; ++i)
          K().axpy(1.0, gy.data() + i * m, gb.data(), static_cast<size_t>(m));
      }
    });
  return y;
}

Tape::Id Tape::row(Id a, int64_t i) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "row: rank-2 only");
  require(i >= 0 && i < va.rows(), "row: index out of range");
  const int64_t m = va.cols();
  Tensor out({1, m});
  std::copy_n(va.data() + i * m, m, out.data());
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "row");
  if (req)
    record([a, y, i, m](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      K().axpy(1.0, gy.data(), t.grad_ref(a).data() + i * m,
               static_cast<size_t>(m));
    });
  return y;
}

Tape::Id Tape::gather_time_major(Id a, int64_t t_steps, int64_t n_vertices) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "gather_time_major: rank-2 only");
  require(va.rows() == t_steps * n_vertices,
          "gather_time_major: rows must equal T*N");
  const int64_t d = va.cols();
  Tensor out({n_vertices, t_steps * d});
  for (int64_t i = 0; i < n_vertices; ++i)
    for (int64_t s = 0; s < t_steps; ++s)
      std::copy_n(va.data() + (s * n_vertices + i) * d, d,
                  out.data() + i * (t_steps * d) + s * d);
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "gather_time_major");
  if (req)
    record([a, y, t_steps, n_vertices, d](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      Tensor& ga = t.grad_ref(a);
      for (int64_t i = 0; i < n_vertices; ++i)
        for (int64_t s = 0; s < t_steps; ++s)
          K().axpy(1.0, gy.data() + i * (t_steps * d) + s * d,
                   ga.data() + (s * n_vertices + i) * d,
                   static_cast<size_t>(d));
    });
  return y;
}

Tape::Id Tape::row_sum(Id a) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "row_sum: rank-2 only");
  const int64_t n = va.rows(), m = va.cols();
  Tensor out({n, 1});
  for (int64_t i = 0; i < n; ++i)
    out[i] = K().sum(va.data() + i * m, static_cast<size_t>(m));
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "row_sum");
  if (req)
    record([a, y, n, m](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      Tensor& ga = t.grad_ref(a);
      for (int64_t i = 0; i < n; ++i) {
        const double g = gy[i];
        double* gar = ga.data() + i * m;
        for (int64_t j = 0; j < m; ++j) gar[j] += g;
      }
    });
  return y;
}

Tape::Id Tape::col_sum(Id a) {
  const Tensor& va = value(a);
  require(va.rank() == 2, "col_sum: rank-2 only");
  const int64_t n = va.rows(), m = va.cols();
  Tensor out({1, m});
  for (int64_t i = 0; i < n; ++i)
    K().axpy(1.0, va.data() + i * m, out.data(), static_cast<size_t>(m));
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "col_sum");
  if (req)
    record([a, y, n, m](Tape& t) {
      const Tensor& gy = t.grad_ref(y);
      Tensor& ga = t.grad_ref(a);
      for (int64_t i = 0; i < n; ++i)
        K().axpy(1.0, gy.data(), ga.data() + i * m, static_cast<size_t>(m));
    });
  return y;
}

Tape::Id Tape::sum(Id a) {
  const Tensor& va = value(a);
  Tensor out = Tensor::scalar(K().sum(va.data(), va.storage().size()));
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "sum");
  if (req)
    record([a, y](Tape& t) {
      const double g = t.grad_ref(y)[0];
      Tensor& ga = t.grad_ref(a);
      for (double& x : ga.storage()) x += g;
    });
  return y;
}

Tape::Id Tape::mean(Id a) {
  const Tensor& va = value(a);
  const double n = static_cast<double>(va.numel());
  Tensor out = Tensor::scalar(K().sum(va.data(), va.storage().size()) / n);
  const bool req = requires_grad(a);
  Id y = emplace(std::move(out), req, "mean");
  if (req)
    record([a, y, n](Tape& t) {
      const double g = t.grad_ref(y)[0] / n;
      Tensor& ga = t.grad_ref(a);
      for (double& x : ga.storage()) x += g;
    });
  return y;
}

Tape::Id Tape::huber(Id a, Id b, double delta) {
  const Tensor& va = value(a);
  const Tensor& vb = value(b);
  require(va.same_shape(vb), "huber: shape mismatch");
  require(delta > 0.0, "huber: delta must be positive");
  const size_t n = va.storage().size();
  double acc = 0.0;
  for (size_t i = 0; i < n; ++i) {
    const double r = va.data()[i] - vb.data()[i];
    const double ar = std::abs(r);
    acc += ar <= delta ? 0.5 * r * r : delta * (ar - 0.5 * delta);
  }
  Tensor out = Tensor::scalar(acc / static_cast<double>(n));
  const bool req = requires_grad(a) || requires_grad(b);
  Id y = emplace(std::move(out), req, "huber");
  if (req)
    record([a, b, y, delta, n](Tape& t) {
      const double g = t.grad_ref(y)[0] / static_cast<double>(n);
      const double* pa = t.value(a).data();
      const double* pb = t.value(b).data();
      const bool ra = t.requires_grad(a);
      const bool rb = t.requires_grad(b);
      double* ga = ra ? t.grad_ref(a).data() : nullptr;
      double* gb = rb ? t.grad_ref(b).data() : nullptr;
      for (size_t i = 0; i < n; ++i) {
        const double r = pa[i] - pb[i];
        const double w = std::abs(r) <= delta ? r : (r > 0.0 ? delta : -delta);
        if (ra) ga[i] += g * w;
        if (rb) gb[i] -= g * w;
      }
    });
  return y;
}

void Tape::backward(Id loss) {
  Node& l = node(loss);
  if (l.value.numel() != 1)
    throw std::invalid_argument("backward: loss must be scalar");
  if (l.requires_grad) {
    l.grad[0] = 1.0;
    for (auto it = steps_.rbegin(); it != steps_.rend(); ++it) (*it)(*this);
    for (auto& [p, id] : param_nodes_) {
      const Tensor& g = grad_ref(id);
      Parameter* owner = node(id).owner;
      K().axpy(1.0, g.data(), owner->grad.data(), g.storage().size());
    }
  }
  reset();
}

void Tape::reset() {
  nodes_.clear();
  steps_.clear();
  param_nodes_.clear();
}

}  // namespace leaf
