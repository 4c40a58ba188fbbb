#include "simt/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace simt {

namespace {

std::string dims(const Matrix& m) {
  std::ostringstream os;
  os << m.rows() << "x" << m.cols();
  return os.str();
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a, const Matrix& b) {
  throw std::invalid_argument(std::string(op) + ": shape mismatch " + dims(a) +
                              " vs " + dims(b));
}

[[noreturn]] void shape_fail(const char* op, const Matrix& a) {
  throw std::invalid_argument(std::string(op) + ": bad shape " + dims(a));
}

void accum(detail::Node* n, const Matrix& g) {
  if (!n->requires_grad) return;
  if (n->grad.size() == 0) n->grad = Matrix::Zero(n->value.rows(), n->value.cols());
  n->grad += g;
  n->seen_grad = true;
}

Tape* tape_of(const Tensor& a, const Tensor& b, const char* op) {
  if (a.tape != b.tape)
    throw std::invalid_argument(std::string(op) + ": operands on different tapes");
  return a.tape;
}

// Shared exp kernel; explicit loops so that scaling every weight by a power
// of two scales each partial sum exactly and leaves the quotient bit-identical.
Matrix exp_softmax(const Matrix& z, const Matrix* w) {
  Matrix y(z.rows(), z.cols());
  for (Eigen::Index i = 0; i < z.rows(); ++i) {
    Scalar mx = z.row(i).maxCoeff();
    Scalar sum = 0.0;
    for (Eigen::Index j = 0; j < z.cols(); ++j) {
      Scalar e = std::exp(z(i, j) - mx);
      if (w) e *= (*w)(i, j);
      y(i, j) = e;
      sum += e;
    }
    for (Eigen::Index j = 0; j < z.cols(); ++j) y(i, j) /= sum;
  }
  return y;
}

// dZ for (weighted) softmax: y .* (g - rowdot(g, y)).
Matrix softmax_dz(const Matrix& y, const Matrix& g) {
  Matrix gy = g.cwiseProduct(y);
  Eigen::VectorXd s = gy.rowwise().sum();
  return y.cwiseProduct(g.colwise() - s);
}

}  // namespace

const Matrix& Tensor::grad() const {
  if (!node->seen_grad) throw std::logic_error("tensor has no gradient");
  return node->grad;
}

Scalar Tensor::scalar() const {
  if (node->value.size() != 1) shape_fail("scalar", node->value);
  return node->value(0, 0);
}

Tensor Tape::make(Matrix value, bool requires_grad, std::function<void()> backprop) {
  nodes_.emplace_back();
  detail::Node& n = nodes_.back();
  n.value = std::move(value);
  n.requires_grad = requires_grad;
  n.backprop = std::move(backprop);
  return Tensor(this, &n);
}

Tensor Tape::constant(Matrix v) { return make(std::move(v), false, nullptr); }

Tensor Tape::leaf(Matrix v) { return make(std::move(v), true, nullptr); }

Tensor Tape::use(Parameter& p) {
  for (auto& [param, node] : bound_)
    if (param == &p) return Tensor(this, node);
  Tensor t = make(p.value, true, nullptr);
  bound_.emplace_back(&p, t.node);
  return t;
}

void Tape::backward(const Tensor& loss) {
  if (used_) throw std::logic_error("tape already ran backward");
  used_ = true;
  if (loss.tape != this) throw std::invalid_argument("backward: loss on another tape");
  if (loss.node->value.size() != 1)
    throw std::invalid_argument("backward: loss must be 1x1, got " + dims(loss.node->value));
  accum(loss.node, Matrix::Ones(1, 1));
  for (auto it = nodes_.rbegin(); it != nodes_.rend(); ++it)
    if (it->requires_grad && it->seen_grad && it->backprop) it->backprop();
  for (auto& [param, node] : bound_)
    if (node->seen_grad) param->grad += node->grad;
}

Tensor matmul(const Tensor& a, const Tensor& b) {
  Tape* t = tape_of(a, b, "matmul");
  if (a.cols() != b.rows()) shape_fail("matmul", a.value(), b.value());
  auto *an = a.node, *bn = b.node;
  Tensor out = t->make(a.value() * b.value(), an->requires_grad || bn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, bn, on] {
    accum(an, on->grad * bn->value.transpose());
    accum(bn, an->value.transpose() * on->grad);
  };
  return out;
}

Tensor add(const Tensor& a, const Tensor& b) {
  Tape* t = tape_of(a, b, "add");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("add", a.value(), b.value());
  auto *an = a.node, *bn = b.node;
  Tensor out = t->make(a.value() + b.value(), an->requires_grad || bn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, bn, on] {
    accum(an, on->grad);
    accum(bn, on->grad);
  };
  return out;
}

Tensor sub(const Tensor& a, const Tensor& b) {
  Tape* t = tape_of(a, b, "sub");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("sub", a.value(), b.value());
  auto *an = a.node, *bn = b.node;
  Tensor out = t->make(a.value() - b.value(), an->requires_grad || bn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, bn, on] {
    accum(an, on->grad);
    accum(bn, -on->grad);
  };
  return out;
}

Tensor add_rowvec(const Tensor& a, const Tensor& row) {
  Tape* t = tape_of(a, row, "add_rowvec");
  if (row.rows() != 1 || row.cols() != a.cols()) shape_fail("add_rowvec", a.value(), row.value());
  auto *an = a.node, *rn = row.node;
  Matrix v = a.value();
  v.rowwise() += row.value().row(0);
  Tensor out = t->make(std::move(v), an->requires_grad || rn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, rn, on] {
    accum(an, on->grad);
    accum(rn, on->grad.colwise().sum());
  };
  return out;
}

Tensor mul(const Tensor& a, const Tensor& b) {
  Tape* t = tape_of(a, b, "mul");
  if (a.rows() != b.rows() || a.cols() != b.cols()) shape_fail("mul", a.value(), b.value());
  auto *an = a.node, *bn = b.node;
  Tensor out = t->make(a.value().cwiseProduct(b.value()),
                       an->requires_grad || bn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, bn, on] {
    accum(an, on->grad.cwiseProduct(bn->value));
    accum(bn, on->grad.cwiseProduct(an->value));
  };
  return out;
}

Tensor scale(const Tensor& a, Scalar c) {
  auto* an = a.node;
  Tensor out = a.tape->make(a.value() * c, an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on, c] { accum(an, on->grad * c); };
  return out;
}

Tensor add_scalar(const Tensor& a, Scalar c) {
  auto* an = a.node;
  Tensor out = a.tape->make((a.value().array() + c).matrix(), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] { accum(an, on->grad); };
  return out;
}

Tensor transpose(const Tensor& a) {
  auto* an = a.node;
  Tensor out = a.tape->make(a.value().transpose(), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] { accum(an, on->grad.transpose()); };
  return out;
}

Tensor relu(const Tensor& a) {
  auto* an = a.node;
  Tensor out = a.tape->make(a.value().cwiseMax(0.0), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] {
    accum(an, on->grad.cwiseProduct((an->value.array() > 0.0).cast<Scalar>().matrix()));
  };
  return out;
}

Tensor clamp(const Tensor& a, double lo, double hi) {
  if (!(lo < hi)) throw std::invalid_argument("clamp: lo must be below hi");
  auto* an = a.node;
  Tensor out = a.tape->make(a.value().cwiseMax(lo).cwiseMin(hi), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on, lo, hi] {
    const Matrix pass =
        ((an->value.array() > lo) && (an->value.array() < hi)).cast<Scalar>().matrix();
    accum(an, on->grad.cwiseProduct(pass));
  };
  return out;
}

Tensor sigmoid(const Tensor& a) {
  auto* an = a.node;
  Matrix y = (1.0 / (1.0 + (-a.value().array()).exp())).matrix();
  Tensor out = a.tape->make(std::move(y), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] {
    const auto& y = on->value.array();
    accum(an, (on->grad.array() * y * (1.0 - y)).matrix());
  };
  return out;
}

Tensor abs(const Tensor& a) {
  auto* an = a.node;
  Tensor out = a.tape->make(a.value().cwiseAbs(), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] {
    accum(an, on->grad.cwiseProduct(an->value.array().sign().matrix()));
  };
  return out;
}

Tensor softmax_rows(const Tensor& z) {
  auto* zn = z.node;
  Tensor out = z.tape->make(exp_softmax(z.value(), nullptr), zn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [zn, on] { accum(zn, softmax_dz(on->value, on->grad)); };
  return out;
}

Tensor weighted_softmax_rows(const Tensor& z, const Tensor& w) {
  Tape* t = tape_of(z, w, "weighted_softmax_rows");
  if (z.rows() != w.rows() || z.cols() != w.cols())
    shape_fail("weighted_softmax_rows", z.value(), w.value());
  if ((w.value().array() <= 0.0).any())
    throw std::invalid_argument("weighted_softmax_rows: weights must be positive");
  auto *zn = z.node, *wn = w.node;
  Tensor out = t->make(exp_softmax(z.value(), &w.value()),
                       zn->requires_grad || wn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [zn, wn, on] {
    Matrix dz = softmax_dz(on->value, on->grad);
    accum(zn, dz);
    accum(wn, dz.cwiseQuotient(wn->value));
  };
  return out;
}

Tensor masked_fill(const Tensor& a, const Matrix& keep) {
  if (a.rows() != keep.rows() || a.cols() != keep.cols())
    shape_fail("masked_fill", a.value(), keep);
  auto* an = a.node;
  Matrix v = a.value() + (1.0 - keep.array()).matrix() * -1e9;
  Tensor out = a.tape->make(std::move(v), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] { accum(an, on->grad); };
  return out;
}

Tensor layer_norm_rows(const Tensor& x, const Tensor& gain, const Tensor& bias) {
  Tape* t = tape_of(x, gain, "layer_norm_rows");
  tape_of(x, bias, "layer_norm_rows");
  const Eigen::Index d = x.cols();
  if (gain.rows() != 1 || gain.cols() != d || bias.rows() != 1 || bias.cols() != d)
    shape_fail("layer_norm_rows", x.value(), gain.value());
  constexpr Scalar eps = 1e-5;
  auto *xn = x.node, *gn = gain.node, *bn = bias.node;

  const Matrix& xv = x.value();
  Eigen::VectorXd mu = xv.rowwise().mean();
  Matrix cen = xv.colwise() - mu;
  Eigen::VectorXd inv_sd =
      ((cen.array().square().rowwise().sum() / double(d)) + eps).rsqrt().matrix();
  Matrix xhat = (cen.array().colwise() * inv_sd.array()).matrix();
  Matrix y = (xhat.array().rowwise() * gain.value().row(0).array()).matrix();
  y.rowwise() += bias.value().row(0);

  Tensor out = t->make(std::move(y),
                       xn->requires_grad || gn->requires_grad || bn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [xn, gn, bn, on, xhat = std::move(xhat), inv_sd = std::move(inv_sd), d] {
    const Matrix& g = on->grad;
    accum(gn, (g.array() * xhat.array()).colwise().sum().matrix());
    accum(bn, g.colwise().sum());
    // dxhat = g .* gain; dx = inv_sd/d * (d*dxhat - sum(dxhat) - xhat*sum(dxhat.*xhat))
    Matrix dxh = (g.array().rowwise() * gn->value.row(0).array()).matrix();
    Eigen::VectorXd s1 = dxh.rowwise().sum();
    Eigen::VectorXd s2 = (dxh.array() * xhat.array()).rowwise().sum();
    Matrix dx = double(d) * dxh;
    dx.colwise() -= s1;
    dx -= (xhat.array().colwise() * s2.array()).matrix();
    dx = (dx.array().colwise() * (inv_sd.array() / double(d))).matrix();
    accum(xn, dx);
  };
  return out;
}

Tensor embedding_rows(const Tensor& table, const std::vector<int>& ids) {
  auto* tn = table.node;
  for (int id : ids)
    if (id < 0 || id >= table.rows())
      throw std::invalid_argument("embedding_rows: id " + std::to_string(id) +
                                  " outside table of " + std::to_string(table.rows()) + " rows");
  Matrix v(static_cast<Eigen::Index>(ids.size()), table.cols());
  for (std::size_t i = 0; i < ids.size(); ++i) v.row(i) = table.value().row(ids[i]);
  Tensor out = table.tape->make(std::move(v), tn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [tn, on, ids] {
    Matrix g = Matrix::Zero(tn->value.rows(), tn->value.cols());
    for (std::size_t i = 0; i < ids.size(); ++i)
      g.row(ids[i]) += on->grad.row(static_cast<Eigen::Index>(i));
    accum(tn, g);
  };
  return out;
}

Tensor slice_cols(const Tensor& a, Eigen::Index begin, Eigen::Index n) {
  if (begin < 0 || n < 0 || begin + n > a.cols()) shape_fail("slice_cols", a.value());
  auto* an = a.node;
  Tensor out = a.tape->make(a.value().middleCols(begin, n), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on, begin, n] {
    Matrix g = Matrix::Zero(an->value.rows(), an->value.cols());
    g.middleCols(begin, n) = on->grad;
    accum(an, g);
  };
  return out;
}

Tensor concat_cols(const std::vector<Tensor>& parts) {
  if (parts.empty()) throw std::invalid_argument("concat_cols: no inputs");
  Tape* t = parts[0].tape;
  Eigen::Index rows = parts[0].rows(), cols = 0;
  bool rg = false;
  for (const Tensor& p : parts) {
    tape_of(parts[0], p, "concat_cols");
    if (p.rows() != rows) shape_fail("concat_cols", parts[0].value(), p.value());
    cols += p.cols();
    rg = rg || p.node->requires_grad;
  }
  Matrix v(rows, cols);
  std::vector<detail::Node*> srcs;
  Eigen::Index off = 0;
  for (const Tensor& p : parts) {
    v.middleCols(off, p.cols()) = p.value();
    srcs.push_back(p.node);
    off += p.cols();
  }
  Tensor out = t->make(std::move(v), rg, nullptr);
  auto* on = out.node;
  on->backprop = [srcs, on] {
    Eigen::Index off = 0;
    for (auto* s : srcs) {
      accum(s, on->grad.middleCols(off, s->value.cols()));
      off += s->value.cols();
    }
  };
  return out;
}

Tensor add_diag(const Tensor& a, const Tensor& d) {
  Tape* t = tape_of(a, d, "add_diag");
  if (a.rows() != a.cols() || d.cols() != 1 || d.rows() != a.rows())
    shape_fail("add_diag", a.value(), d.value());
  auto *an = a.node, *dn = d.node;
  Matrix v = a.value();
  v.diagonal() += d.value().col(0);
  Tensor out = t->make(std::move(v), an->requires_grad || dn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, dn, on] {
    accum(an, on->grad);
    accum(dn, on->grad.diagonal());
  };
  return out;
}

Tensor tile_cols(const Tensor& col, Eigen::Index n) {
  if (col.cols() != 1 || n <= 0) shape_fail("tile_cols", col.value());
  auto* cn = col.node;
  Tensor out = col.tape->make(col.value().replicate(1, n), cn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [cn, on] { accum(cn, on->grad.rowwise().sum()); };
  return out;
}

Tensor sum_all(const Tensor& a) {
  auto* an = a.node;
  Matrix v(1, 1);
  v(0, 0) = a.value().sum();
  Tensor out = a.tape->make(std::move(v), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] {
    accum(an, Matrix::Constant(an->value.rows(), an->value.cols(), on->grad(0, 0)));
  };
  return out;
}

Tensor mean_all(const Tensor& a) {
  auto* an = a.node;
  Matrix v(1, 1);
  v(0, 0) = a.value().mean();
  Tensor out = a.tape->make(std::move(v), an->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [an, on] {
    Scalar c = on->grad(0, 0) / static_cast<Scalar>(an->value.size());
    accum(an, Matrix::Constant(an->value.rows(), an->value.cols(), c));
  };
  return out;
}

Tensor cross_entropy_mean(const Tensor& logits, const std::vector<int>& targets,
                          Scalar label_smoothing) {
  auto* zn = logits.node;
  const Eigen::Index L = logits.rows(), V = logits.cols();
  if (static_cast<Eigen::Index>(targets.size()) != L)
    throw std::invalid_argument("cross_entropy_mean: " + std::to_string(targets.size()) +
                                " targets for " + std::to_string(L) + " rows");
  for (int tgt : targets)
    if (tgt < 0 || tgt >= V)
      throw std::invalid_argument("cross_entropy_mean: target " + std::to_string(tgt) +
                                  " outside vocab of " + std::to_string(V));
  const Scalar eps = label_smoothing;
  const Matrix& z = logits.value();
  Matrix p = exp_softmax(z, nullptr);
  Scalar loss = 0.0;
  for (Eigen::Index i = 0; i < L; ++i) {
    Scalar mx = z.row(i).maxCoeff();
    Scalar lse = mx + std::log((z.row(i).array() - mx).exp().sum());
    // q = (1-eps) * onehot + eps/V; loss_i = lse - sum_j q_j z_ij
    Scalar qz = (1.0 - eps) * z(i, targets[i]) + eps * z.row(i).mean();
    loss += lse - qz;
  }
  Matrix v(1, 1);
  v(0, 0) = loss / static_cast<Scalar>(L);
  Tensor out = logits.tape->make(std::move(v), zn->requires_grad, nullptr);
  auto* on = out.node;
  on->backprop = [zn, on, targets, p = std::move(p), eps, L, V] {
    Matrix dz = p;
    for (Eigen::Index i = 0; i < L; ++i) {
      dz(i, targets[i]) -= (1.0 - eps);
      dz.row(i).array() -= eps / static_cast<Scalar>(V);
    }
    accum(zn, dz * (on->grad(0, 0) / static_cast<Scalar>(L)));
  };
  return out;
}

Eigen::Index argmax_row(const Matrix& row) {
  Eigen::Index best = 0;
  for (Eigen::Index j = 1; j < row.cols(); ++j)
    if (row(0, j) > row(0, best)) best = j;
  return best;
}

Matrix xavier_uniform(Eigen::Index rows, Eigen::Index cols, std::mt19937_64& rng) {
  const Scalar bound = std::sqrt(6.0 / static_cast<Scalar>(rows + cols));
  std::uniform_real_distribution<Scalar> d(-bound, bound);
  Matrix m(rows, cols);
  for (Eigen::Index i = 0; i < rows; ++i)
    for (Eigen::Index j = 0; j < cols; ++j) m(i, j) = d(rng);
  return m;
}

}  // namespace simt
