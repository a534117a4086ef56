// Copyright 2026 The sparseseq Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "sparseseq/autodiff.h"

#include <algorithm>
#include <cmath>
#include <memory>
#include <stdexcept>

#include "sparseseq/errors.h"

namespace sparseseq {
namespace {

using Eigen::Index;

Tape& SameTape(Var a, Var b) {
  if (!a.valid() || a.tape() != b.tape()) {
    throw std::invalid_argument("operands live on different tapes");
  }
  return *a.tape();
}

void RequireMatrix(const Tensor& t, const char* op) {
  if (t.rank() != 1 && t.rank() != 2) {
    throw ShapeError(std::string(op) + ": expected a matrix, got " +
                     t.ShapeString());
  }
}

void RequireSameShape(const Tensor& a, const Tensor& b, const char* op) {
  if (!a.SameShape(b)) {
    throw ShapeError(std::string(op) + ": shape mismatch " + a.ShapeString() +
                     " vs " + b.ShapeString());
  }
}

double StableSigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

}  // namespace

Parameter::Parameter(std::string name, Tensor value)
    : name(std::move(name)),
      value(std::move(value)),
      grad(this->value.shape()) {}

const Tensor& Var::value() const {
  if (tape_ == nullptr) throw std::logic_error("value() on an empty Var");
  return tape_->Value(*this);
}

Var Tape::Push(Node node) {
  nodes_.push_back(std::move(node));
  return Var(this, static_cast<int>(nodes_.size()) - 1);
}

void Tape::Check(Var v) const {
  if (v.tape_ != this || v.id_ < 0 ||
      static_cast<std::size_t>(v.id_) >= nodes_.size()) {
    throw std::invalid_argument("Var does not belong to this tape");
  }
}

Var Tape::Constant(Tensor value) {
  Node n;
  n.value = std::move(value);
  return Push(std::move(n));
}

Var Tape::Leaf(Tensor value) {
  Node n;
  n.value = std::move(value);
  n.requires_grad = true;
  return Push(std::move(n));
}

Var Tape::Param(Parameter& p) {
  if (!p.grad.SameShape(p.value)) p.grad = Tensor(p.value.shape());
  Node n;
  n.param = &p;
  n.requires_grad = true;
  return Push(std::move(n));
}

Var Tape::Record(Tensor value, std::initializer_list<Var> inputs,
                 BackwardFn backward) {
  return Record(std::move(value), std::span<const Var>(inputs.begin(),
                                                       inputs.size()),
                std::move(backward));
}

Var Tape::Record(Tensor value, std::span<const Var> inputs,
                 BackwardFn backward) {
  Node n;
  n.value = std::move(value);
  for (Var in : inputs) {
    Check(in);
    n.requires_grad = n.requires_grad || nodes_[in.id_].requires_grad;
  }
  if (n.requires_grad) n.backward = std::move(backward);
  return Push(std::move(n));
}

void Tape::SetBackward(Var v, BackwardFn backward) {
  Check(v);
  Node& n = nodes_[v.id_];
  if (n.requires_grad) n.backward = std::move(backward);
}

const Tensor& Tape::Value(Var v) const {
  Check(v);
  const Node& n = nodes_[v.id_];
  return n.param != nullptr ? n.param->value : n.value;
}

bool Tape::RequiresGrad(Var v) const {
  Check(v);
  return nodes_[v.id_].requires_grad;
}

Tensor& Tape::GradRef(Var v) {
  Check(v);
  Node& n = nodes_[v.id_];
  if (n.param != nullptr) return n.param->grad;
  if (n.grad.empty() && !Value(v).empty()) n.grad = Tensor(Value(v).shape());
  return n.grad;
}

const Tensor& Tape::Grad(Var v) { return GradRef(v); }

void Tape::Backward(Var loss) {
  Check(loss);
  const Tensor& lv = Value(loss);
  if (lv.size() != 1) {
    throw ShapeError("Backward() needs a scalar loss, got " +
                     lv.ShapeString());
  }
  if (!nodes_[loss.id_].requires_grad) return;
  GradRef(loss)[0] += 1.0;
  for (int i = loss.id_; i >= 0; --i) {
    Node& n = nodes_[i];
    if (!n.requires_grad || !n.backward || n.grad.empty()) continue;
    n.backward(*this, n.grad);
  }
}

// ---------------------------------------------------------------------------

Var MatMul(Var a, Var b) {
  Tape& t = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "matmul");
  RequireMatrix(bv, "matmul");
  if (av.cols() != bv.rows()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.ShapeString() +
                     " * " + bv.ShapeString());
  }
  Tensor out({av.rows(), bv.cols()});
  out.matrix().noalias() = av.matrix() * bv.matrix();
  return t.Record(std::move(out), {a, b},
                  [a, b](Tape& tape, const Tensor& g) {
                    if (tape.RequiresGrad(a)) {
                      tape.GradRef(a).matrix().noalias() +=
                          g.matrix() * b.value().matrix().transpose();
                    }
                    if (tape.RequiresGrad(b)) {
                      tape.GradRef(b).matrix().noalias() +=
                          a.value().matrix().transpose() * g.matrix();
                    }
                  });
}

Var MatMulTransposed(Var a, Var b) {
  Tape& t = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireMatrix(av, "matmul");
  RequireMatrix(bv, "matmul");
  if (av.cols() != bv.cols()) {
    throw ShapeError("matmul: inner dimensions differ, " + av.ShapeString() +
                     " * " + bv.ShapeString() + "^T");
  }
  Tensor out({av.rows(), bv.rows()});
  out.matrix().noalias() = av.matrix() * bv.matrix().transpose();
  return t.Record(std::move(out), {a, b},
                  [a, b](Tape& tape, const Tensor& g) {
                    if (tape.RequiresGrad(a)) {
                      tape.GradRef(a).matrix().noalias() +=
                          g.matrix() * b.value().matrix();
                    }
                    if (tape.RequiresGrad(b)) {
                      tape.GradRef(b).matrix().noalias() +=
                          g.matrix().transpose() * a.value().matrix();
                    }
                  });
}

Var Add(Var a, Var b) {
  Tape& t = SameTape(a, b);
  RequireSameShape(a.value(), b.value(), "add");
  Tensor out = a.value();
  out.Accumulate(b.value());
  return t.Record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.RequiresGrad(a)) tape.GradRef(a).Accumulate(g);
    if (tape.RequiresGrad(b)) tape.GradRef(b).Accumulate(g);
  });
}

Var Sub(Var a, Var b) {
  Tape& t = SameTape(a, b);
  RequireSameShape(a.value(), b.value(), "sub");
  Tensor out = a.value();
  const Tensor& bv = b.value();
  for (std::size_t i = 0; i < out.size(); ++i) out[i] -= bv[i];
  return t.Record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.RequiresGrad(a)) tape.GradRef(a).Accumulate(g);
    if (tape.RequiresGrad(b)) {
      Tensor& gb = tape.GradRef(b);
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] -= g[i];
    }
  });
}

Var Mul(Var a, Var b) {
  Tape& t = SameTape(a, b);
  const Tensor& av = a.value();
  const Tensor& bv = b.value();
  RequireSameShape(av, bv, "mul");
  Tensor out(av.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = av[i] * bv[i];
  return t.Record(std::move(out), {a, b}, [a, b](Tape& tape, const Tensor& g) {
    if (tape.RequiresGrad(a)) {
      Tensor& ga = tape.GradRef(a);
      const Tensor& bv = b.value();
      for (std::size_t i = 0; i < ga.size(); ++i) ga[i] += g[i] * bv[i];
    }
    if (tape.RequiresGrad(b)) {
      Tensor& gb = tape.GradRef(b);
      const Tensor& av = a.value();
      for (std::size_t i = 0; i < gb.size(); ++i) gb[i] += g[i] * av[i];
    }
  });
}

Var AddRowVector(Var x, Var bias) {
  Tape& t = SameTape(x, bias);
  const Tensor& xv = x.value();
  const Tensor& bv = bias.value();
  RequireMatrix(xv, "add_bias");
  if (bv.size() != xv.cols() || bv.rows() != 1) {
    throw ShapeError("add_bias: bias " + bv.ShapeString() +
                     " does not match " + xv.ShapeString());
  }
  Tensor out = xv;
  const std::size_t n = xv.cols();
  for (std::size_t r = 0; r < xv.rows(); ++r) {
    double* row = out.data() + r * n;
    for (std::size_t c = 0; c < n; ++c) row[c] += bv[c];
  }
  return t.Record(std::move(out), {x, bias},
                  [x, bias, n](Tape& tape, const Tensor& g) {
                    if (tape.RequiresGrad(x)) tape.GradRef(x).Accumulate(g);
                    if (tape.RequiresGrad(bias)) {
                      Tensor& gb = tape.GradRef(bias);
                      const std::size_t rows = g.size() / n;
                      for (std::size_t r = 0; r < rows; ++r) {
                        for (std::size_t c = 0; c < n; ++c) {
                          gb[c] += g[r * n + c];
                        }
                      }
                    }
                  });
}

Var Sigmoid(Var x) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = StableSigmoid(xv[i]);
  Var y = t.Record(std::move(out), {x}, nullptr);
  t.SetBackward(y, [x, y](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.GradRef(x);
    const Tensor& s = y.value();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += g[i] * s[i] * (1.0 - s[i]);
    }
  });
  return y;
}

Var Tanh(Var x) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = std::tanh(xv[i]);
  Var y = t.Record(std::move(out), {x}, nullptr);
  t.SetBackward(y, [x, y](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.GradRef(x);
    const Tensor& th = y.value();
    for (std::size_t i = 0; i < gx.size(); ++i) {
      gx[i] += g[i] * (1.0 - th[i] * th[i]);
    }
  });
  return y;
}

Var Scale(Var x, double factor) {
  Tape& t = *x.tape();
  Tensor out = x.value();
  for (double& v : out.values()) v *= factor;
  return t.Record(std::move(out), {x},
                  [x, factor](Tape& tape, const Tensor& g) {
                    Tensor& gx = tape.GradRef(x);
                    for (std::size_t i = 0; i < gx.size(); ++i) {
                      gx[i] += factor * g[i];
                    }
                  });
}

Var MulConstant(Var x, const Tensor& c) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  RequireSameShape(xv, c, "mul_constant");
  Tensor out(xv.shape());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = xv[i] * c[i];
  auto mask = std::make_shared<Tensor>(c);
  return t.Record(std::move(out), {x}, [x, mask](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.GradRef(x);
    const Tensor& m = *mask;
    for (std::size_t i = 0; i < gx.size(); ++i) gx[i] += g[i] * m[i];
  });
}

Var Sum(Var x) {
  Tape& t = *x.tape();
  Tensor out({1}, x.value().Sum());
  return t.Record(std::move(out), {x}, [x](Tape& tape, const Tensor& g) {
    Tensor& gx = tape.GradRef(x);
    for (double& v : gx.values()) v += g[0];
  });
}

Var SliceColumns(Var x, std::size_t begin, std::size_t width) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  RequireMatrix(xv, "slice_columns");
  const std::size_t n = xv.cols();
  if (begin + width > n || width == 0) {
    throw ShapeError("slice_columns: [" + std::to_string(begin) + ", " +
                     std::to_string(begin + width) + ") outside " +
                     xv.ShapeString());
  }
  const std::size_t rows = xv.rows();
  Tensor out({rows, width});
  out.matrix() = xv.matrix().middleCols(static_cast<Index>(begin),
                                        static_cast<Index>(width));
  return t.Record(std::move(out), {x},
                  [x, begin, width](Tape& tape, const Tensor& g) {
                    tape.GradRef(x).matrix().middleCols(
                        static_cast<Index>(begin),
                        static_cast<Index>(width)) += g.matrix();
                  });
}

Var SliceRows(Var x, std::size_t begin, std::size_t count) {
  Tape& t = *x.tape();
  const Tensor& xv = x.value();
  RequireMatrix(xv, "slice_rows");
  if (begin + count > xv.rows() || count == 0) {
    throw ShapeError("slice_rows: rows [" + std::to_string(begin) + ", " +
                     std::to_string(begin + count) + ") outside " +
                     xv.ShapeString());
  }
  const std::size_t n = xv.cols();
  Tensor out({count, n});
  std::copy_n(xv.data() + begin * n, count * n, out.data());
  return t.Record(std::move(out), {x},
                  [x, begin, count, n](Tape& tape, const Tensor& g) {
                    Tensor& gx = tape.GradRef(x);
                    double* dst = gx.data() + begin * n;
                    for (std::size_t i = 0; i < count * n; ++i) {
                      dst[i] += g[i];
                    }
                  });
}

Var ConcatColumns(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_columns: no operands");
  Tape& t = *parts[0].tape();
  const std::size_t rows = parts[0].value().rows();
  std::size_t total = 0;
  for (Var p : parts) {
    SameTape(parts[0], p);
    RequireMatrix(p.value(), "concat_columns");
    if (p.value().rows() != rows) {
      throw ShapeError("concat_columns: row counts differ");
    }
    total += p.value().cols();
  }
  if (parts.size() == 1) return parts[0];
  Tensor out({rows, total});
  std::size_t offset = 0;
  for (Var p : parts) {
    const Tensor& pv = p.value();
    out.matrix().middleCols(static_cast<Index>(offset),
                            static_cast<Index>(pv.cols())) = pv.matrix();
    offset += pv.cols();
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.Record(std::move(out), parts,
                  [inputs](Tape& tape, const Tensor& g) {
                    std::size_t off = 0;
                    for (Var p : inputs) {
                      const std::size_t w = p.value().cols();
                      if (tape.RequiresGrad(p)) {
                        tape.GradRef(p).matrix() += g.matrix().middleCols(
                            static_cast<Index>(off), static_cast<Index>(w));
                      }
                      off += w;
                    }
                  });
}

Var ConcatRows(std::span<const Var> parts) {
  if (parts.empty()) throw ShapeError("concat_rows: no operands");
  Tape& t = *parts[0].tape();
  const std::size_t cols = parts[0].value().cols();
  std::size_t total = 0;
  for (Var p : parts) {
    SameTape(parts[0], p);
    RequireMatrix(p.value(), "concat_rows");
    if (p.value().cols() != cols) {
      throw ShapeError("concat_rows: column counts differ");
    }
    total += p.value().rows();
  }
  if (parts.size() == 1) return parts[0];
  Tensor out({total, cols});
  double* dst = out.data();
  for (Var p : parts) {
    const Tensor& pv = p.value();
    dst = std::copy_n(pv.data(), pv.size(), dst);
  }
  std::vector<Var> inputs(parts.begin(), parts.end());
  return t.Record(std::move(out), parts,
                  [inputs](Tape& tape, const Tensor& g) {
                    const double* src = g.data();
                    for (Var p : inputs) {
                      const std::size_t n = p.value().size();
                      if (tape.RequiresGrad(p)) {
                        Tensor& gp = tape.GradRef(p);
                        for (std::size_t i = 0; i < n; ++i) gp[i] += src[i];
                      }
                      src += n;
                    }
                  });
}

Var GatherRows(Var table, std::span<const int> ids) {
  Tape& t = *table.tape();
  const Tensor& tv = table.value();
  RequireMatrix(tv, "gather_rows");
  const std::size_t v = tv.rows();
  const std::size_t k = tv.cols();
  Tensor out({ids.size(), k});
  for (std::size_t r = 0; r < ids.size(); ++r) {
    if (ids[r] < 0 || static_cast<std::size_t>(ids[r]) >= v) {
      throw std::out_of_range("gather_rows: id " + std::to_string(ids[r]) +
                              " outside [0, " + std::to_string(v) + ")");
    }
    std::copy_n(tv.data() + static_cast<std::size_t>(ids[r]) * k, k,
                out.data() + r * k);
  }
  std::vector<int> rows(ids.begin(), ids.end());
  return t.Record(std::move(out), {table},
                  [table, rows, k](Tape& tape, const Tensor& g) {
                    Tensor& gt = tape.GradRef(table);
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                      double* dst =
                          gt.data() + static_cast<std::size_t>(rows[r]) * k;
                      const double* src = g.data() + r * k;
                      for (std::size_t c = 0; c < k; ++c) dst[c] += src[c];
                    }
                  });
}

Var SoftmaxCrossEntropy(Var logits, std::span<const int> targets) {
  Tape& t = *logits.tape();
  const Tensor& lv = logits.value();
  RequireMatrix(lv, "softmax_cross_entropy");
  const std::size_t rows = lv.rows();
  const std::size_t classes = lv.cols();
  if (targets.size() != rows) {
    throw ShapeError("softmax_cross_entropy: " + std::to_string(rows) +
                     " rows but " + std::to_string(targets.size()) +
                     " targets");
  }
  auto probs = std::make_shared<Tensor>(lv.shape());
  std::size_t valid = 0;
  double nll = 0.0;
  for (std::size_t r = 0; r < rows; ++r) {
    const int target = targets[r];
    if (target != kIgnoreTarget &&
        (target < 0 || static_cast<std::size_t>(target) >= classes)) {
      throw std::out_of_range("softmax_cross_entropy: target " +
                              std::to_string(target) + " outside [0, " +
                              std::to_string(classes) + ")");
    }
    auto in = lv.matrix().row(static_cast<Index>(r)).array();
    auto p = probs->matrix().row(static_cast<Index>(r)).array();
    const double mx = in.maxCoeff();
    p = (in - mx).exp();
    const double z = p.sum();
    p /= z;
    if (target != kIgnoreTarget) {
      ++valid;
      nll -= lv.at(r, static_cast<std::size_t>(target)) - mx - std::log(z);
    }
  }
  const double denom = valid == 0 ? 1.0 : static_cast<double>(valid);
  std::vector<int> tg(targets.begin(), targets.end());
  return t.Record(
      Tensor({1}, nll / denom), {logits},
      [logits, probs, tg, denom, classes](Tape& tape, const Tensor& g) {
        Tensor& gl = tape.GradRef(logits);
        const double s = g[0] / denom;
        for (std::size_t r = 0; r < tg.size(); ++r) {
          if (tg[r] == kIgnoreTarget) continue;
          double* dst = gl.data() + r * classes;
          const double* p = probs->data() + r * classes;
          for (std::size_t c = 0; c < classes; ++c) dst[c] += s * p[c];
          dst[tg[r]] -= s;
        }
      });
}

Var Detach(Var x, Tape& dst) { return dst.Constant(x.value()); }

CrossEntropyStats EvaluateLogits(const Tensor& logits,
                                 std::span<const int> targets) {
  RequireMatrix(logits, "evaluate_logits");
  if (targets.size() != logits.rows()) {
    throw ShapeError("evaluate_logits: row/target count mismatch");
  }
  CrossEntropyStats stats;
  const std::size_t classes = logits.cols();
  for (std::size_t r = 0; r < logits.rows(); ++r) {
    const int target = targets[r];
    if (target == kIgnoreTarget) continue;
    if (target < 0 || static_cast<std::size_t>(target) >= classes) {
      throw std::out_of_range("evaluate_logits: target out of range");
    }
    auto row = logits.matrix().row(static_cast<Index>(r)).array();
    Index best = 0;
    const double mx = row.maxCoeff(&best);
    const double lse = mx + std::log((row - mx).exp().sum());
    stats.total_nll += lse - row(target);
    stats.correct += (best == target);
    ++stats.count;
  }
  return stats;
}

std::vector<int> ArgmaxRows(const Tensor& x) {
  RequireMatrix(x, "argmax_rows");
  std::vector<int> out(x.rows());
  for (std::size_t r = 0; r < x.rows(); ++r) {
    Index best = 0;
    x.matrix().row(static_cast<Index>(r)).maxCoeff(&best);
    out[r] = static_cast<int>(best);
  }
  return out;
}

}  // namespace sparseseq
