#include "udg/tensor.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <sstream>

#include "udg/math.hpp"

namespace udg {

std::string to_string(const Shape& shape) {
  std::ostringstream os;
  os << '(';
  for (std::size_t i = 0; i < shape.size(); ++i) {
    if (i) os << ", ";
    os << shape[i];
  }
  os << ')';
  return os.str();
}

namespace {

Matrix storage_for(const Shape& shape) {
  switch (shape.size()) {
    case 0: return Matrix::Zero(1, 1);
    case 1: return Matrix::Zero(1, shape[0]);
    case 2: return Matrix::Zero(shape[0], shape[1]);
    default: throw ShapeError("tensor rank " + std::to_string(shape.size()) + " is not supported (max 2)");
  }
}

void check_storage(const Shape& shape, const Matrix& m) {
  for (Index d : shape) {
    if (d <= 0) throw ShapeError("tensor dimensions must be positive, got " + to_string(shape));
  }
  if (shape.size() > 2) {
    throw ShapeError("tensor rank " + std::to_string(shape.size()) + " is not supported (max 2)");
  }
  const Index rows = shape.size() == 2 ? shape[0] : 1;
  const Index cols = shape.empty() ? 1 : shape.back();
  if (rows != m.rows() || cols != m.cols()) {
    std::ostringstream os;
    os << "storage " << m.rows() << 'x' << m.cols() << " does not match shape " << to_string(shape);
    throw ShapeError(os.str());
  }
}

}  // namespace

Tensor::Tensor() : shape_{}, value_(std::make_shared<const Matrix>(Matrix::Zero(1, 1))) {}

Tensor::Tensor(Shape shape, Matrix values) : shape_(std::move(shape)) {
  check_storage(shape_, values);
  value_ = std::make_shared<const Matrix>(std::move(values));
}

Tensor Tensor::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return Tensor({}, std::move(m));
}

Tensor Tensor::vector(std::span<const double> values) {
  Matrix m(1, static_cast<Index>(values.size()));
  std::copy(values.begin(), values.end(), m.data());
  return Tensor({static_cast<Index>(values.size())}, std::move(m));
}

Tensor Tensor::vector(std::initializer_list<double> values) {
  return vector(std::span<const double>(values.begin(), values.size()));
}

Tensor Tensor::matrix(Matrix values) {
  const Index r = values.rows(), c = values.cols();
  return Tensor({r, c}, std::move(values));
}

Tensor Tensor::zeros(const Shape& shape) { return Tensor(shape, storage_for(shape)); }

Tensor Tensor::full(const Shape& shape, double value) {
  Matrix m = storage_for(shape);
  m.setConstant(value);
  return Tensor(shape, std::move(m));
}

double Tensor::item() const {
  if (size() != 1) throw ShapeError("item() on tensor of shape " + to_string(shape_));
  return (*value_)(0, 0);
}

Tensor Tensor::detach() const {
  Tensor t;
  t.shape_ = shape_;
  t.value_ = value_;
  return t;
}

const char* primitive_name(Primitive op) noexcept {
  switch (op) {
    case Primitive::kAdd: return "add";
    case Primitive::kSub: return "sub";
    case Primitive::kMul: return "mul";
    case Primitive::kMatMul: return "matmul";
    case Primitive::kTranspose: return "transpose";
    case Primitive::kRelu: return "relu";
    case Primitive::kSoftplus: return "softplus";
    case Primitive::kSigmoid: return "sigmoid";
    case Primitive::kExp: return "exp";
    case Primitive::kLog: return "log";
    case Primitive::kSqrt: return "sqrt";
    case Primitive::kReciprocal: return "reciprocal";
    case Primitive::kSum: return "sum";
    case Primitive::kMean: return "mean";
    case Primitive::kBatchSum: return "batch_sum";
    case Primitive::kRowSum: return "row_sum";
    case Primitive::kScaleRows: return "scale_rows";
    case Primitive::kSoftmax: return "softmax";
    case Primitive::kLogSoftmax: return "log_softmax";
    case Primitive::kSoftmaxCrossEntropy: return "softmax_cross_entropy";
    case Primitive::kSquaredDistance: return "squared_distance";
    case Primitive::kConcat: return "concat";
    case Primitive::kSlice: return "slice";
    case Primitive::kPad: return "pad";
    case Primitive::kReshape: return "reshape";
  }
  return "unknown";
}

namespace {

[[noreturn]] void shape_mismatch(Primitive op, const Tensor& a, const Tensor& b) {
  throw ShapeError(std::string(primitive_name(op)) + ": incompatible shapes " + to_string(a.shape()) +
                   " and " + to_string(b.shape()));
}

[[noreturn]] void bad_operand(Primitive op, const Tensor& a, const char* what) {
  throw ShapeError(std::string(primitive_name(op)) + ": expected " + what + ", got shape " +
                   to_string(a.shape()));
}

void expect_arity(Primitive op, std::span<const Tensor> in, std::size_t n) {
  if (in.size() != n) {
    throw std::invalid_argument(std::string(primitive_name(op)) + ": expected " + std::to_string(n) +
                                " inputs, got " + std::to_string(in.size()));
  }
}

enum class Broadcast { kSame, kLeftScalar, kRightScalar, kLeftRow, kRightRow };

Broadcast classify(Primitive op, const Tensor& a, const Tensor& b) {
  if (a.shape() == b.shape()) return Broadcast::kSame;
  if (a.rank() == 0) return Broadcast::kLeftScalar;
  if (b.rank() == 0) return Broadcast::kRightScalar;
  if (a.rank() == 1 && b.rank() == 2 && a.shape()[0] == b.shape()[1]) return Broadcast::kLeftRow;
  if (a.rank() == 2 && b.rank() == 1 && b.shape()[0] == a.shape()[1]) return Broadcast::kRightRow;
  shape_mismatch(op, a, b);
}

template <typename F>
Tensor elementwise_binary(Primitive op, const Tensor& a, const Tensor& b, F f) {
  const Matrix& A = a.value();
  const Matrix& B = b.value();
  switch (classify(op, a, b)) {
    case Broadcast::kSame: return Tensor(a.shape(), A.binaryExpr(B, f));
    case Broadcast::kLeftScalar: {
      const double s = A(0, 0);
      return Tensor(b.shape(), B.unaryExpr([&](double v) { return f(s, v); }));
    }
    case Broadcast::kRightScalar: {
      const double s = B(0, 0);
      return Tensor(a.shape(), A.unaryExpr([&](double v) { return f(v, s); }));
    }
    case Broadcast::kLeftRow: {
      Matrix out(B.rows(), B.cols());
      for (Index r = 0; r < B.rows(); ++r) out.row(r) = A.row(0).binaryExpr(B.row(r), f);
      return Tensor(b.shape(), std::move(out));
    }
    case Broadcast::kRightRow: {
      Matrix out(A.rows(), A.cols());
      for (Index r = 0; r < A.rows(); ++r) out.row(r) = A.row(r).binaryExpr(B.row(0), f);
      return Tensor(a.shape(), std::move(out));
    }
  }
  shape_mismatch(op, a, b);
}

template <typename F>
Tensor elementwise_unary(const Tensor& a, F f) {
  return Tensor(a.shape(), a.value().unaryExpr(f));
}

const Tensor& expect_rank2(Primitive op, const Tensor& a) {
  if (a.rank() != 2) bad_operand(op, a, "a rank-2 tensor");
  return a;
}

const Tensor& expect_rank1(Primitive op, const Tensor& a) {
  if (a.rank() != 1) bad_operand(op, a, "a rank-1 tensor");
  return a;
}

Matrix row_log_softmax(const Matrix& z) {
  Matrix out(z.rows(), z.cols());
  for (Index r = 0; r < z.rows(); ++r) {
    const double m = z.row(r).maxCoeff();
    const double lse = m + std::log((z.row(r).array() - m).exp().sum());
    out.row(r) = z.row(r).array() - lse;
  }
  return out;
}

Tensor forward_kernel(Primitive op, std::span<const Tensor> in, const PrimitiveAttrs& attrs) {
  switch (op) {
    case Primitive::kAdd:
      expect_arity(op, in, 2);
      return elementwise_binary(op, in[0], in[1], [](double x, double y) { return x + y; });
    case Primitive::kSub:
      expect_arity(op, in, 2);
      return elementwise_binary(op, in[0], in[1], [](double x, double y) { return x - y; });
    case Primitive::kMul:
      expect_arity(op, in, 2);
      return elementwise_binary(op, in[0], in[1], [](double x, double y) { return x * y; });
    case Primitive::kMatMul: {
      expect_arity(op, in, 2);
      const Tensor& a = expect_rank2(op, in[0]);
      const Tensor& b = expect_rank2(op, in[1]);
      if (a.shape()[1] != b.shape()[0]) shape_mismatch(op, a, b);
      Matrix out = a.value() * b.value();
      return Tensor::matrix(std::move(out));
    }
    case Primitive::kTranspose: {
      expect_arity(op, in, 1);
      const Tensor& a = expect_rank2(op, in[0]);
      return Tensor::matrix(a.value().transpose());
    }
    case Primitive::kRelu:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return x > 0.0 ? x : 0.0; });
    case Primitive::kSoftplus:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return math::softplus(x); });
    case Primitive::kSigmoid:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return math::logistic(x); });
    case Primitive::kExp:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return std::exp(x); });
    case Primitive::kLog:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return std::log(x); });
    case Primitive::kSqrt:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return std::sqrt(x); });
    case Primitive::kReciprocal:
      expect_arity(op, in, 1);
      return elementwise_unary(in[0], [](double x) { return 1.0 / x; });
    case Primitive::kSum:
      expect_arity(op, in, 1);
      return Tensor::scalar(in[0].value().sum());
    case Primitive::kMean:
      expect_arity(op, in, 1);
      return Tensor::scalar(in[0].value().sum() / static_cast<double>(in[0].size()));
    case Primitive::kBatchSum: {
      expect_arity(op, in, 1);
      const Tensor& a = expect_rank2(op, in[0]);
      return Tensor({a.shape()[1]}, a.value().colwise().sum());
    }
    case Primitive::kRowSum: {
      expect_arity(op, in, 1);
      const Tensor& a = expect_rank2(op, in[0]);
      return Tensor({a.shape()[0]}, a.value().rowwise().sum().transpose());
    }
    case Primitive::kScaleRows: {
      expect_arity(op, in, 2);
      const Tensor& a = expect_rank2(op, in[0]);
      const Tensor& w = in[1];
      if (w.rank() != 1 || w.shape()[0] != a.shape()[0]) shape_mismatch(op, a, w);
      Matrix out = a.value();
      for (Index r = 0; r < out.rows(); ++r) out.row(r) *= w.value()(0, r);
      return Tensor(a.shape(), std::move(out));
    }
    case Primitive::kSoftmax: {
      expect_arity(op, in, 1);
      const Tensor& z = expect_rank2(op, in[0]);
      return Tensor(z.shape(), row_log_softmax(z.value()).array().exp().matrix());
    }
    case Primitive::kLogSoftmax: {
      expect_arity(op, in, 1);
      const Tensor& z = expect_rank2(op, in[0]);
      return Tensor(z.shape(), row_log_softmax(z.value()));
    }
    case Primitive::kSoftmaxCrossEntropy: {
      expect_arity(op, in, 2);
      const Tensor& z = expect_rank2(op, in[0]);
      const Tensor& t = in[1];
      if (z.shape() != t.shape()) shape_mismatch(op, z, t);
      const double total = (t.value().array() * row_log_softmax(z.value()).array()).sum();
      return Tensor::scalar(-total / static_cast<double>(z.shape()[0]));
    }
    case Primitive::kSquaredDistance: {
      expect_arity(op, in, 2);
      const Tensor& a = in[0];
      const Tensor& b = in[1];
      if (a.shape() != b.shape() || a.rank() == 0) shape_mismatch(op, a, b);
      const Matrix d = a.value() - b.value();
      if (a.rank() == 1) return Tensor::scalar(d.squaredNorm());
      return Tensor({a.shape()[0]}, d.rowwise().squaredNorm().transpose());
    }
    case Primitive::kConcat: {
      expect_arity(op, in, 2);
      const Tensor& a = expect_rank1(op, in[0]);
      const Tensor& b = expect_rank1(op, in[1]);
      Matrix out(1, a.size() + b.size());
      out << a.value(), b.value();
      const Index n = out.cols();
      return Tensor({n}, std::move(out));
    }
    case Primitive::kSlice: {
      expect_arity(op, in, 1);
      const Tensor& a = expect_rank1(op, in[0]);
      if (attrs.offset < 0 || attrs.length <= 0 || attrs.offset + attrs.length > a.size()) {
        throw ShapeError("slice: range [" + std::to_string(attrs.offset) + ", " +
                         std::to_string(attrs.offset + attrs.length) + ") outside shape " +
                         to_string(a.shape()));
      }
      return Tensor({attrs.length}, a.value().middleCols(attrs.offset, attrs.length));
    }
    case Primitive::kPad: {
      expect_arity(op, in, 1);
      const Tensor& a = expect_rank1(op, in[0]);
      if (attrs.offset < 0 || attrs.offset + a.size() > attrs.length) {
        throw ShapeError("pad: shape " + to_string(a.shape()) + " at offset " +
                         std::to_string(attrs.offset) + " does not fit length " +
                         std::to_string(attrs.length));
      }
      Matrix out = Matrix::Zero(1, attrs.length);
      out.middleCols(attrs.offset, a.size()) = a.value();
      return Tensor({attrs.length}, std::move(out));
    }
    case Primitive::kReshape: {
      expect_arity(op, in, 1);
      const Tensor& a = in[0];
      Matrix out = storage_for(attrs.shape);
      if (out.size() != a.size()) {
        throw ShapeError("reshape: cannot view shape " + to_string(a.shape()) + " as " +
                         to_string(attrs.shape));
      }
      std::copy(a.data().begin(), a.data().end(), out.data());
      return Tensor(attrs.shape, std::move(out));
    }
  }
  throw std::invalid_argument("unknown primitive id " + std::to_string(static_cast<int>(op)));
}

// Reduces a broadcast gradient back to the operand's shape.
Tensor unbroadcast(const Tensor& g, const Shape& target) {
  if (g.shape() == target) return g;
  if (target.empty()) return sum(g);
  return batch_sum(g);
}

Tensor ones_like(const Tensor& t) { return Tensor::full(t.shape(), 1.0); }

std::vector<Tensor> vjp(Primitive op, const std::vector<Tensor>& in, const Tensor& out,
                        const PrimitiveAttrs& attrs, const Tensor& g) {
  switch (op) {
    case Primitive::kAdd:
      return {unbroadcast(g, in[0].shape()), unbroadcast(g, in[1].shape())};
    case Primitive::kSub:
      return {unbroadcast(g, in[0].shape()), unbroadcast(-g, in[1].shape())};
    case Primitive::kMul:
      return {unbroadcast(g * in[1], in[0].shape()), unbroadcast(g * in[0], in[1].shape())};
    case Primitive::kMatMul:
      return {matmul(g, transpose(in[1])), matmul(transpose(in[0]), g)};
    case Primitive::kTranspose:
      return {transpose(g)};
    case Primitive::kRelu: {
      Tensor mask(in[0].shape(), in[0].value().unaryExpr([](double x) { return x > 0.0 ? 1.0 : 0.0; }));
      return {g * mask};
    }
    case Primitive::kSoftplus:
      return {g * sigmoid(in[0])};
    case Primitive::kSigmoid:
      return {g * out * (Tensor::scalar(1.0) - out)};
    case Primitive::kExp:
      return {g * out};
    case Primitive::kLog:
      return {g * reciprocal(in[0])};
    case Primitive::kSqrt:
      return {scale(g * reciprocal(out), 0.5)};
    case Primitive::kReciprocal:
      return {-(g * out * out)};
    case Primitive::kSum:
      return {ones_like(in[0]) * g};
    case Primitive::kMean:
      return {Tensor::full(in[0].shape(), 1.0 / static_cast<double>(in[0].size())) * g};
    case Primitive::kBatchSum:
      return {ones_like(in[0]) * g};
    case Primitive::kRowSum:
      return {scale_rows(ones_like(in[0]), g)};
    case Primitive::kScaleRows:
      return {scale_rows(g, in[1]), row_sum(g * in[0])};
    case Primitive::kSoftmax:
      return {out * g - scale_rows(out, row_sum(g * out))};
    case Primitive::kLogSoftmax:
      return {g - scale_rows(softmax(in[0]), row_sum(g))};
    case Primitive::kSoftmaxCrossEntropy: {
      const double inv_b = 1.0 / static_cast<double>(in[0].shape()[0]);
      Tensor gz = scale(scale_rows(softmax(in[0]), row_sum(in[1])) - in[1], inv_b) * g;
      Tensor gt = scale(log_softmax(in[0]), -inv_b) * g;
      return {gz, gt};
    }
    case Primitive::kSquaredDistance: {
      const Tensor d = in[0] - in[1];
      Tensor ga = in[0].rank() == 1 ? d * scale(g, 2.0) : scale_rows(d, scale(g, 2.0));
      return {ga, -ga};
    }
    case Primitive::kConcat: {
      const Index na = in[0].size();
      return {slice(g, 0, na), slice(g, na, in[1].size())};
    }
    case Primitive::kSlice:
      return {pad(g, attrs.offset, in[0].size())};
    case Primitive::kPad:
      return {slice(g, attrs.offset, in[0].size())};
    case Primitive::kReshape:
      return {reshape(g, in[0].shape())};
  }
  throw std::invalid_argument("unknown primitive id " + std::to_string(static_cast<int>(op)));
}

}  // namespace

Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs, const PrimitiveAttrs& attrs) {
  Tape* tape = nullptr;
  for (const Tensor& t : inputs) {
    if (!t.requires_grad()) continue;
    if (tape != nullptr && tape != t.tape()) {
      throw std::invalid_argument(std::string(primitive_name(op)) + ": inputs belong to different tapes");
    }
    tape = t.tape();
  }
  Tensor value = forward_kernel(op, inputs, attrs);
  if (tape == nullptr || !tape->recording()) return value;
  return tape->record(op, std::vector<Tensor>(inputs.begin(), inputs.end()), attrs, std::move(value));
}

class Tape::PauseRecording {
 public:
  explicit PauseRecording(Tape& tape) : tape_(tape), saved_(tape.recording_) { tape_.recording_ = false; }
  ~PauseRecording() { tape_.recording_ = saved_; }
  PauseRecording(const PauseRecording&) = delete;
  PauseRecording& operator=(const PauseRecording&) = delete;

 private:
  Tape& tape_;
  bool saved_;
};

Tensor Tape::record(Primitive op, std::vector<Tensor> inputs, const PrimitiveAttrs& attrs, Tensor value) {
  value.tape_ = this;
  value.node_ = nodes_.size();
  nodes_.push_back(Node{op, std::move(inputs), attrs, value});
  return value;
}

Tensor Tape::watch(const Tensor& t) {
  Tensor leaf = t.detach();
  leaf.tape_ = this;
  leaf.node_ = nodes_.size();
  nodes_.push_back(Node{std::nullopt, {}, {}, leaf});
  return leaf;
}

std::vector<Tensor> Tape::watch_all(std::span<const Tensor> ts) {
  std::vector<Tensor> out;
  out.reserve(ts.size());
  for (const Tensor& t : ts) out.push_back(watch(t));
  return out;
}

std::vector<Tensor> Tape::backward(const Tensor& loss, std::span<const Tensor> params,
                                   const BackwardOptions& options) {
  if (loss.rank() != 0) {
    throw std::invalid_argument("backward: loss must be a scalar, got shape " + to_string(loss.shape()));
  }
  const bool tracked = loss.requires_grad() && loss.tape() == this;
  const std::size_t n = tracked ? *loss.node_id() + 1 : 0;
  std::vector<std::optional<Tensor>> grads(n);

  {
    const bool create_graph = options.create_graph.value_or(mode_ == TapeMode::kSecondOrder);
    std::optional<PauseRecording> pause;
    if (!create_graph) pause.emplace(*this);

    if (tracked) grads[n - 1] = Tensor::scalar(1.0);
    for (std::size_t i = n; i-- > 0;) {
      if (!grads[i] || !nodes_[i].op) continue;
      // Copy: recording may append to nodes_ and invalidate references.
      const Node node = nodes_[i];
      std::vector<Tensor> gin = vjp(*node.op, node.inputs, node.output, node.attrs, *grads[i]);
      for (std::size_t j = 0; j < node.inputs.size(); ++j) {
        const Tensor& input = node.inputs[j];
        if (!input.requires_grad() || input.tape() != this) continue;
        auto& slot = grads[*input.node_id()];
        slot = slot ? add(*slot, gin[j]) : gin[j];
      }
    }
  }

  std::vector<Tensor> out;
  out.reserve(params.size());
  for (std::size_t k = 0; k < params.size(); ++k) {
    const Tensor& p = params[k];
    const bool reachable = p.requires_grad() && p.tape() == this && *p.node_id() < n && grads[*p.node_id()];
    if (reachable) {
      out.push_back(*grads[*p.node_id()]);
    } else if (options.allow_unused) {
      out.push_back(Tensor::zeros(p.shape()));
    } else {
      throw std::invalid_argument("backward: parameter " + std::to_string(k) + " of shape " +
                                  to_string(p.shape()) + " is not reachable from the loss");
    }
  }
  return out;
}

bool Tape::replay_matches() const {
  std::vector<Tensor> replayed;
  replayed.reserve(nodes_.size());
  for (const Node& node : nodes_) {
    if (!node.op) {
      replayed.push_back(node.output.detach());
      continue;
    }
    std::vector<Tensor> inputs;
    inputs.reserve(node.inputs.size());
    for (const Tensor& t : node.inputs) {
      inputs.push_back(t.requires_grad() && t.tape() == this ? replayed[*t.node_id()] : t.detach());
    }
    Tensor v = forward_kernel(*node.op, inputs, node.attrs);
    const auto expect = node.output.data();
    const auto got = v.data();
    if (v.shape() != node.output.shape() ||
        std::memcmp(expect.data(), got.data(), expect.size() * sizeof(double)) != 0) {
      return false;
    }
    replayed.push_back(std::move(v));
  }
  return true;
}

// Operation wrappers.

namespace {
Tensor unary(Primitive op, const Tensor& a) { return apply_primitive(op, std::span<const Tensor>(&a, 1)); }
Tensor binary(Primitive op, const Tensor& a, const Tensor& b) {
  const Tensor in[2] = {a, b};
  return apply_primitive(op, in);
}
}  // namespace

Tensor add(const Tensor& a, const Tensor& b) { return binary(Primitive::kAdd, a, b); }
Tensor sub(const Tensor& a, const Tensor& b) { return binary(Primitive::kSub, a, b); }
Tensor mul(const Tensor& a, const Tensor& b) { return binary(Primitive::kMul, a, b); }
Tensor matmul(const Tensor& a, const Tensor& b) { return binary(Primitive::kMatMul, a, b); }
Tensor transpose(const Tensor& a) { return unary(Primitive::kTranspose, a); }
Tensor relu(const Tensor& a) { return unary(Primitive::kRelu, a); }
Tensor softplus(const Tensor& a) { return unary(Primitive::kSoftplus, a); }
Tensor sigmoid(const Tensor& a) { return unary(Primitive::kSigmoid, a); }
Tensor exp(const Tensor& a) { return unary(Primitive::kExp, a); }
Tensor log(const Tensor& a) { return unary(Primitive::kLog, a); }
Tensor sqrt(const Tensor& a) { return unary(Primitive::kSqrt, a); }
Tensor reciprocal(const Tensor& a) { return unary(Primitive::kReciprocal, a); }
Tensor sum(const Tensor& a) { return unary(Primitive::kSum, a); }
Tensor mean(const Tensor& a) { return unary(Primitive::kMean, a); }
Tensor batch_sum(const Tensor& a) { return unary(Primitive::kBatchSum, a); }
Tensor batch_mean(const Tensor& a) {
  if (a.rank() != 2) throw ShapeError("batch_mean: expected a rank-2 tensor, got shape " + to_string(a.shape()));
  return scale(batch_sum(a), 1.0 / static_cast<double>(a.shape()[0]));
}
Tensor row_sum(const Tensor& a) { return unary(Primitive::kRowSum, a); }
Tensor scale_rows(const Tensor& a, const Tensor& w) { return binary(Primitive::kScaleRows, a, w); }
Tensor softmax(const Tensor& logits) { return unary(Primitive::kSoftmax, logits); }
Tensor log_softmax(const Tensor& logits) { return unary(Primitive::kLogSoftmax, logits); }
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets) {
  return binary(Primitive::kSoftmaxCrossEntropy, logits, targets);
}
Tensor squared_distance(const Tensor& a, const Tensor& b) { return binary(Primitive::kSquaredDistance, a, b); }
Tensor concat(const Tensor& a, const Tensor& b) { return binary(Primitive::kConcat, a, b); }

Tensor slice(const Tensor& a, Index offset, Index length) {
  PrimitiveAttrs attrs;
  attrs.offset = offset;
  attrs.length = length;
  return apply_primitive(Primitive::kSlice, std::span<const Tensor>(&a, 1), attrs);
}

Tensor pad(const Tensor& a, Index offset, Index total) {
  PrimitiveAttrs attrs;
  attrs.offset = offset;
  attrs.length = total;
  return apply_primitive(Primitive::kPad, std::span<const Tensor>(&a, 1), attrs);
}

Tensor reshape(const Tensor& a, Shape shape) {
  PrimitiveAttrs attrs;
  attrs.shape = std::move(shape);
  return apply_primitive(Primitive::kReshape, std::span<const Tensor>(&a, 1), attrs);
}

Tensor scale(const Tensor& a, double factor) { return mul(a, Tensor::scalar(factor)); }

Tensor element(const Tensor& a, Index i) { return reshape(slice(a, i, 1), {}); }

}  // namespace udg
