#pragma once

#include <cstddef>
#include <memory>
#include <optional>
#include <span>
#include <stdexcept>
#include <string>
#include <vector>

#include <Eigen/Core>

namespace udg {

using Index = Eigen::Index;
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Shape = std::vector<Index>;

class Tape;

struct ShapeError : std::invalid_argument {
  using std::invalid_argument::invalid_argument;
};

std::string to_string(const Shape& shape);

// Dense tensor of rank 0, 1 or 2 stored as a row-major Eigen matrix
// (rank 0 -> 1x1, rank 1 of length n -> 1xn). The value is immutable and
// shared between copies. A tensor that carries a node id is tracked by a tape.
class Tensor {
 public:
  Tensor();
  Tensor(Shape shape, Matrix values);

  static Tensor scalar(double value);
  static Tensor vector(std::span<const double> values);
  static Tensor vector(std::initializer_list<double> values);
  static Tensor matrix(Matrix values);
  static Tensor zeros(const Shape& shape);
  static Tensor full(const Shape& shape, double value);

  const Shape& shape() const noexcept { return shape_; }
  Index rank() const noexcept { return static_cast<Index>(shape_.size()); }
  Index size() const noexcept { return value_->size(); }
  Index rows() const noexcept { return value_->rows(); }
  Index cols() const noexcept { return value_->cols(); }

  const Matrix& value() const noexcept { return *value_; }
  std::span<const double> data() const noexcept {
    return {value_->data(), static_cast<std::size_t>(value_->size())};
  }
  double item() const;
  double operator[](Index i) const { return value_->data()[i]; }

  bool requires_grad() const noexcept { return node_.has_value(); }
  std::optional<std::size_t> node_id() const noexcept { return node_; }
  Tape* tape() const noexcept { return tape_; }

  // Same value, no tape attachment.
  Tensor detach() const;

 private:
  friend class Tape;
  Shape shape_;
  std::shared_ptr<const Matrix> value_;
  Tape* tape_ = nullptr;
  std::optional<std::size_t> node_;
};

enum class Primitive {
  kAdd,
  kSub,
  kMul,
  kMatMul,
  kTranspose,
  kRelu,
  kSoftplus,
  kSigmoid,
  kExp,
  kLog,
  kSqrt,
  kReciprocal,
  kSum,
  kMean,
  kBatchSum,
  kRowSum,
  kScaleRows,
  kSoftmax,
  kLogSoftmax,
  kSoftmaxCrossEntropy,
  kSquaredDistance,
  kConcat,
  kSlice,
  kPad,
  kReshape,
};

const char* primitive_name(Primitive op) noexcept;

// Integer attributes for the structural primitives (slice, pad, reshape).
struct PrimitiveAttrs {
  Index offset = 0;
  Index length = 0;
  Shape shape;
};

// Broadcasting: elementwise binaries accept equal shapes, a rank-0 operand
// against anything, or a rank-1 operand of length n against a rank-2 (b, n)
// operand (trailing dimension). Nothing else broadcasts.
Tensor apply_primitive(Primitive op, std::span<const Tensor> inputs,
                       const PrimitiveAttrs& attrs = {});

enum class TapeMode { kFirstOrder, kSecondOrder };

struct BackwardOptions {
  // Unreachable parameters get a zero gradient instead of an error.
  bool allow_unused = false;
  // Record the gradient computation so it can be differentiated again.
  // Defaults to the tape mode.
  std::optional<bool> create_graph;
};

// Append-only record of primitive applications. Node ids are topologically
// ordered (inputs always precede outputs). Tensors keep a raw pointer to their
// tape, so a tape is pinned in memory and must outlive the tensors it tracks.
class Tape {
 public:
  explicit Tape(TapeMode mode = TapeMode::kFirstOrder) : mode_(mode) {}
  Tape(const Tape&) = delete;
  Tape& operator=(const Tape&) = delete;

  TapeMode mode() const noexcept { return mode_; }
  std::size_t size() const noexcept { return nodes_.size(); }
  bool recording() const noexcept { return recording_; }

  // Registers a leaf holding the value of `t`.
  Tensor watch(const Tensor& t);
  std::vector<Tensor> watch_all(std::span<const Tensor> ts);

  std::vector<Tensor> backward(const Tensor& loss, std::span<const Tensor> params,
                               const BackwardOptions& options = {});

  // Re-executes every recorded primitive from the leaves and reports whether
  // all outputs are reproduced bit-exactly.
  bool replay_matches() const;

 private:
  friend Tensor apply_primitive(Primitive, std::span<const Tensor>, const PrimitiveAttrs&);

  struct Node {
    std::optional<Primitive> op;  // empty for leaves
    std::vector<Tensor> inputs;
    PrimitiveAttrs attrs;
    Tensor output;
  };

  Tensor record(Primitive op, std::vector<Tensor> inputs, const PrimitiveAttrs& attrs,
                Tensor value);

  class PauseRecording;

  TapeMode mode_;
  bool recording_ = true;
  std::vector<Node> nodes_;
};

// Differentiable operations. All route through apply_primitive.
Tensor add(const Tensor& a, const Tensor& b);
Tensor sub(const Tensor& a, const Tensor& b);
Tensor mul(const Tensor& a, const Tensor& b);
Tensor matmul(const Tensor& a, const Tensor& b);
Tensor transpose(const Tensor& a);
Tensor relu(const Tensor& a);
Tensor softplus(const Tensor& a);
Tensor sigmoid(const Tensor& a);
Tensor exp(const Tensor& a);
Tensor log(const Tensor& a);
Tensor sqrt(const Tensor& a);
Tensor reciprocal(const Tensor& a);
Tensor sum(const Tensor& a);
Tensor mean(const Tensor& a);
Tensor batch_sum(const Tensor& a);   // (b, n) -> (n)
Tensor batch_mean(const Tensor& a);  // (b, n) -> (n)
Tensor row_sum(const Tensor& a);     // (b, n) -> (b)
Tensor scale_rows(const Tensor& a, const Tensor& w);  // (b, n), (b) -> (b, n)
Tensor softmax(const Tensor& logits);
Tensor log_softmax(const Tensor& logits);
// Mean over the batch of the cross-entropy against soft targets.
Tensor softmax_cross_entropy(const Tensor& logits, const Tensor& targets);
// Per-row squared Euclidean distance: (b, n) -> (b); rank-1 inputs -> scalar.
Tensor squared_distance(const Tensor& a, const Tensor& b);
Tensor concat(const Tensor& a, const Tensor& b);  // rank-1 only
Tensor slice(const Tensor& a, Index offset, Index length);  // rank-1 only
Tensor pad(const Tensor& a, Index offset, Index total);     // rank-1 only
Tensor reshape(const Tensor& a, Shape shape);
Tensor scale(const Tensor& a, double factor);
Tensor element(const Tensor& a, Index i);  // rank-1 -> scalar

inline Tensor operator+(const Tensor& a, const Tensor& b) { return add(a, b); }
inline Tensor operator-(const Tensor& a, const Tensor& b) { return sub(a, b); }
inline Tensor operator*(const Tensor& a, const Tensor& b) { return mul(a, b); }
inline Tensor operator*(double s, const Tensor& a) { return scale(a, s); }
inline Tensor operator-(const Tensor& a) { return scale(a, -1.0); }

}  // namespace udg
