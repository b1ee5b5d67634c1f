#ifndef TRANSSENT_NN_TAPE_HPP
#define TRANSSENT_NN_TAPE_HPP

#include <functional>
#include <vector>

#include "transsent/nn/matrix.hpp"
#include "transsent/nn/rng.hpp"

namespace transsent::nn {

using VarId = int;

// Reverse-mode autodiff over a tape of matrix operations. A graph is built
// forward by the model code; backward() walks the tape in reverse and
// accumulates gradients into every grad-tracked leaf. Tapes are cheap,
// single-use objects: one per training step or per inference call.
class Tape {
 public:
  VarId constant(Matrix v);
  VarId leaf(Matrix v);  // grad-tracked input

  const Matrix& val(VarId id) const { return nodes_[id].val; }
  const Matrix& grad(VarId id) const { return nodes_[id].grad; }
  bool requires_grad(VarId id) const { return nodes_[id].rg; }

  VarId add(VarId a, VarId b);
  VarId sub(VarId a, VarId b);
  VarId mul(VarId a, VarId b);  // elementwise
  VarId div(VarId a, VarId b);  // elementwise
  VarId add_row(VarId x, VarId row);  // broadcast a 1xC row over all rows of x
  VarId add_scalar(VarId x, double c);
  VarId scale(VarId x, double c);
  VarId matmul(VarId a, VarId b);
  VarId transpose(VarId a);
  VarId relu(VarId x);
  VarId tanh_op(VarId x);
  VarId sigmoid(VarId x);
  VarId exp_op(VarId x);
  VarId softmax_rows(VarId x);
  VarId layer_norm(VarId x, VarId gamma, VarId beta, double eps = 1e-5);
  VarId concat_cols(const std::vector<VarId>& parts);
  VarId slice_cols(VarId x, int start, int len);
  VarId reshape(VarId x, int rows, int cols);
  VarId gather_rows(VarId table, std::vector<int> ids);
  // inverted dropout; identity when rate == 0
  VarId dropout(VarId x, Rng& rng, double rate);
  VarId sum(VarId x);  // 1x1
  // mean negative log-likelihood is built from these two:
  VarId cross_entropy(VarId logits, int target);        // logits 1xC -> 1x1
  VarId mean_stack(const std::vector<VarId>& scalars);  // all 1x1 -> 1x1

  // Seeds d(root)=1 and propagates. root must be 1x1.
  void backward(VarId root);

  std::size_t num_nodes() const { return nodes_.size(); }

 private:
  struct Node {
    Matrix val;
    Matrix grad;
    bool rg = false;
    std::function<void(Tape&)> back;
  };

  VarId push(Matrix v, bool rg, std::function<void(Tape&)> back);
  Matrix& grad_buf(VarId id);

  std::vector<Node> nodes_;
};

// Training-mode dropout switch; a null rng means inference (no dropout).
struct DropoutCtx {
  Rng* rng = nullptr;
  double rate = 0.0;
};

inline VarId maybe_dropout(Tape& t, VarId x, const DropoutCtx& d) {
  return (d.rng != nullptr && d.rate > 0.0) ? t.dropout(x, *d.rng, d.rate) : x;
}

}  // namespace transsent::nn

#endif  // TRANSSENT_NN_TAPE_HPP
