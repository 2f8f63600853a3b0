#pragma once

#include <Eigen/Core>
#include <Eigen/SparseCore>

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>
#include <variant>
#include <vector>

namespace ada {

using Index = Eigen::Index;
using Vec = Eigen::VectorXd;
using Mat = Eigen::MatrixXd;
using SparseMat = Eigen::SparseMatrix<double, Eigen::RowMajor>;

// One vector per block. Used for w, eta, y (all length m) and x (length n_k).
using BlockVecs = std::vector<Vec>;

class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class DimensionError : public Error {
 public:
  using Error::Error;
};

class ParameterError : public Error {
 public:
  using Error::Error;
};

// Coupling matrix E_k of one block. The structured kinds avoid materializing
// identities for consensus/exchange/lasso splittings; `dense` covers the rest.
class CouplingMatrix {
 public:
  enum class Kind { dense, identity, embedded, stacked };

  static CouplingMatrix dense(Mat m);
  // scale * I_n
  static CouplingMatrix identity(Index n, double scale = 1.0);
  // scale * I_n placed at rows [offset, offset + n) of an rows x n matrix.
  static CouplingMatrix embedded(Index rows, Index offset, Index n,
                                 double scale = 1.0);
  // scale * [I_n; I_n; ...; I_n] with `copies` vertical copies.
  static CouplingMatrix stacked(Index copies, Index n, double scale = 1.0);

  Kind kind() const { return kind_; }
  Index rows() const { return rows_; }
  Index cols() const { return cols_; }
  double scale() const { return scale_; }

  Vec apply(const Vec& x) const;
  // out += E x
  void apply_add(const Vec& x, Vec& out) const;
  Vec apply_transpose(const Vec& v) const;

  // Returns alpha when E^T E = alpha * I, which is what the closed-form
  // block solvers need.
  std::optional<double> gram_scale() const;

  Mat to_dense() const;

 private:
  CouplingMatrix() = default;

  Kind kind_ = Kind::dense;
  Index rows_ = 0;
  Index cols_ = 0;
  Index offset_ = 0;
  double scale_ = 1.0;
  Mat dense_;
};

// Design matrix A_k inside g_k(A_k x_k). Dense by default, row-compressed
// sparse for data loaded from LIBSVM files.
class DesignMatrix {
 public:
  DesignMatrix() = default;
  DesignMatrix(Mat m) : storage_(std::move(m)) {}
  DesignMatrix(SparseMat m) : storage_(std::move(m)) {}

  Index rows() const;
  Index cols() const;
  bool is_sparse() const { return std::holds_alternative<SparseMat>(storage_); }

  Vec apply(const Vec& x) const;
  Vec apply_transpose(const Vec& v) const;
  // A^T A as a dense matrix.
  Mat gram() const;
  // A A^T as a dense matrix.
  Mat outer_gram() const;
  Mat to_dense() const;
  // Rows [start, start + count), same storage kind.
  DesignMatrix row_block(Index start, Index count) const;

 private:
  std::variant<Mat, SparseMat> storage_;
};

enum class SmoothLoss {
  least_squares,  // 1/2 ||u - b||^2
  logistic,       // sum_j log(1 + exp(-b_j u_j)), b_j in {-1, +1}
  quadratic,      // 1/2 ||u||^2
};

struct SmoothPart {
  DesignMatrix A;
  SmoothLoss loss = SmoothLoss::least_squares;
  Vec data;  // b for least squares, labels for logistic, unused otherwise

  // g(A x)
  double value(const Vec& x) const;
  // A^T grad g(A x)
  Vec gradient(const Vec& x) const;
  // Lipschitz constant of grad g (not of grad (g o A)).
  double loss_curvature_bound() const;
};

// lambda * sum_i weight_i |x_i|; empty weights mean all ones.
struct L1Part {
  double lambda = 0.0;
  Vec weights;

  double weight(Index i) const { return weights.size() == 0 ? 1.0 : weights[i]; }
  double value(const Vec& x) const;
};

struct FunctionDescriptor {
  std::optional<SmoothPart> smooth;
  std::optional<L1Part> l1;

  double value(const Vec& x) const;
  // Gradient of the smooth part; zero vector when absent.
  Vec smooth_gradient(const Vec& x) const;
};

struct Box {
  Vec lo;
  Vec hi;

  bool contains(const Vec& x, double tol = 0.0) const;
  Vec project(const Vec& x) const;
};

struct BlockSpec {
  Index n = 0;
  CouplingMatrix E = CouplingMatrix::identity(0);
  FunctionDescriptor objective;
  std::optional<Box> box;  // nullopt = whole space
};

// min sum_k f_k(x_k)  s.t.  sum_k E_k x_k = q,  x_k in X_k.
class Problem {
 public:
  Problem(std::vector<BlockSpec> blocks, Vec q);

  std::size_t num_blocks() const { return blocks_.size(); }
  Index m() const { return q_.size(); }
  const BlockSpec& block(std::size_t k) const { return blocks_.at(k); }
  const std::vector<BlockSpec>& blocks() const { return blocks_; }
  const Vec& q() const { return q_; }
  Index total_dim() const;

  // True for the last block, which carries q in the lifted constraint.
  bool carries_q(std::size_t k) const { return k + 1 == blocks_.size(); }

  void check_primal(const BlockVecs& x) const;

 private:
  std::vector<BlockSpec> blocks_;
  Vec q_;
};

// (w, x, eta, zeta, y). zeta lives in W-perp so only its common value is kept.
struct IterateState {
  BlockVecs w;
  BlockVecs x;
  BlockVecs eta;
  Vec zeta_bar;
  BlockVecs y;

  static IterateState zeros(const Problem& problem);
};

struct SolverParams {
  double rho = 1.0;
  double c = 1.0;
  std::size_t max_iters = 1000;
  double stop_eps = 1e-8;
  // Worker threads for the per-block solves; results do not depend on it.
  unsigned threads = 1;

  void validate() const;
};

// v_k - mean_j v_j
BlockVecs project_onto_W(const BlockVecs& v);
// mean_j v_j (the common component of P_{W-perp} v)
Vec project_onto_Wperp(const BlockVecs& v);
BlockVecs replicate(const Vec& v, std::size_t copies);

double squared_norm(const BlockVecs& v);
double dot(const BlockVecs& a, const BlockVecs& b);
BlockVecs difference(const BlockVecs& a, const BlockVecs& b);

// rho ||dw||^2 + (1/c) ||dx||^2 + (1/rho) ||deta||^2 + (1/rho) ||dzeta||^2
double g_norm_sq(const BlockVecs& dw, const BlockVecs& dx,
                 const BlockVecs& deta, const BlockVecs& dzeta, double rho,
                 double c);
// ||a - b||_G^2 over (w, x, eta, zeta), zeta replicated K times.
double g_distance_sq(const IterateState& a, const IterateState& b, double rho,
                     double c);

// sum_k E_k x_k - q
Vec constraint_residual(const BlockVecs& x, const Problem& problem);
double objective(const BlockVecs& x, const Problem& problem);

}  // namespace ada
