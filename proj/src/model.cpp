#include "ada/model.hpp"

#include <cmath>
#include <string>

namespace ada {

namespace {

void require_same_lengths(const BlockVecs& v) {
  if (v.empty()) throw DimensionError("empty block tuple");
  for (const auto& vk : v) {
    if (vk.size() != v.front().size()) {
      throw DimensionError("block vectors have different lengths");
    }
  }
}

double log1p_exp(double t) {
  // log(1 + e^t) without overflow
  return t > 0.0 ? t + std::log1p(std::exp(-t)) : std::log1p(std::exp(t));
}

double sigmoid(double t) {
  if (t >= 0.0) {
    const double e = std::exp(-t);
    return 1.0 / (1.0 + e);
  }
  const double e = std::exp(t);
  return e / (1.0 + e);
}

}  // namespace

// ---------------------------------------------------------------------------
// CouplingMatrix

CouplingMatrix CouplingMatrix::dense(Mat m) {
  CouplingMatrix e;
  e.kind_ = Kind::dense;
  e.rows_ = m.rows();
  e.cols_ = m.cols();
  e.dense_ = std::move(m);
  return e;
}

CouplingMatrix CouplingMatrix::identity(Index n, double scale) {
  CouplingMatrix e;
  e.kind_ = Kind::identity;
  e.rows_ = n;
  e.cols_ = n;
  e.scale_ = scale;
  return e;
}

CouplingMatrix CouplingMatrix::embedded(Index rows, Index offset, Index n,
                                        double scale) {
  if (offset < 0 || offset + n > rows) {
    throw DimensionError("embedded identity does not fit in the row range");
  }
  CouplingMatrix e;
  e.kind_ = Kind::embedded;
  e.rows_ = rows;
  e.cols_ = n;
  e.offset_ = offset;
  e.scale_ = scale;
  return e;
}

CouplingMatrix CouplingMatrix::stacked(Index copies, Index n, double scale) {
  if (copies < 1) throw DimensionError("stacked identity needs a copy");
  CouplingMatrix e;
  e.kind_ = Kind::stacked;
  e.rows_ = copies * n;
  e.cols_ = n;
  e.scale_ = scale;
  return e;
}

Vec CouplingMatrix::apply(const Vec& x) const {
  Vec out = Vec::Zero(rows_);
  apply_add(x, out);
  return out;
}

void CouplingMatrix::apply_add(const Vec& x, Vec& out) const {
  if (x.size() != cols_ || out.size() != rows_) {
    throw DimensionError("coupling matrix product dimension mismatch");
  }
  switch (kind_) {
    case Kind::dense:
      out.noalias() += dense_ * x;
      break;
    case Kind::identity:
      out += scale_ * x;
      break;
    case Kind::embedded:
      out.segment(offset_, cols_) += scale_ * x;
      break;
    case Kind::stacked:
      for (Index r = 0; r < rows_; r += cols_) out.segment(r, cols_) += scale_ * x;
      break;
  }
}

Vec CouplingMatrix::apply_transpose(const Vec& v) const {
  if (v.size() != rows_) {
    throw DimensionError("coupling matrix transpose dimension mismatch");
  }
  switch (kind_) {
    case Kind::dense:
      return dense_.transpose() * v;
    case Kind::identity:
      return scale_ * v;
    case Kind::embedded:
      return scale_ * v.segment(offset_, cols_);
    case Kind::stacked: {
      Vec out = Vec::Zero(cols_);
      for (Index r = 0; r < rows_; r += cols_) out += v.segment(r, cols_);
      return scale_ * out;
    }
  }
  return {};
}

std::optional<double> CouplingMatrix::gram_scale() const {
  switch (kind_) {
    case Kind::identity:
    case Kind::embedded:
      return scale_ * scale_;
    case Kind::stacked:
      return scale_ * scale_ * static_cast<double>(rows_ / cols_);
    case Kind::dense:
      break;
  }
  return std::nullopt;
}

Mat CouplingMatrix::to_dense() const {
  if (kind_ == Kind::dense) return dense_;
  Mat out = Mat::Zero(rows_, cols_);
  for (Index j = 0; j < cols_; ++j) {
    Vec ej = Vec::Unit(cols_, j);
    out.col(j) = apply(ej);
  }
  return out;
}

// ---------------------------------------------------------------------------
// DesignMatrix

Index DesignMatrix::rows() const {
  return std::visit([](const auto& m) { return Index(m.rows()); }, storage_);
}

Index DesignMatrix::cols() const {
  return std::visit([](const auto& m) { return Index(m.cols()); }, storage_);
}

Vec DesignMatrix::apply(const Vec& x) const {
  if (x.size() != cols()) throw DimensionError("design matrix product mismatch");
  return std::visit([&](const auto& m) -> Vec { return m * x; }, storage_);
}

Vec DesignMatrix::apply_transpose(const Vec& v) const {
  if (v.size() != rows()) throw DimensionError("design matrix product mismatch");
  return std::visit([&](const auto& m) -> Vec { return m.transpose() * v; },
                    storage_);
}

Mat DesignMatrix::gram() const {
  if (const auto* d = std::get_if<Mat>(&storage_)) {
    Mat g = Mat::Zero(d->cols(), d->cols());
    g.selfadjointView<Eigen::Lower>().rankUpdate(d->transpose());
    return g.selfadjointView<Eigen::Lower>();
  }
  const auto& s = std::get<SparseMat>(storage_);
  return Mat(s.transpose() * s);
}

Mat DesignMatrix::outer_gram() const {
  if (const auto* d = std::get_if<Mat>(&storage_)) {
    Mat g = Mat::Zero(d->rows(), d->rows());
    g.selfadjointView<Eigen::Lower>().rankUpdate(*d);
    return g.selfadjointView<Eigen::Lower>();
  }
  const auto& s = std::get<SparseMat>(storage_);
  return Mat(s * s.transpose());
}

Mat DesignMatrix::to_dense() const {
  if (const auto* d = std::get_if<Mat>(&storage_)) return *d;
  return Mat(std::get<SparseMat>(storage_));
}

DesignMatrix DesignMatrix::row_block(Index start, Index count) const {
  if (start < 0 || count < 0 || start + count > rows()) {
    throw DimensionError("row block out of range");
  }
  if (const auto* d = std::get_if<Mat>(&storage_)) return Mat(d->middleRows(start, count));
  return SparseMat(std::get<SparseMat>(storage_).middleRows(start, count));
}

// ---------------------------------------------------------------------------
// Function pieces

double SmoothPart::value(const Vec& x) const {
  const Vec u = A.apply(x);
  switch (loss) {
    case SmoothLoss::least_squares:
      return 0.5 * (u - data).squaredNorm();
    case SmoothLoss::quadratic:
      return 0.5 * u.squaredNorm();
    case SmoothLoss::logistic: {
      double s = 0.0;
      for (Index j = 0; j < u.size(); ++j) s += log1p_exp(-data[j] * u[j]);
      return s;
    }
  }
  return 0.0;
}

Vec SmoothPart::gradient(const Vec& x) const {
  const Vec u = A.apply(x);
  switch (loss) {
    case SmoothLoss::least_squares:
      return A.apply_transpose(u - data);
    case SmoothLoss::quadratic:
      return A.apply_transpose(u);
    case SmoothLoss::logistic: {
      Vec g(u.size());
      for (Index j = 0; j < u.size(); ++j) {
        g[j] = -data[j] * sigmoid(-data[j] * u[j]);
      }
      return A.apply_transpose(g);
    }
  }
  return {};
}

double SmoothPart::loss_curvature_bound() const {
  return loss == SmoothLoss::logistic ? 0.25 : 1.0;
}

double L1Part::value(const Vec& x) const {
  if (weights.size() == 0) return lambda * x.lpNorm<1>();
  return lambda * weights.cwiseProduct(x.cwiseAbs()).sum();
}

double FunctionDescriptor::value(const Vec& x) const {
  double v = 0.0;
  if (smooth) v += smooth->value(x);
  if (l1) v += l1->value(x);
  return v;
}

Vec FunctionDescriptor::smooth_gradient(const Vec& x) const {
  if (smooth) return smooth->gradient(x);
  return Vec::Zero(x.size());
}

bool Box::contains(const Vec& x, double tol) const {
  return ((x - lo).array() >= -tol).all() && ((hi - x).array() >= -tol).all();
}

Vec Box::project(const Vec& x) const { return x.cwiseMax(lo).cwiseMin(hi); }

// ---------------------------------------------------------------------------
// Problem

Problem::Problem(std::vector<BlockSpec> blocks, Vec q)
    : blocks_(std::move(blocks)), q_(std::move(q)) {
  if (blocks_.size() < 2) {
    throw DimensionError("a decomposition problem needs at least two blocks");
  }
  for (std::size_t k = 0; k < blocks_.size(); ++k) {
    const auto& b = blocks_[k];
    const std::string where = "block " + std::to_string(k + 1) + ": ";
    if (b.n < 1) throw DimensionError(where + "empty variable");
    if (b.E.rows() != m()) throw DimensionError(where + "E_k has wrong row count");
    if (b.E.cols() != b.n) throw DimensionError(where + "E_k has wrong column count");
    const auto& f = b.objective;
    if (!f.smooth && !f.l1) {
      throw ParameterError(where + "objective has neither smooth nor l1 part");
    }
    if (f.smooth) {
      if (f.smooth->A.cols() != b.n) throw DimensionError(where + "A_k column mismatch");
      if (f.smooth->loss != SmoothLoss::quadratic &&
          f.smooth->data.size() != f.smooth->A.rows()) {
        throw DimensionError(where + "loss data length differs from A_k rows");
      }
    }
    if (f.l1) {
      if (f.l1->lambda < 0.0) throw ParameterError(where + "negative l1 scale");
      if (f.l1->weights.size() != 0 &&
          (f.l1->weights.size() != b.n || (f.l1->weights.array() < 0.0).any())) {
        throw ParameterError(where + "invalid l1 weights");
      }
    }
    if (b.box) {
      if (b.box->lo.size() != b.n || b.box->hi.size() != b.n) {
        throw DimensionError(where + "box bounds have wrong length");
      }
      if ((b.box->lo.array() > b.box->hi.array()).any()) {
        throw ParameterError(where + "box has lo > hi");
      }
    }
  }
}

Index Problem::total_dim() const {
  Index n = 0;
  for (const auto& b : blocks_) n += b.n;
  return n;
}

void Problem::check_primal(const BlockVecs& x) const {
  if (x.size() != blocks_.size()) throw DimensionError("wrong number of blocks in x");
  for (std::size_t k = 0; k < x.size(); ++k) {
    if (x[k].size() != blocks_[k].n) {
      throw DimensionError("x block " + std::to_string(k + 1) + " has wrong length");
    }
  }
}

IterateState IterateState::zeros(const Problem& problem) {
  const auto K = problem.num_blocks();
  const Index m = problem.m();
  IterateState s;
  s.w.assign(K, Vec::Zero(m));
  s.eta.assign(K, Vec::Zero(m));
  s.y.assign(K, Vec::Zero(m));
  s.zeta_bar = Vec::Zero(m);
  s.x.reserve(K);
  for (const auto& b : problem.blocks()) s.x.push_back(Vec::Zero(b.n));
  return s;
}

void SolverParams::validate() const {
  if (!(rho > 0.0)) throw ParameterError("rho must be positive");
  if (!(c > 0.0)) throw ParameterError("c must be positive");
  if (!(stop_eps > 0.0)) throw ParameterError("stop_eps must be positive");
}

// ---------------------------------------------------------------------------
// Subspace geometry

Vec project_onto_Wperp(const BlockVecs& v) {
  require_same_lengths(v);
  Vec mean = Vec::Zero(v.front().size());
  for (const auto& vk : v) mean += vk;
  return mean / static_cast<double>(v.size());
}

BlockVecs project_onto_W(const BlockVecs& v) {
  const Vec mean = project_onto_Wperp(v);
  BlockVecs out(v);
  for (auto& vk : out) vk -= mean;
  return out;
}

BlockVecs replicate(const Vec& v, std::size_t copies) {
  return BlockVecs(copies, v);
}

double squared_norm(const BlockVecs& v) {
  double s = 0.0;
  for (const auto& vk : v) s += vk.squaredNorm();
  return s;
}

double dot(const BlockVecs& a, const BlockVecs& b) {
  if (a.size() != b.size()) throw DimensionError("block tuple size mismatch");
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size()) throw DimensionError("block length mismatch");
    s += a[k].dot(b[k]);
  }
  return s;
}

BlockVecs difference(const BlockVecs& a, const BlockVecs& b) {
  if (a.size() != b.size()) throw DimensionError("block tuple size mismatch");
  BlockVecs out(a.size());
  for (std::size_t k = 0; k < a.size(); ++k) {
    if (a[k].size() != b[k].size()) throw DimensionError("block length mismatch");
    out[k] = a[k] - b[k];
  }
  return out;
}

double g_norm_sq(const BlockVecs& dw, const BlockVecs& dx,
                 const BlockVecs& deta, const BlockVecs& dzeta, double rho,
                 double c) {
  if (!(rho > 0.0) || !(c > 0.0)) {
    throw ParameterError("G-norm needs positive rho and c");
  }
  return rho * squared_norm(dw) + squared_norm(dx) / c +
         (squared_norm(deta) + squared_norm(dzeta)) / rho;
}

double g_distance_sq(const IterateState& a, const IterateState& b, double rho,
                     double c) {
  if (!(rho > 0.0) || !(c > 0.0)) {
    throw ParameterError("G-norm needs positive rho and c");
  }
  const double K = static_cast<double>(a.w.size());
  return rho * squared_norm(difference(a.w, b.w)) +
         squared_norm(difference(a.x, b.x)) / c +
         (squared_norm(difference(a.eta, b.eta)) +
          K * (a.zeta_bar - b.zeta_bar).squaredNorm()) /
             rho;
}

Vec constraint_residual(const BlockVecs& x, const Problem& problem) {
  problem.check_primal(x);
  Vec r = -problem.q();
  for (std::size_t k = 0; k < x.size(); ++k) problem.block(k).E.apply_add(x[k], r);
  return r;
}

double objective(const BlockVecs& x, const Problem& problem) {
  problem.check_primal(x);
  double f = 0.0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    f += problem.block(k).objective.value(x[k]);
  }
  return f;
}

}  // namespace ada
