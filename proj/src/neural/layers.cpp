#include "poseloop/neural/layers.hpp"

#include "poseloop/common/error.hpp"

namespace poseloop::neural {

Dense::Dense(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng) {
  w_ = &store.create(prefix + ".w", out, in);
  b_ = &store.create(prefix + ".b", out, 1);
  glorot_init(*w_, in, out, rng);
}

Mat Dense::forward(const Mat& x) {
  x_ = x;
  return (w_->value * x).colwise() + Eigen::VectorXd(b_->value.col(0));
}

Mat Dense::infer(const Mat& x) const {
  // Column-at-a-time products keep inference arithmetic independent of the
  // batch width and of each column's position, so equal inputs give
  // bit-equal outputs (blocked GEMM treats remainder columns differently).
  Mat y(w_->value.rows(), x.cols());
  for (Eigen::Index c = 0; c < x.cols(); ++c) {
    y.col(c).noalias() = w_->value * x.col(c);
    y.col(c) += b_->value.col(0);
  }
  return y;
}

Mat Dense::backward(const Mat& dy) {
  w_->grad += dy * x_.transpose();
  b_->grad.col(0) += dy.rowwise().sum();
  return w_->value.transpose() * dy;
}

Conv1d::Conv1d(ParamStore& store, const std::string& prefix, int in_ch, int out_ch,
               int kernel, int dilation, Rng& rng)
    : in_ch_(in_ch), kernel_(kernel), dilation_(dilation) {
  w_ = &store.create(prefix + ".w", out_ch, in_ch * kernel);
  b_ = &store.create(prefix + ".b", out_ch, 1);
  glorot_init(*w_, in_ch * kernel, out_ch * kernel, rng);
}

Mat Conv1d::gather(const Mat& x) const {
  int t_out = static_cast<int>(x.cols()) - shrink();
  if (t_out <= 0)
    throw DataError("conv input of length " + std::to_string(x.cols()) +
                    " is shorter than the receptive span " + std::to_string(shrink() + 1));
  Mat cols(in_ch_ * kernel_, t_out);
  for (int k = 0; k < kernel_; ++k)
    cols.middleRows(k * in_ch_, in_ch_) = x.middleCols(k * dilation_, t_out);
  return cols;
}

Mat Conv1d::forward(const Mat& x) {
  in_len_ = static_cast<int>(x.cols());
  cols_ = gather(x);
  return (w_->value * cols_).colwise() + Eigen::VectorXd(b_->value.col(0));
}

Mat Conv1d::infer(const Mat& x) const {
  // Per-column products for position-independent bits; see Dense::infer.
  const Mat cols = gather(x);
  Mat y(w_->value.rows(), cols.cols());
  for (Eigen::Index c = 0; c < cols.cols(); ++c) {
    y.col(c).noalias() = w_->value * cols.col(c);
    y.col(c) += b_->value.col(0);
  }
  return y;
}

Mat Conv1d::backward(const Mat& dy) {
  w_->grad += dy * cols_.transpose();
  b_->grad.col(0) += dy.rowwise().sum();
  Mat dcols = w_->value.transpose() * dy;
  Mat dx = Mat::Zero(in_ch_, in_len_);
  int t_out = static_cast<int>(dy.cols());
  for (int k = 0; k < kernel_; ++k)
    dx.middleCols(k * dilation_, t_out) += dcols.middleRows(k * in_ch_, in_ch_);
  return dx;
}

GRUCell::GRUCell(ParamStore& store, const std::string& prefix, int in, int hidden,
                 Rng& rng) {
  auto make = [&](const char* tag, int rows, int cols, int fi, int fo) {
    Param& p = store.create(prefix + "." + tag, rows, cols);
    if (cols > 1) glorot_init(p, fi, fo, rng);
    return &p;
  };
  wr_ = make("wr", hidden, in, in, hidden);
  wz_ = make("wz", hidden, in, in, hidden);
  wn_ = make("wn", hidden, in, in, hidden);
  ur_ = make("ur", hidden, hidden, hidden, hidden);
  uz_ = make("uz", hidden, hidden, hidden, hidden);
  un_ = make("un", hidden, hidden, hidden, hidden);
  br_ = make("br", hidden, 1, 0, 0);
  bz_ = make("bz", hidden, 1, 0, 0);
  bn_ = make("bn", hidden, 1, 0, 0);
  cr_ = make("cr", hidden, 1, 0, 0);
  cz_ = make("cz", hidden, 1, 0, 0);
  cn_ = make("cn", hidden, 1, 0, 0);
}

Mat GRUCell::step(const Mat& x, const Mat& hprev, Cache* cache) const {
  auto bias = [](const Param* p) { return Eigen::VectorXd(p->value.col(0)); };
  Mat r = sigmoid(((wr_->value * x).colwise() + bias(br_)) +
                  ((ur_->value * hprev).colwise() + bias(cr_)));
  Mat z = sigmoid(((wz_->value * x).colwise() + bias(bz_)) +
                  ((uz_->value * hprev).colwise() + bias(cz_)));
  Mat ah = (un_->value * hprev).colwise() + bias(cn_);
  Mat n = (((wn_->value * x).colwise() + bias(bn_)).array() + r.array() * ah.array())
              .tanh()
              .matrix();
  Mat h = ((1.0 - z.array()) * n.array() + z.array() * hprev.array()).matrix();
  if (cache != nullptr) *cache = Cache{x, hprev, r, z, n, ah};
  return h;
}

void GRUCell::backward_step(const Cache& c, const Mat& dh_out, Mat* dx, Mat* dh_prev) {
  Mat dz = (dh_out.array() * (c.hprev.array() - c.n.array())).matrix();
  Mat dn = (dh_out.array() * (1.0 - c.z.array())).matrix();
  Mat dh = (dh_out.array() * c.z.array()).matrix();

  Mat dn_pre = (dn.array() * (1.0 - c.n.array().square())).matrix();
  Mat dr = (dn_pre.array() * c.ah.array()).matrix();
  Mat dah = (dn_pre.array() * c.r.array()).matrix();
  Mat dz_pre = (dz.array() * c.z.array() * (1.0 - c.z.array())).matrix();
  Mat dr_pre = (dr.array() * c.r.array() * (1.0 - c.r.array())).matrix();

  wn_->grad += dn_pre * c.x.transpose();
  bn_->grad.col(0) += dn_pre.rowwise().sum();
  un_->grad += dah * c.hprev.transpose();
  cn_->grad.col(0) += dah.rowwise().sum();
  wz_->grad += dz_pre * c.x.transpose();
  bz_->grad.col(0) += dz_pre.rowwise().sum();
  uz_->grad += dz_pre * c.hprev.transpose();
  cz_->grad.col(0) += dz_pre.rowwise().sum();
  wr_->grad += dr_pre * c.x.transpose();
  br_->grad.col(0) += dr_pre.rowwise().sum();
  ur_->grad += dr_pre * c.hprev.transpose();
  cr_->grad.col(0) += dr_pre.rowwise().sum();

  dh += un_->value.transpose() * dah;
  dh += uz_->value.transpose() * dz_pre;
  dh += ur_->value.transpose() * dr_pre;
  if (dx != nullptr)
    *dx = wn_->value.transpose() * dn_pre + wz_->value.transpose() * dz_pre +
          wr_->value.transpose() * dr_pre;
  if (dh_prev != nullptr) *dh_prev = dh;
}

Mat ReLU::forward(const Mat& x) {
  mask_ = (x.array() > 0.0).cast<double>().matrix();
  return x.cwiseProduct(mask_);
}

Mat ReLU::backward(const Mat& dy) const { return dy.cwiseProduct(mask_); }

Mat Tanh::forward(const Mat& x) {
  y_ = x.array().tanh().matrix();
  return y_;
}

Mat Tanh::backward(const Mat& dy) const {
  return (dy.array() * (1.0 - y_.array().square())).matrix();
}

}  // namespace poseloop::neural
