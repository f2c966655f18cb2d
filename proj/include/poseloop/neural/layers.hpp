#pragma once

#include <Eigen/Dense>
#include <string>

#include "poseloop/neural/param.hpp"

namespace poseloop::neural {

using Mat = Eigen::MatrixXd;

// y = W x + b over a batch; columns are samples.
class Dense {
 public:
  Dense(ParamStore& store, const std::string& prefix, int in, int out, Rng& rng);

  Mat forward(const Mat& x);         // caches x for backward
  Mat infer(const Mat& x) const;     // no cache
  Mat backward(const Mat& dy);       // accumulates grads, returns dx

  int in_dim() const { return static_cast<int>(w_->value.cols()); }
  int out_dim() const { return static_cast<int>(w_->value.rows()); }

 private:
  Param* w_;
  Param* b_;
  Mat x_;
};

// Valid-mode 1-D temporal convolution. Input is channels x T; output is
// channels_out x (T - (kernel-1)*dilation). No padding: callers pad.
class Conv1d {
 public:
  Conv1d(ParamStore& store, const std::string& prefix, int in_ch, int out_ch,
         int kernel, int dilation, Rng& rng);

  Mat forward(const Mat& x);
  Mat infer(const Mat& x) const;
  Mat backward(const Mat& dy);

  // Frames consumed by the valid convolution: (kernel-1)*dilation.
  int shrink() const { return (kernel_ - 1) * dilation_; }
  int in_channels() const { return in_ch_; }
  int out_channels() const { return static_cast<int>(w_->value.rows()); }

 private:
  Mat gather(const Mat& x) const;  // im2col: (in_ch*kernel) x T_out

  Param* w_;  // out_ch x (in_ch * kernel)
  Param* b_;
  int in_ch_;
  int kernel_;
  int dilation_;
  Mat cols_;      // cached im2col matrix
  int in_len_ = 0;
};

// Single GRU step with explicit caches so callers own loop and BPTT order.
// Gate convention: h' = (1-z) * n + z * h.
class GRUCell {
 public:
  struct Cache {
    Mat x, hprev, r, z, n, ah;  // ah = U_n hprev + c_n, needed for dr
  };

  GRUCell(ParamStore& store, const std::string& prefix, int in, int hidden, Rng& rng);

  Mat step(const Mat& x, const Mat& hprev, Cache* cache) const;
  // Given dh for the step output, accumulates parameter grads and returns
  // gradients for the step inputs.
  void backward_step(const Cache& cache, const Mat& dh_out, Mat* dx, Mat* dh_prev);

  int hidden_dim() const { return static_cast<int>(uz_->value.rows()); }
  int in_dim() const { return static_cast<int>(wz_->value.cols()); }

 private:
  Param *wr_, *wz_, *wn_;  // input weights, hidden x in
  Param *ur_, *uz_, *un_;  // recurrent weights, hidden x hidden
  Param *br_, *bz_, *bn_;  // input biases
  Param *cr_, *cz_, *cn_;  // recurrent biases
};

// Elementwise activations with the cache held by the caller-side object.
class ReLU {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& dy) const;

 private:
  Mat mask_;
};

class Tanh {
 public:
  Mat forward(const Mat& x);
  Mat backward(const Mat& dy) const;

 private:
  Mat y_;
};

inline Mat sigmoid(const Mat& x) {
  return ((-x.array()).exp() + 1.0).inverse().matrix();
}

}  // namespace poseloop::neural
