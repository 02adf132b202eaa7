#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>
#include <vector>

#include "gtb/rng.hpp"
#include "gtb/types.hpp"

namespace gtb {

// Feature-major layout throughout: rows = features, cols = batch samples.
using Mat = Eigen::MatrixXd;
using Vec = Eigen::VectorXd;

/// Learnable parameter with gradient and Adam moments.
struct Tensor {
    std::string name;
    Mat value;
    Mat grad;
    Mat m;  // Adam first moment
    Mat v;  // Adam second moment

    void init(const std::string& n, int rows, int cols) {
        name = n;
        value = Mat::Zero(rows, cols);
        grad = Mat::Zero(rows, cols);
        m = Mat::Zero(rows, cols);
        v = Mat::Zero(rows, cols);
    }
    void zero_grad() { grad.setZero(); }
};

class Adam {
  public:
    Adam(double beta1 = 0.9, double beta2 = 0.999, double eps = 1e-8)
        : beta1_(beta1), beta2_(beta2), eps_(eps) {}

    void step(const std::vector<Tensor*>& params, double lr);
    int64_t updates() const { return t_; }

  private:
    double beta1_, beta2_, eps_;
    int64_t t_ = 0;
};

/// Scales gradients in place so their global L2 norm is at most max_norm;
/// returns the pre-clip norm.
double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm);

bool grads_finite(const std::vector<Tensor*>& params);

class Dense {
  public:
    Dense() = default;
    Dense(const std::string& name, int in, int out, Rng& rng);

    Mat forward(const Mat& x);
    /// Accumulates parameter gradients from dy and returns dL/dx.
    Mat backward(const Mat& dy);
    std::vector<Tensor*> params() { return {&W, &b}; }

    int in_size() const { return static_cast<int>(W.value.cols()); }
    int out_size() const { return static_cast<int>(W.value.rows()); }

    Tensor W;  // out x in
    Tensor b;  // out x 1

  private:
    Mat x_;
};

/// Valid-padding 2D convolution over channel-major flattened inputs
/// (each column holds C*H*W values).
class Conv2d {
  public:
    Conv2d() = default;
    Conv2d(const std::string& name, int in_c, int h, int w, int out_c, int k, int stride,
           Rng& rng);

    Mat forward(const Mat& x);
    Mat backward(const Mat& dy);
    std::vector<Tensor*> params() { return {&W, &b}; }

    int out_size() const { return out_c_ * oh_ * ow_; }
    int in_size() const { return in_c_ * h_ * w_; }

    Tensor W;  // out_c x (in_c*k*k)
    Tensor b;  // out_c x 1

  private:
    int in_c_ = 0, h_ = 0, w_ = 0, out_c_ = 0, k_ = 0, stride_ = 0, oh_ = 0, ow_ = 0;
    std::vector<Mat> cols_;  // cached im2col, one per sample

    Mat im2col(const Eigen::Ref<const Vec>& x) const;
};

class Relu {
  public:
    Mat forward(const Mat& x) {
        mask_ = (x.array() > 0.0).cast<double>();
        return x.cwiseProduct(mask_);
    }
    Mat backward(const Mat& dy) { return dy.cwiseProduct(mask_); }

  private:
    Mat mask_;
};

class Tanh {
  public:
    Mat forward(const Mat& x) {
        y_ = x.array().tanh();
        return y_;
    }
    Mat backward(const Mat& dy) { return dy.cwiseProduct((1.0 - y_.array().square()).matrix()); }

  private:
    Mat y_;
};

// ---------------------------------------------------------------------------
// Masked categorical head utilities
// ---------------------------------------------------------------------------

/// Per-column masked softmax state for a batch of categorical distributions.
/// Illegal entries (mask 0) get probability exactly 0 and no gradient.
struct CategoricalBatch {
    Mat probs;      // A x B
    Mat log_probs;  // A x B (illegal entries very negative)
    Vec entropy;    // B
};

CategoricalBatch masked_categorical(const Mat& logits, const Mat& mask);

/// dL/dlogits given per-sample coefficients on d(log pi(a)) and d(entropy).
Mat categorical_backward(const CategoricalBatch& cat, const std::vector<int>& actions,
                         const Vec& dlogp_coef, const Vec& dentropy_coef);

int sample_categorical(const Eigen::Ref<const Vec>& probs, Rng& rng);
int argmax_categorical(const Eigen::Ref<const Vec>& probs);

// ---------------------------------------------------------------------------
// Flat parameter access (checkpoints, finite-difference checks)
// ---------------------------------------------------------------------------

int64_t param_count(const std::vector<Tensor*>& params);
std::vector<double> flatten_values(const std::vector<Tensor*>& params);
std::vector<double> flatten_grads(const std::vector<Tensor*>& params);
void load_values(const std::vector<Tensor*>& params, const std::vector<double>& flat);

}  // namespace gtb
