#include "gtb/nn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace gtb {

namespace {

void xavier_init(Mat& m, Rng& rng) {
    const double a = std::sqrt(6.0 / static_cast<double>(m.rows() + m.cols()));
    for (Eigen::Index c = 0; c < m.cols(); ++c)
        for (Eigen::Index r = 0; r < m.rows(); ++r) m(r, c) = (2.0 * rng.uniform01() - 1.0) * a;
}

}  // namespace

void Adam::step(const std::vector<Tensor*>& params, double lr) {
    ++t_;
    const double bc1 = 1.0 - std::pow(beta1_, static_cast<double>(t_));
    const double bc2 = 1.0 - std::pow(beta2_, static_cast<double>(t_));
    for (Tensor* p : params) {
        p->m = beta1_ * p->m + (1.0 - beta1_) * p->grad;
        p->v = beta2_ * p->v + (1.0 - beta2_) * p->grad.cwiseProduct(p->grad);
        const Mat m_hat = p->m / bc1;
        const Mat v_hat = p->v / bc2;
        p->value.array() -= lr * m_hat.array() / (v_hat.array().sqrt() + eps_);
    }
}

double clip_grad_norm(const std::vector<Tensor*>& params, double max_norm) {
    double sq = 0.0;
    for (const Tensor* p : params) sq += p->grad.squaredNorm();
    const double norm = std::sqrt(sq);
    if (max_norm > 0.0 && norm > max_norm) {
        const double scale = max_norm / norm;
        for (Tensor* p : params) p->grad *= scale;
    }
    return norm;
}

bool grads_finite(const std::vector<Tensor*>& params) {
    for (const Tensor* p : params)
        if (!p->grad.allFinite()) return false;
    return true;
}

// ---------------------------------------------------------------------------
// Dense
// ---------------------------------------------------------------------------

Dense::Dense(const std::string& name, int in, int out, Rng& rng) {
    W.init(name + ".W", out, in);
    b.init(name + ".b", out, 1);
    xavier_init(W.value, rng);
}

Mat Dense::forward(const Mat& x) {
    x_ = x;
    return (W.value * x).colwise() + Vec(b.value.col(0));
}

Mat Dense::backward(const Mat& dy) {
    W.grad += dy * x_.transpose();
    b.grad.col(0) += dy.rowwise().sum();
    return W.value.transpose() * dy;
}

// ---------------------------------------------------------------------------
// Conv2d
// ---------------------------------------------------------------------------

Conv2d::Conv2d(const std::string& name, int in_c, int h, int w, int out_c, int k, int stride,
               Rng& rng)
    : in_c_(in_c), h_(h), w_(w), out_c_(out_c), k_(k), stride_(stride) {
    require(k >= 1 && stride >= 1, "Conv2d: kernel and stride must be positive");
    require(h >= k && w >= k, "Conv2d: input smaller than kernel");
    oh_ = (h - k) / stride + 1;
    ow_ = (w - k) / stride + 1;
    W.init(name + ".W", out_c, in_c * k * k);
    b.init(name + ".b", out_c, 1);
    xavier_init(W.value, rng);
}

Mat Conv2d::im2col(const Eigen::Ref<const Vec>& x) const {
    Mat col(in_c_ * k_ * k_, oh_ * ow_);
    for (int oy = 0; oy < oh_; ++oy) {
        for (int ox = 0; ox < ow_; ++ox) {
            const int pos = oy * ow_ + ox;
            int row = 0;
            for (int ic = 0; ic < in_c_; ++ic) {
                const int base = ic * h_ * w_;
                for (int ky = 0; ky < k_; ++ky) {
                    const int y = oy * stride_ + ky;
                    for (int kx = 0; kx < k_; ++kx) {
                        const int xx = ox * stride_ + kx;
                        col(row++, pos) = x[base + y * w_ + xx];
                    }
                }
            }
        }
    }
    return col;
}

Mat Conv2d::forward(const Mat& x) {
    const Eigen::Index batch = x.cols();
    cols_.assign(static_cast<size_t>(batch), Mat());
    Mat out(out_size(), batch);
    for (Eigen::Index s = 0; s < batch; ++s) {
        cols_[static_cast<size_t>(s)] = im2col(x.col(s));
        // (positions x out_c), column-major flatten gives channel-major output
        Mat o2 = cols_[static_cast<size_t>(s)].transpose() * W.value.transpose();
        o2.rowwise() += b.value.col(0).transpose();
        out.col(s) = Eigen::Map<const Vec>(o2.data(), out_size());
    }
    return out;
}

Mat Conv2d::backward(const Mat& dy) {
    const Eigen::Index batch = dy.cols();
    Mat dx = Mat::Zero(in_size(), batch);
    for (Eigen::Index s = 0; s < batch; ++s) {
        Eigen::Map<const Mat> do2(dy.col(s).data(), oh_ * ow_, out_c_);
        const Mat& col = cols_[static_cast<size_t>(s)];
        W.grad += do2.transpose() * col.transpose();
        b.grad.col(0) += do2.colwise().sum().transpose();
        const Mat dcol = W.value.transpose() * do2.transpose();  // (ic*k*k) x positions
        // col2im scatter
        auto dxs = dx.col(s);
        for (int oy = 0; oy < oh_; ++oy) {
            for (int ox = 0; ox < ow_; ++ox) {
                const int pos = oy * ow_ + ox;
                int row = 0;
                for (int ic = 0; ic < in_c_; ++ic) {
                    const int base = ic * h_ * w_;
                    for (int ky = 0; ky < k_; ++ky) {
                        const int y = oy * stride_ + ky;
                        for (int kx = 0; kx < k_; ++kx) {
                            const int xx = ox * stride_ + kx;
                            dxs[base + y * w_ + xx] += dcol(row++, pos);
                        }
                    }
                }
            }
        }
    }
    return dx;
}

// ---------------------------------------------------------------------------
// Masked categorical
// ---------------------------------------------------------------------------

CategoricalBatch masked_categorical(const Mat& logits, const Mat& mask) {
    constexpr double kMaskedLogProb = -1e30;
    const Eigen::Index a = logits.rows();
    const Eigen::Index batch = logits.cols();
    CategoricalBatch cat;
    cat.log_probs.resize(a, batch);
    cat.probs.resize(a, batch);
    cat.entropy.resize(batch);
    for (Eigen::Index c = 0; c < batch; ++c) {
        double mx = -std::numeric_limits<double>::infinity();
        for (Eigen::Index r = 0; r < a; ++r)
            if (mask(r, c) != 0.0) mx = std::max(mx, logits(r, c));
        require(std::isfinite(mx), "masked_categorical: no legal action in column");

        double z = 0.0;
        for (Eigen::Index r = 0; r < a; ++r) {
            // illegal entries get probability exactly 0, not a denormal
            const double ex = mask(r, c) != 0.0 ? std::exp(logits(r, c) - mx) : 0.0;
            cat.probs(r, c) = ex;
            z += ex;
        }
        const double log_z = std::log(z);
        double h = 0.0;
        for (Eigen::Index r = 0; r < a; ++r) {
            if (mask(r, c) != 0.0) {
                cat.log_probs(r, c) = logits(r, c) - mx - log_z;
                const double p = cat.probs(r, c) / z;
                cat.probs(r, c) = p;
                if (p > 0.0) h -= p * cat.log_probs(r, c);
            } else {
                cat.log_probs(r, c) = kMaskedLogProb;
                cat.probs(r, c) = 0.0;
            }
        }
        cat.entropy[c] = h;
    }
    return cat;
}

Mat categorical_backward(const CategoricalBatch& cat, const std::vector<int>& actions,
                         const Vec& dlogp_coef, const Vec& dentropy_coef) {
    const Eigen::Index a = cat.probs.rows();
    const Eigen::Index batch = cat.probs.cols();
    require(static_cast<Eigen::Index>(actions.size()) == batch,
            "categorical_backward: one action per sample");
    Mat dlogits = Mat::Zero(a, batch);
    for (Eigen::Index c = 0; c < batch; ++c) {
        // d log pi(act) / d logit_j = 1[j=act] - p_j
        const double cl = dlogp_coef[c];
        if (cl != 0.0) {
            dlogits.col(c) -= cl * cat.probs.col(c);
            dlogits(actions[static_cast<size_t>(c)], c) += cl;
        }
        const double ce = dentropy_coef[c];
        if (ce != 0.0) {
            // dH/dlogit_j = -p_j (log p_j + H)
            for (Eigen::Index r = 0; r < a; ++r) {
                const double p = cat.probs(r, c);
                if (p > 0.0) dlogits(r, c) += ce * (-p * (cat.log_probs(r, c) + cat.entropy[c]));
            }
        }
    }
    return dlogits;
}

int sample_categorical(const Eigen::Ref<const Vec>& probs, Rng& rng) {
    const double u = rng.uniform01();
    double cum = 0.0;
    int last_positive = -1;
    for (Eigen::Index i = 0; i < probs.size(); ++i) {
        if (probs[i] <= 0.0) continue;
        last_positive = static_cast<int>(i);
        cum += probs[i];
        if (u < cum) return static_cast<int>(i);
    }
    require(last_positive >= 0, "sample_categorical: no positive-probability action");
    return last_positive;
}

int argmax_categorical(const Eigen::Ref<const Vec>& probs) {
    Eigen::Index best = 0;
    probs.maxCoeff(&best);
    return static_cast<int>(best);
}

// ---------------------------------------------------------------------------
// Flat parameter access
// ---------------------------------------------------------------------------

int64_t param_count(const std::vector<Tensor*>& params) {
    int64_t n = 0;
    for (const Tensor* p : params) n += p->value.size();
    return n;
}

std::vector<double> flatten_values(const std::vector<Tensor*>& params) {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(param_count(params)));
    for (const Tensor* p : params)
        flat.insert(flat.end(), p->value.data(), p->value.data() + p->value.size());
    return flat;
}

std::vector<double> flatten_grads(const std::vector<Tensor*>& params) {
    std::vector<double> flat;
    flat.reserve(static_cast<size_t>(param_count(params)));
    for (const Tensor* p : params)
        flat.insert(flat.end(), p->grad.data(), p->grad.data() + p->grad.size());
    return flat;
}

void load_values(const std::vector<Tensor*>& params, const std::vector<double>& flat) {
    require(static_cast<int64_t>(flat.size()) == param_count(params),
            "load_values: size mismatch");
    size_t off = 0;
    for (Tensor* p : params) {
        std::copy(flat.begin() + static_cast<std::ptrdiff_t>(off),
                  flat.begin() + static_cast<std::ptrdiff_t>(off + p->value.size()),
                  p->value.data());
        off += static_cast<size_t>(p->value.size());
    }
}

}  // namespace gtb
